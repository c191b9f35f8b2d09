#include "dmfnet/config.hpp"

#include <cmath>
#include <stdexcept>

namespace dmfnet {

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

void require(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

}  // namespace

NetConfig NetConfig::paper() { return NetConfig{}; }

NetConfig NetConfig::toy() {
  NetConfig cfg;
  cfg.n = 256;
  cfg.n0 = 64;
  cfg.channels = 64;
  cfg.c_local = 32;
  cfg.c_enh = 64;
  cfg.c_ncb = 16;
  cfg.image_size = 32;
  cfg.image_stages = 2;
  cfg.heads = 2;
  cfg.ec1_width = 16;
  cfg.ec2_width = 32;
  return cfg;
}

void NetConfig::validate() const {
  require(n >= 1 && n0 >= 1 && channels >= 1 && c_local >= 1 && c_enh >= 1 && c_ncb >= 1,
          "all sizes must be >= 1");
  require(ratio >= 1, "upsample ratio must be >= 1");
  require(sat_blocks >= 1, "need at least one attention block");
  require(pool_ratio >= 1 && n % (pool_ratio * pool_ratio) == 0,
          "cloud size must be divisible by pool_ratio^2");
  require(n_p() >= 1, "pooled point count must be >= 1");
  require(k_edge >= 1 && k_edge <= n, "k_edge must be in [1, n]");
  require(k_edge <= n / pool_ratio, "k_edge must fit the once-pooled cloud");
  require(k_pool1 >= 1 && k_pool1 <= n, "k_pool1 must be in [1, n]");
  require(k_pool2 >= 1 && k_pool2 <= n / pool_ratio, "k_pool2 must fit the once-pooled cloud");
  require(k_ncb >= 1, "k_ncb must be >= 1");
  require(image_stages >= 0, "image_stages must be >= 0");
  const int64_t halvings = int64_t{1} << (image_stages + 1);
  require(image_size >= 8, "image size must be >= 8");
  require(image_size % halvings == 0, "image size must be divisible by 2^(image_stages+1)");
  require(grid() >= 1, "image feature grid collapsed to zero");
  require(channels % (int64_t{1} << image_stages) == 0,
          "channel width must be divisible by 2^image_stages");
  require(stem_channels() >= 1, "stem channel width must be >= 1");
  require(heads >= 1 && c_enh % heads == 0, "heads must divide the enhanced width");
  require(c_local % 2 == 0, "local feature width must be even (split between two context paths)");
  require(n >= n0, "cloud size must be >= coarse size for FPS seeding");
  require(seed_points() <= n1() && n1() <= nc(), "upsample cascade must be non-decreasing");
  require(n1() <= n, "intermediate stage cannot exceed the ground-truth resolution");
  require(ec1_width >= 1 && ec2_width >= 1, "EdgeConv widths must be >= 1");
  require(f_tau > 0.0, "F-Score threshold must be positive");
}

void TrainConfig::validate() const {
  require(lr0 > 0.0, "learning rate must be positive");
  require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0,
          "Adam betas must lie in (0, 1)");
  require(eps > 0.0, "Adam epsilon must be positive");
  require(decay_factor > 0.0, "decay factor must be positive");
  require(decay_every >= 1, "decay interval must be >= 1 epoch");
  require(epochs >= 1, "epoch count must be >= 1");
  require(batch_size >= 1, "batch size must be >= 1");
  require(clip_norm >= 0.0, "clip norm must be >= 0");
  require(checkpoint_every >= 1, "checkpoint interval must be >= 1");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

}  // namespace dmfnet
