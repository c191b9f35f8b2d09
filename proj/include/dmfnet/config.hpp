#pragma once

#include <cstdint>
#include <string>

namespace dmfnet {

/// Network-shape configuration. `paper()` holds the published constants;
/// `toy()` is a scaled-down preset for gradient checks and CPU training.
struct NetConfig {
  int64_t n = 2048;        // input / ground-truth cloud size N
  int64_t n0 = 256;        // coarse cloud size N_0
  int64_t channels = 512;  // encoder channel width C
  int64_t c_local = 128;   // local feature width C_L
  int64_t c_enh = 512;     // enhanced feature width C_L'
  int64_t c_ncb = 64;      // point-wise embedding width inside the NCB
  int64_t image_size = 224;
  int image_stages = 4;  // stride-2 residual stages after the stem
  int heads = 4;
  int ratio = 2;  // upsample ratio r per stage
  int64_t k_edge = 20;
  int64_t pool_ratio = 4;
  int64_t k_pool1 = 16;
  int64_t k_pool2 = 6;
  int64_t k_ncb = 16;
  int sat_blocks = 3;
  int64_t ec1_width = 64;   // first EdgeConv output width
  int64_t ec2_width = 256;  // second EdgeConv output width
  double f_tau = 0.01;      // F-Score threshold in unit-sphere space

  static NetConfig paper();
  static NetConfig toy();

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Derived sizes.
  int64_t n_p() const { return n / (pool_ratio * pool_ratio); }  // point feature rows
  int64_t grid() const { return image_size >> (image_stages + 1); }
  int64_t n_i() const { return grid() * grid(); }  // pixel feature rows
  int64_t stem_channels() const { return channels >> image_stages; }
  int64_t seed_points() const { return 2 * n0; }  // coarse cloud after FPS-concat
  int64_t n1() const { return seed_points() * ratio; }
  int64_t nc() const { return n1() * ratio; }
};

/// Optimizer and schedule configuration (published training constants).
struct TrainConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.7;
  int decay_every = 20;  // epochs between decays
  int epochs = 120;
  int batch_size = 16;
  uint64_t seed = 1;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  int checkpoint_every = 10;

  void validate() const;
};

/// lr0 * decay^floor(epoch / decay_every).
double lr_at(int epoch, const TrainConfig& cfg);

}  // namespace dmfnet
