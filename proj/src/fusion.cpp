#include "dmfnet/fusion.hpp"

#include <string>

namespace dmfnet {

Var global_pool(Tape& tape, Var feat) {
  (void)tape;
  const Tensor& v = feat.value();
  if (v.rank() != 2 || v.dim(0) < 1)
    shape_error("global_pool: expects a nonempty [n x c] matrix, got " + v.shape_str());
  Var mx = max_over_axis(feat, 0).first;  // [c]
  return reshape(mx, {1, v.dim(1)});
}

Var enhance_and_attend(Tape& tape, Var side_feat, Var other_global, const Mlp& mlp, int64_t m) {
  const int64_t n = side_feat.value().dim(0);
  const int64_t c = side_feat.value().dim(1);
  if (other_global.value().dim(0) != 1 || other_global.value().dim(1) != c)
    shape_error("enhance_and_attend: global feature " + other_global.value().shape_str() +
                " incompatible with side features " + side_feat.value().shape_str());
  if (mlp.out_width() != m)
    shape_error("enhance_and_attend: MLP emits " + std::to_string(mlp.out_width()) +
                " columns, expected " + std::to_string(m));
  Var rep = gather_rows(other_global, replicate_index(n));  // [n x c]
  Var joint = concat({side_feat, rep}, 1);                  // [n x 2c]
  return softmax_last(mlp(tape, joint));                    // [n x m]
}

DualFusion::DualFusion(ModelParams& params, const NetConfig& cfg, RandomStream& rng) : cfg_(cfg) {
  mu_ = Mlp(params, "fusion.mu", {2 * cfg.channels, cfg.channels, cfg.n_p()}, rng);
  theta_ = Mlp(params, "fusion.theta", {2 * cfg.channels, cfg.channels, cfg.n_i()}, rng);
}

FusionResult DualFusion::operator()(Tape& tape, const PointFeature& fp,
                                    const PixelFeature& fi) const {
  const Tensor& fpv = fp.feat.value();
  const Tensor& fiv = fi.feat.value();
  if (fpv.dim(1) != fiv.dim(1))
    shape_error("DualFusion: channel widths disagree: " + fpv.shape_str() + " vs " +
                fiv.shape_str());
  if (fpv.dim(0) != cfg_.n_p() || fiv.dim(0) != cfg_.n_i())
    shape_error("DualFusion: row counts " + fpv.shape_str() + " / " + fiv.shape_str() +
                " disagree with the configured attention widths");

  Var gp = global_pool(tape, fp.feat);  // [1 x C]
  Var gi = global_pool(tape, fi.feat);

  FusionResult res;
  res.w_ip = enhance_and_attend(tape, fi.feat, gp, mu_, cfg_.n_p());     // [n_i x n_p]
  res.w_pi = enhance_and_attend(tape, fp.feat, gi, theta_, cfg_.n_i());  // [n_p x n_i]
  res.f_ip = matmul(res.w_ip, fp.feat);                                  // [n_i x C]
  res.f_pi = matmul(res.w_pi, fi.feat);                                  // [n_p x C]
  Var joint = concat({res.f_ip, res.f_pi}, 0);                           // [(n_i+n_p) x C]
  res.fused = global_pool(tape, joint);                                  // [1 x C]
  return res;
}

}  // namespace dmfnet
