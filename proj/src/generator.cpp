#include "dmfnet/generator.hpp"

#include <string>

#include "dmfnet/geometry.hpp"

namespace dmfnet {

CoarseGenerator::CoarseGenerator(ModelParams& params, const NetConfig& cfg, RandomStream& rng)
    : cfg_(cfg) {
  const int64_t c = cfg.channels;
  expand_ = TransposeConv1dLayer(params, "gen.expand", c, static_cast<int>(cfg.n0), c, rng);
  block1_ = Mlp(params, "gen.block1", {2 * c, 2 * c, 2 * c}, rng);
  block2_ = Mlp(params, "gen.block2", {2 * c, 2 * c, 2 * c}, rng);
  head_ = LinearLayer(params, "gen.head", 2 * c, 3, rng);
}

Var CoarseGenerator::operator()(Tape& tape, Var fused) const {
  const Tensor& fv = fused.value();
  if (fv.rank() != 2 || fv.dim(0) != 1 || fv.dim(1) != cfg_.channels)
    shape_error("CoarseGenerator: expected a 1 x " + std::to_string(cfg_.channels) +
                " global feature, got " + fv.shape_str());
  Var x = expand_(tape, fused);                              // [n0 x C]
  Var rep = gather_rows(fused, replicate_index(cfg_.n0));    // [n0 x C]
  Var h = concat({x, rep}, 1);                               // [n0 x 2C]
  h = add(h, block1_(tape, h));                              // residual shared MLPs
  h = add(h, block2_(tape, h));
  return head_(tape, h);                                     // [n0 x 3]
}

Var seed_merge(Tape& tape, Var p0, const Tensor& partial) {
  const Tensor& pv = p0.value();
  if (pv.rank() != 2 || pv.dim(1) != 3)
    shape_error("seed_merge: coarse cloud must be [n0 x 3], got " + pv.shape_str());
  if (partial.rank() != 2 || partial.dim(1) != 3)
    shape_error("seed_merge: partial cloud must be [n x 3], got " + partial.shape_str());
  const int64_t n0 = pv.dim(0);
  if (partial.dim(0) < n0)
    shape_error("seed_merge: partial cloud has " + std::to_string(partial.dim(0)) +
                " points, need at least " + std::to_string(n0));
  IndexArray picks = fps(partial, n0);
  Tensor sampled({n0, 3});
  for (int64_t i = 0; i < n0; ++i)
    for (int64_t t = 0; t < 3; ++t) sampled.at(i, t) = partial.at(picks[i], t);
  return concat({p0, tape.input(std::move(sampled))}, 0);  // [2*n0 x 3]
}

}  // namespace dmfnet
