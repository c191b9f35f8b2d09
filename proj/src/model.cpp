#include "dmfnet/model.hpp"

namespace dmfnet {

CompletionModel::CompletionModel(const NetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  RandomStream rng(init_seed);
  // Construction order is fixed so a given seed always yields the same draws.
  enc3d_ = Encoder3D(params_, cfg_, rng);
  enc2d_ = ImageEncoder(params_, cfg_, rng);
  fusion_ = DualFusion(params_, cfg_, rng);
  gen_ = CoarseGenerator(params_, cfg_, rng);
  up_ = Upsampler(params_, cfg_, rng);
}

ForwardTrace CompletionModel::forward(Tape& tape, const Tensor& partial,
                                      const Tensor& image) const {
  ForwardTrace tr;
  tr.fp = enc3d_(tape, partial);
  tr.fi = enc2d_(tape, image);
  tr.fusion = fusion_(tape, tr.fp, tr.fi);
  tr.p0 = gen_(tape, tr.fusion.fused);
  tr.seed = seed_merge(tape, tr.p0, partial);
  Upsampler::Result up = up_(tape, tr.seed, tr.fusion.fused);
  tr.p1 = up.p1;
  tr.pc = up.pc;
  return tr;
}

CompletionModel::Stages CompletionModel::complete(const Tensor& partial,
                                                  const Tensor& image) const {
  Tape tape(/*grad_enabled=*/false);
  ForwardTrace tr = forward(tape, partial, image);
  Stages out;
  out.p0 = tr.p0.value();
  out.seed = tr.seed.value();
  out.p1 = tr.p1.value();
  out.pc = tr.pc.value();
  return out;
}

}  // namespace dmfnet
