#pragma once

#include "dmfnet/autodiff.hpp"
#include "dmfnet/config.hpp"
#include "dmfnet/nn.hpp"

namespace dmfnet {

/// Coarse decoder: transpose-convolution expansion of the fused global
/// vector, global-feature concatenation, two residual shared MLPs, and a
/// final projection to coordinates.
class CoarseGenerator {
 public:
  CoarseGenerator() = default;
  CoarseGenerator(ModelParams& params, const NetConfig& cfg, RandomStream& rng);

  /// fused [1 x C] -> coarse cloud [n0 x 3].
  Var operator()(Tape& tape, Var fused) const;

 private:
  NetConfig cfg_;
  TransposeConv1dLayer expand_;  // 1 x C -> n0 x C
  Mlp block1_, block2_;          // residual shared MLPs at width 2C
  LinearLayer head_;             // 2C -> 3
};

/// [P_0 rows; FPS(partial, n0) rows]: the coarse cloud concatenated with an
/// FPS resample of the partial input, producing the 2*n0-point seed cloud.
/// The partial rows enter as constants; gradients flow only through p0.
Var seed_merge(Tape& tape, Var p0, const Tensor& partial);

}  // namespace dmfnet
