#pragma once

#include "dmfnet/autodiff.hpp"
#include "dmfnet/config.hpp"
#include "dmfnet/encoders.hpp"
#include "dmfnet/nn.hpp"

namespace dmfnet {

/// Channel-wise max over rows: [n x C] -> [1 x C].
Var global_pool(Tape& tape, Var feat);

/// Replicate `other_global` to every row of `side_feat`, concatenate along
/// channels, apply the shared MLP, softmax over the last axis. The result is
/// a row-stochastic [n x m] attention matrix (m = the other side's row count).
Var enhance_and_attend(Tape& tape, Var side_feat, Var other_global, const Mlp& mlp, int64_t m);

struct FusionResult {
  Var fused;  // [1 x C]
  Var w_ip;   // [n_i x n_p], row-stochastic
  Var w_pi;   // [n_p x n_i], row-stochastic
  Var f_ip;   // [n_i x C]
  Var f_pi;   // [n_p x C]
};

/// Dual-channel fusion: symmetric cross-attention between the pixel-wise and
/// point-wise features, row-concatenated and channel-max-pooled to one
/// global vector.
class DualFusion {
 public:
  DualFusion() = default;
  DualFusion(ModelParams& params, const NetConfig& cfg, RandomStream& rng);

  FusionResult operator()(Tape& tape, const PointFeature& fp, const PixelFeature& fi) const;

 private:
  NetConfig cfg_;
  Mlp mu_;     // 2C -> C -> n_p, scores the image side against point rows
  Mlp theta_;  // 2C -> C -> n_i, scores the point side against pixel rows
};

}  // namespace dmfnet
