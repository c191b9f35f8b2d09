#pragma once

#include <vector>

#include "dmfnet/autodiff.hpp"
#include "dmfnet/config.hpp"
#include "dmfnet/nn.hpp"

namespace dmfnet {

/// Neighborhood context block parameters: point-wise embedding plus the two
/// independent context MLPs whose outputs split the local width between them.
struct NcbParams {
  Mlp embed;  // 3 -> c_ncb, point-wise
  Mlp alpha;  // 6 -> c_local/2, geometric context
  Mlp beta;   // 2*c_ncb -> c_local/2, feature context
};

/// F_L = max over the k-neighborhood of [alpha([p_i, p_i - p_ik]),
/// beta([f_i, f_i - f_ik])]; coordinate KNN for the geometric context,
/// feature KNN (over the embedding) for the feature context. k is clamped
/// to the point count.
Var ncb(Tape& tape, Var p_in, const NcbParams& params, int64_t k);

/// One attention block: Z = LayerNorm(Q + MultiHead(Q, K, V)) with the
/// residual on the projected query, output Z + FFN(Z).
struct SatParams {
  AttentionLayer attention;
  LayerNormLayer norm;
  Mlp ffn;  // d -> d -> d with relu between
};

Var sat_block(Tape& tape, Var x, const SatParams& params);

/// One shape-aware upsampling stage: NCB embedding, fused-global concat and
/// projection, `sat_blocks` attention blocks, point splitting, and a
/// displacement head added onto the parent-replicated coordinates.
class SutStage {
 public:
  SutStage() = default;
  SutStage(ModelParams& params, const std::string& name, const NetConfig& cfg, RandomStream& rng);

  /// p_in [n x 3], fused [1 x C] -> [r*n x 3]; output row r*i+j is
  /// p_in[i] + displacement.
  Var operator()(Tape& tape, Var p_in, Var fused) const;

 private:
  NetConfig cfg_;
  NcbParams ncb_;
  Mlp pre_sat_;                   // (c_local + C) -> c_enh
  std::vector<SatParams> sats_;
  TransposeConv1dLayer split_;    // c_enh -> ratio x c_local
  Mlp disp_;                      // 2*c_local -> c_local -> 3
};

/// Two cascaded stages with independent parameters: seed -> P_1 -> P_C.
class Upsampler {
 public:
  Upsampler() = default;
  Upsampler(ModelParams& params, const NetConfig& cfg, RandomStream& rng);

  struct Result {
    Var p1;
    Var pc;
  };
  Result operator()(Tape& tape, Var seed, Var fused) const;

 private:
  SutStage stage1_, stage2_;
};

}  // namespace dmfnet
