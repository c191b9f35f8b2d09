#pragma once

#include "dmfnet/autodiff.hpp"
#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// L1 Chamfer distance: (1/2n) sum_i min_j ||y_i - g_j|| + (1/2m) sum_j min_i ||g_j - y_i||
/// (plain Euclidean norms). Zero iff the two coordinate sets coincide.
double cd_l1(const Tensor& y, const Tensor& ygt);

/// Squared-norm variant of the same two-sided mean. Table-style reporting
/// multiplies this by 1e3.
double cd_l2(const Tensor& y, const Tensor& ygt);

/// precision = fraction of y within tau of ygt; recall = the converse;
/// F = 2PR/(P+R), defined as 0 when both are 0. tau defaults to 0.01
/// (1% of the unit-sphere radius).
double f_score(const Tensor& y, const Tensor& ygt, double tau = 0.01);

/// Differentiable Chamfer losses against a fixed target. The min is
/// differentiated through the argmin pairing captured at record time
/// (subgradient at ties; zero at coincident points for the L1 form).
Var cd_l1_loss(Var pred, Tensor target);
Var cd_l2_loss(Var pred, Tensor target);

/// FPS-selected ground-truth resolutions: y0 (n0_concat rows) and y1 (n1
/// rows) are nested prefixes of one FPS sequence over ygt, so y0 is a
/// subset of y1 is a subset of ygt.
struct GroundTruthPyramid {
  Tensor y0;
  Tensor y1;
  Tensor ygt;
};

GroundTruthPyramid build_pyramid(const Tensor& ygt, int64_t n0_concat, int64_t n1);

/// The three stage losses as plain numbers; total is their unit-weight sum.
struct LossReport {
  double cd_coarse = 0.0;
  double cd_intermediate = 0.0;
  double cd_final = 0.0;
  double total = 0.0;
};

/// Tape-recorded stage losses. `total` is the Var to run backward on.
struct LossTerms {
  Var coarse;
  Var intermediate;
  Var final_stage;
  Var total;

  LossReport report() const;
};

/// L1-CD at each pyramid stage, summed with unit weights:
/// p0_concat vs y0, p1 vs y1, pc vs ygt.
LossTerms total_loss(Var p0_concat, Var p1, Var pc, const GroundTruthPyramid& pyr);

}  // namespace dmfnet
