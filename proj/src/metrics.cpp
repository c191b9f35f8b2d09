#include "dmfnet/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "dmfnet/geometry.hpp"

namespace dmfnet {

namespace {

void check_cloud(const char* op, const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3 || t.dim(0) < 1)
    shape_error(std::string(op) + ": expects a nonempty [n x 3] cloud, got " + t.shape_str());
}

// nn[i] = argmin_j ||a_i - b_j||^2 (ties -> smaller j); d2[i] = that minimum.
void nearest_pairs(const Tensor& a, const Tensor& b, std::vector<int64_t>& nn,
                   std::vector<double>& d2) {
  const int64_t n = a.dim(0), m = b.dim(0);
  nn.assign(static_cast<size_t>(n), 0);
  d2.assign(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * 3;
    int64_t best = 0;
    double best_d = 0.0;
    for (int64_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * 3;
      const double dx = ai[0] - bj[0], dy = ai[1] - bj[1], dz = ai[2] - bj[2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (j == 0 || d < best_d) {
        best_d = d;
        best = j;
      }
    }
    nn[static_cast<size_t>(i)] = best;
    d2[static_cast<size_t>(i)] = best_d;
  }
}

double chamfer(const Tensor& y, const Tensor& ygt, bool squared) {
  std::vector<int64_t> nn;
  std::vector<double> d2;
  nearest_pairs(y, ygt, nn, d2);
  double fwd = 0.0;
  for (double d : d2) fwd += squared ? d : std::sqrt(d);
  fwd /= 2.0 * static_cast<double>(y.dim(0));
  nearest_pairs(ygt, y, nn, d2);
  double bwd = 0.0;
  for (double d : d2) bwd += squared ? d : std::sqrt(d);
  bwd /= 2.0 * static_cast<double>(ygt.dim(0));
  return fwd + bwd;
}

Var chamfer_loss(const char* op, Var pred, Tensor target, bool squared) {
  check_cloud(op, pred.value());
  check_cloud(op, target);
  const Tensor& yv = pred.value();

  // Pairing fixed at record time; forward replay recomputes it identically
  // because the pairing is a deterministic function of the input.
  auto fwd = [target, squared](const std::vector<const Tensor*>& in) {
    return Tensor::scalar(chamfer(*in[0], target, squared));
  };
  Tensor out = fwd({&yv});

  std::vector<int64_t> nn_fwd, nn_bwd;
  std::vector<double> d2;
  nearest_pairs(yv, target, nn_fwd, d2);
  nearest_pairs(target, yv, nn_bwd, d2);

  Tape* t = pred.tape;
  return t->record(
      op, {pred}, std::move(out), fwd,
      [target, squared, nn_fwd, nn_bwd](const std::vector<const Tensor*>& in, const Tensor&,
                                        const Tensor& g, const std::vector<Tensor*>& gin) {
        const Tensor& y = *in[0];
        const int64_t n = y.dim(0), m = target.dim(0);
        double* dy = gin[0]->data();
        const double go = g[0];
        // forward half: (1/2n) sum_i dist(y_i, target[nn_fwd[i]])
        const double wf = go / (2.0 * static_cast<double>(n));
        for (int64_t i = 0; i < n; ++i) {
          const double* yi = y.data() + i * 3;
          const double* gt = target.data() + nn_fwd[static_cast<size_t>(i)] * 3;
          const double dx = yi[0] - gt[0], dyv = yi[1] - gt[1], dz = yi[2] - gt[2];
          if (squared) {
            dy[i * 3 + 0] += wf * 2.0 * dx;
            dy[i * 3 + 1] += wf * 2.0 * dyv;
            dy[i * 3 + 2] += wf * 2.0 * dz;
          } else {
            const double norm = std::sqrt(dx * dx + dyv * dyv + dz * dz);
            if (norm > 0.0) {
              dy[i * 3 + 0] += wf * dx / norm;
              dy[i * 3 + 1] += wf * dyv / norm;
              dy[i * 3 + 2] += wf * dz / norm;
            }
          }
        }
        // backward half: (1/2m) sum_j dist(target_j, y[nn_bwd[j]])
        const double wb = go / (2.0 * static_cast<double>(m));
        for (int64_t j = 0; j < m; ++j) {
          const int64_t i = nn_bwd[static_cast<size_t>(j)];
          const double* yi = y.data() + i * 3;
          const double* gt = target.data() + j * 3;
          const double dx = yi[0] - gt[0], dyv = yi[1] - gt[1], dz = yi[2] - gt[2];
          if (squared) {
            dy[i * 3 + 0] += wb * 2.0 * dx;
            dy[i * 3 + 1] += wb * 2.0 * dyv;
            dy[i * 3 + 2] += wb * 2.0 * dz;
          } else {
            const double norm = std::sqrt(dx * dx + dyv * dyv + dz * dz);
            if (norm > 0.0) {
              dy[i * 3 + 0] += wb * dx / norm;
              dy[i * 3 + 1] += wb * dyv / norm;
              dy[i * 3 + 2] += wb * dz / norm;
            }
          }
        }
      });
}

}  // namespace

double cd_l1(const Tensor& y, const Tensor& ygt) {
  check_cloud("cd_l1", y);
  check_cloud("cd_l1", ygt);
  return chamfer(y, ygt, /*squared=*/false);
}

double cd_l2(const Tensor& y, const Tensor& ygt) {
  check_cloud("cd_l2", y);
  check_cloud("cd_l2", ygt);
  return chamfer(y, ygt, /*squared=*/true);
}

double f_score(const Tensor& y, const Tensor& ygt, double tau) {
  check_cloud("f_score", y);
  check_cloud("f_score", ygt);
  if (tau <= 0.0) shape_error("f_score: tau must be positive");
  const double tau2 = tau * tau;
  std::vector<int64_t> nn;
  std::vector<double> d2;
  nearest_pairs(y, ygt, nn, d2);
  int64_t hit = 0;
  for (double d : d2)
    if (d <= tau2) ++hit;
  const double precision = static_cast<double>(hit) / static_cast<double>(y.dim(0));
  nearest_pairs(ygt, y, nn, d2);
  hit = 0;
  for (double d : d2)
    if (d <= tau2) ++hit;
  const double recall = static_cast<double>(hit) / static_cast<double>(ygt.dim(0));
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Var cd_l1_loss(Var pred, Tensor target) {
  return chamfer_loss("cd_l1", pred, std::move(target), /*squared=*/false);
}

Var cd_l2_loss(Var pred, Tensor target) {
  return chamfer_loss("cd_l2", pred, std::move(target), /*squared=*/true);
}

GroundTruthPyramid build_pyramid(const Tensor& ygt, int64_t n0_concat, int64_t n1) {
  check_cloud("build_pyramid", ygt);
  const int64_t n = ygt.dim(0);
  if (!(1 <= n0_concat && n0_concat <= n1 && n1 <= n))
    shape_error("build_pyramid: need 1 <= n0 (" + std::to_string(n0_concat) + ") <= n1 (" +
                std::to_string(n1) + ") <= n (" + std::to_string(n) + ")");
  IndexArray order = fps(ygt, n1);
  GroundTruthPyramid pyr;
  pyr.y0 = Tensor({n0_concat, 3});
  pyr.y1 = Tensor({n1, 3});
  for (int64_t i = 0; i < n1; ++i) {
    const double* src = ygt.data() + order[i] * 3;
    double* dst = pyr.y1.data() + i * 3;
    dst[0] = src[0];
    dst[1] = src[1];
    dst[2] = src[2];
    if (i < n0_concat) {
      double* d0 = pyr.y0.data() + i * 3;
      d0[0] = src[0];
      d0[1] = src[1];
      d0[2] = src[2];
    }
  }
  pyr.ygt = ygt;
  return pyr;
}

LossReport LossTerms::report() const {
  LossReport r;
  r.cd_coarse = coarse.value()[0];
  r.cd_intermediate = intermediate.value()[0];
  r.cd_final = final_stage.value()[0];
  r.total = total.value()[0];
  return r;
}

LossTerms total_loss(Var p0_concat, Var p1, Var pc, const GroundTruthPyramid& pyr) {
  if (p0_concat.value().dim(0) != pyr.y0.dim(0))
    shape_error("total_loss: coarse stage has " + std::to_string(p0_concat.value().dim(0)) +
                " points but its target has " + std::to_string(pyr.y0.dim(0)));
  if (p1.value().dim(0) != pyr.y1.dim(0))
    shape_error("total_loss: intermediate stage has " + std::to_string(p1.value().dim(0)) +
                " points but its target has " + std::to_string(pyr.y1.dim(0)));
  LossTerms terms;
  terms.coarse = cd_l1_loss(p0_concat, pyr.y0);
  terms.intermediate = cd_l1_loss(p1, pyr.y1);
  terms.final_stage = cd_l1_loss(pc, pyr.ygt);
  terms.total = add(add(terms.coarse, terms.intermediate), terms.final_stage);
  return terms;
}

}  // namespace dmfnet
