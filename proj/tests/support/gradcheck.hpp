#pragma once

// Central finite-difference checking of tape gradients. The graph is rebuilt
// from scratch for every probe, so the check covers the whole record/replay
// path, not just the backward closures.

#include <functional>
#include <string>

#include "dmfnet/autodiff.hpp"
#include "dmfnet/params.hpp"

namespace gradcheck {

struct Result {
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the worst coordinate, for diagnostics
  int64_t checked = 0;
};

using BuildLoss = std::function<dmfnet::Var(dmfnet::Tape&)>;

/// Compares d(loss)/d(theta) against (f(theta+h) - f(theta-h)) / 2h for every
/// coordinate of every parameter, or for a seeded random subset of
/// `max_coords` coordinates when positive. The relative error denominator is
/// max(1, |analytic|, |numeric|), so coordinates with O(1) gradients are held
/// to a true relative tolerance while legitimately zero gradients pass.
Result check(dmfnet::ModelParams& params, const BuildLoss& build, double h = 1e-5,
             int64_t max_coords = -1, uint64_t seed = 0);

}  // namespace gradcheck
