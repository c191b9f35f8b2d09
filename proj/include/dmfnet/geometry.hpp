#pragma once

#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// Entry (i, j) = squared Euclidean distance between a row i and b row j.
/// Brute-force O(n*m*d); adequate at desk scale.
Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b);

/// k nearest rows of `ref` for each row of `query`, ascending by squared
/// distance, ties broken toward the smaller index. When query and ref are
/// the same set, each point matches itself at distance zero.
IndexArray knn(const Tensor& query, const Tensor& ref, int64_t k);

/// Greedy farthest-point sampling seeded at index 0: repeatedly pick the
/// point maximizing its min distance to the chosen set (ties -> smaller
/// index). Returns m distinct indices in selection order; fps(P, m) is a
/// prefix of fps(P, m+1).
IndexArray fps(const Tensor& points, int64_t m);

/// out[i][j] = values[nbr.at(i, j)], shape [n x k x c].
Tensor gather_neighbors(const Tensor& values, const IndexArray& nbr);

}  // namespace dmfnet
