#include "dmfnet/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dmfnet {

Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    shape_error("pairwise_sq_dist: incompatible shapes " + a.shape_str() + " and " +
                b.shape_str());
  const int64_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  Tensor out({n, m});
  for (int64_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * d;
    double* row = out.data() + i * m;
    for (int64_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * d;
      double s = 0.0;
      for (int64_t t = 0; t < d; ++t) {
        const double diff = ai[t] - bj[t];
        s += diff * diff;
      }
      row[j] = s;
    }
  }
  return out;
}

IndexArray knn(const Tensor& query, const Tensor& ref, int64_t k) {
  if (query.rank() != 2 || ref.rank() != 2 || query.dim(1) != ref.dim(1))
    shape_error("knn: incompatible shapes " + query.shape_str() + " and " + ref.shape_str());
  const int64_t n = query.dim(0), m = ref.dim(0), d = query.dim(1);
  if (k < 1 || k > m)
    shape_error("knn: k = " + std::to_string(k) + " out of range [1, " + std::to_string(m) + "]");

  IndexArray out({n, k});
  std::vector<double> dist(static_cast<size_t>(m));
  std::vector<int64_t> order(static_cast<size_t>(m));
  for (int64_t i = 0; i < n; ++i) {
    const double* qi = query.data() + i * d;
    for (int64_t j = 0; j < m; ++j) {
      const double* rj = ref.data() + j * d;
      double s = 0.0;
      for (int64_t t = 0; t < d; ++t) {
        const double diff = qi[t] - rj[t];
        s += diff * diff;
      }
      dist[static_cast<size_t>(j)] = s;
    }
    std::iota(order.begin(), order.end(), int64_t{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&dist](int64_t x, int64_t y) {
                        const double dx = dist[static_cast<size_t>(x)];
                        const double dy = dist[static_cast<size_t>(y)];
                        return dx < dy || (dx == dy && x < y);
                      });
    for (int64_t j = 0; j < k; ++j) out.at(i, j) = order[static_cast<size_t>(j)];
  }
  return out;
}

IndexArray fps(const Tensor& points, int64_t m) {
  if (points.rank() != 2) shape_error("fps: points must be [n x d], got " + points.shape_str());
  const int64_t n = points.dim(0), d = points.dim(1);
  if (m < 1 || m > n)
    shape_error("fps: m = " + std::to_string(m) + " out of range [1, " + std::to_string(n) + "]");

  IndexArray out({m});
  std::vector<double> min_d2(static_cast<size_t>(n));
  int64_t current = 0;
  out[0] = current;
  auto sq_dist_to = [&](int64_t i, int64_t j) {
    const double* pi = points.data() + i * d;
    const double* pj = points.data() + j * d;
    double s = 0.0;
    for (int64_t t = 0; t < d; ++t) {
      const double diff = pi[t] - pj[t];
      s += diff * diff;
    }
    return s;
  };
  for (int64_t i = 0; i < n; ++i) min_d2[static_cast<size_t>(i)] = sq_dist_to(i, current);

  for (int64_t step = 1; step < m; ++step) {
    int64_t best = 0;
    double best_d = min_d2[0];
    for (int64_t i = 1; i < n; ++i) {
      if (min_d2[static_cast<size_t>(i)] > best_d) {
        best_d = min_d2[static_cast<size_t>(i)];
        best = i;
      }
    }
    out[step] = best;
    for (int64_t i = 0; i < n; ++i) {
      const double d2 = sq_dist_to(i, best);
      if (d2 < min_d2[static_cast<size_t>(i)]) min_d2[static_cast<size_t>(i)] = d2;
    }
  }
  return out;
}

Tensor gather_neighbors(const Tensor& values, const IndexArray& nbr) {
  if (values.rank() != 2 || nbr.rank() != 2)
    shape_error("gather_neighbors: expects values [n x c] and nbr [n x k], got " +
                values.shape_str() + " and " + nbr.shape_str());
  const int64_t n = nbr.dim(0), k = nbr.dim(1), c = values.dim(1);
  Tensor out({n, k, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = nbr.at(i, j);
      if (src < 0 || src >= values.dim(0))
        shape_error("gather_neighbors: index " + std::to_string(src) + " out of range [0, " +
                    std::to_string(values.dim(0)) + ")");
      const double* s = values.data() + src * c;
      double* dst = out.data() + (i * k + j) * c;
      for (int64_t t = 0; t < c; ++t) dst[t] = s[t];
    }
  return out;
}

}  // namespace dmfnet
