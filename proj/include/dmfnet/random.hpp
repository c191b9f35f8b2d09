#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dmfnet {

/// Seeded random stream with explicitly defined value derivations, so that
/// every draw is reproducible across platforms and standard libraries.
/// std::mt19937_64 output is fully specified by the standard; the
/// distributions here are hand-rolled because the std:: distribution objects
/// are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : seed_(seed), gen_(seed) {}

  /// Independent substream: a pure function of (this stream's seed,
  /// stream_id), unaffected by how many draws the parent has made.
  RandomStream fork(uint64_t stream_id) const;

  uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased via rejection.
  int64_t uniform_int(int64_t n);

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<size_t> permutation(size_t n);

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dmfnet
