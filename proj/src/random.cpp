#include "dmfnet/random.hpp"

#include <cmath>

namespace dmfnet {

namespace {
// splitmix64 finalizer, used to mix (seed, stream_id) into a fresh seed.
uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

RandomStream RandomStream::fork(uint64_t stream_id) const {
  return RandomStream(mix64(seed_ ^ mix64(stream_id + 1)));
}

int64_t RandomStream::uniform_int(int64_t n) {
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::vector<size_t> RandomStream::permutation(size_t n) {
  std::vector<size_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace dmfnet
