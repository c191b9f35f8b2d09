#include "dmfnet/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dmfnet {

Parameter& ModelParams::create(const std::string& name, Tensor init) {
  auto [it, inserted] = entries_.try_emplace(name, Parameter(name, std::move(init)));
  if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
  return it->second;
}

Parameter& ModelParams::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const Parameter& ModelParams::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

void ModelParams::zero_grads() {
  for (auto& [name, p] : entries_) p.zero_grad();
}

int64_t ModelParams::total_values() const {
  int64_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value().size();
  return n;
}

Tensor uniform_fan_in(std::vector<int64_t> shape, int64_t fan_in, RandomStream& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : t.vec()) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace dmfnet
