#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmfnet/random.hpp"
#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// One learnable tensor with its gradient accumulator. The gradient buffer is
/// materialized on first access so untrained models stay compact.
class Parameter {
 public:
  Parameter(std::string name, Tensor value) : name_(std::move(name)), value_(std::move(value)) {}

  const std::string& name() const { return name_; }
  Tensor& value() { return value_; }
  const Tensor& value() const { return value_; }

  Tensor& grad() {
    ensure_grad();
    return grad_;
  }
  const Tensor& grad() const {
    ensure_grad();
    return grad_;
  }

  void zero_grad() {
    if (grad_.size() > 0)
      for (auto& g : grad_.vec()) g = 0.0;
  }

 private:
  void ensure_grad() const {
    if (grad_.size() == 0) grad_ = Tensor::zeros(value_.shape());
  }

  std::string name_;
  Tensor value_;
  mutable Tensor grad_;  // same shape as value, zeros until touched
};

/// Name-addressed collection of all learnable weights. Iteration order is
/// name-sorted, which fixes the checkpoint layout.
class ModelParams {
 public:
  ModelParams() = default;
  // Layers hold stable Parameter pointers into the map, so the collection
  // must never be copied; moves keep map nodes (and the pointers) alive.
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;

  Parameter& create(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  void zero_grads();
  size_t count() const { return entries_.size(); }
  int64_t total_values() const;

  std::map<std::string, Parameter>& entries() { return entries_; }
  const std::map<std::string, Parameter>& entries() const { return entries_; }

 private:
  std::map<std::string, Parameter> entries_;
};

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(std::vector<int64_t> shape, int64_t fan_in, RandomStream& rng);

}  // namespace dmfnet
