#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmfnet {

/// Dense row-major array of 64-bit floats. All network values flow through
/// this type; shapes are immutable after construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor scalar(double value);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t flat) { return data_[static_cast<size_t>(flat)]; }
  double operator[](int64_t flat) const { return data_[static_cast<size_t>(flat)]; }

  double& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double& at(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double& at(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double at(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool bit_equal(const Tensor& other) const;

  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

/// Integer companion to Tensor, used for neighbor lists, argmax positions and
/// sampling orders.
class IndexArray {
 public:
  IndexArray() = default;
  explicit IndexArray(std::vector<int64_t> shape);
  IndexArray(std::vector<int64_t> shape, std::vector<int64_t> data);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  int64_t* data() { return data_.data(); }
  const int64_t* data() const { return data_.data(); }
  std::vector<int64_t>& vec() { return data_; }
  const std::vector<int64_t>& vec() const { return data_; }

  int64_t& operator[](int64_t flat) { return data_[static_cast<size_t>(flat)]; }
  int64_t operator[](int64_t flat) const { return data_[static_cast<size_t>(flat)]; }
  int64_t& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  int64_t at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  int64_t& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  int64_t at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<int64_t> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

[[noreturn]] void shape_error(const std::string& message);

}  // namespace dmfnet
