#include "dmfnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace dmfnet {

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t p = 1;
  for (int64_t d : shape) p *= d;
  return p;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void shape_error(const std::string& message) { throw std::invalid_argument(message); }

namespace {
void check_shape(const std::vector<int64_t>& shape) {
  for (int64_t d : shape) {
    if (d <= 0) shape_error("tensor shape must have positive dimensions, got " + shape_to_string(shape));
  }
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != static_cast<int64_t>(data_.size()))
    shape_error("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_to_string(shape_));
}

Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

IndexArray::IndexArray(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0);
}

IndexArray::IndexArray(std::vector<int64_t> shape, std::vector<int64_t> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != static_cast<int64_t>(data_.size()))
    shape_error("index data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_to_string(shape_));
}

std::string IndexArray::shape_str() const { return shape_to_string(shape_); }

}  // namespace dmfnet
