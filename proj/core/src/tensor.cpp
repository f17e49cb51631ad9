#include "hfadapt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hfadapt/error.hpp"

namespace hfadapt {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw ContractViolation("tensor shape must have rank >= 1");
  for (auto d : shape) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive: " + shape_str(shape));
  }
}
}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ContractViolation("tensor payload has " + std::to_string(data_.size()) +
                            " values for shape " + shape_str(shape_));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ContractViolation("axis out of range");
  return shape_[axis];
}

float Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ContractViolation("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ContractViolation("stack of zero tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<float> data;
  data.reserve(shape_numel(shape));
  for (const auto& t : items) {
    if (t.shape() != inner) {
      throw ContractViolation("stack: shape " + shape_str(t.shape()) + " vs " + shape_str(inner));
    }
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor unstack(const Tensor& batch, std::size_t index) {
  if (batch.rank() < 2 || index >= batch.dim(0)) {
    throw ContractViolation("unstack index out of range for " + shape_str(batch.shape()));
  }
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_numel(inner);
  const float* begin = batch.data() + index * n;
  return Tensor(std::move(inner), std::vector<float>(begin, begin + n));
}

}  // namespace hfadapt
