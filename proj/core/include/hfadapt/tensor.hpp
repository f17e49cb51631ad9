#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hfadapt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array. Every dimension is positive and
/// `numel() == product(shape)`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float value) { return Tensor({1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() & noexcept { return data_; }
  std::span<const float> values() const& noexcept { return data_; }
  // A span into a temporary would dangle.
  std::span<const float> values() && = delete;

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Value of a single-element tensor.
  float item() const;

  Tensor reshaped(Shape shape) const;
  void fill(float value);
  bool all_finite() const noexcept;

  // Shape equality plus bit-identical payload.
  bool bit_equal(const Tensor& other) const noexcept;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);
// Item `index` of the leading axis, with that axis removed.
Tensor unstack(const Tensor& batch, std::size_t index);

}  // namespace hfadapt
