#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hfadapt/tensor.hpp"

namespace hfadapt {

struct ParamEntry {
  std::string name;
  Tensor value;
  // Non-trainable entries are state buffers (normalization running stats).
  bool trainable = true;
};

// Parameter-name -> gradient, ordered by name.
using GradientMap = std::map<std::string, Tensor>;

/// Named tensor collection backing one network. Names are unique and
/// iteration follows insertion order. A frozen collection rejects every
/// mutable access.
class ModelParameters {
 public:
  void add(std::string name, Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  const ParamEntry& entry(std::string_view name) const;
  // Throws ContractViolation when frozen.
  Tensor& mutable_at(std::string_view name);

  std::span<const ParamEntry> entries() const& noexcept { return entries_; }
  std::span<const ParamEntry> entries() && = delete;  // would dangle
  std::size_t size() const noexcept { return entries_.size(); }
  // Number of scalar values across trainable entries.
  std::size_t trainable_count() const noexcept;

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  // Deep copy with the frozen flag cleared.
  ModelParameters thawed_copy() const;

  bool bit_equal(const ModelParameters& other) const noexcept;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool frozen_ = false;
};

// Deep copy with the frozen flag set.
ModelParameters snapshot(const ModelParameters& model);

// Buffer naming convention: entries ending in "running_mean" / "running_var".
bool is_buffer_name(std::string_view name) noexcept;

}  // namespace hfadapt
