#include "hfadapt/params.hpp"

#include "hfadapt/error.hpp"

namespace hfadapt {

void ModelParameters::add(std::string name, Tensor value, bool trainable) {
  if (frozen_) throw ContractViolation("cannot add '" + name + "' to a frozen model");
  if (index_.contains(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), trainable});
}

bool ModelParameters::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

const ParamEntry& ModelParameters::entry(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractViolation("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

const Tensor& ModelParameters::at(std::string_view name) const { return entry(name).value; }

Tensor& ModelParameters::mutable_at(std::string_view name) {
  if (frozen_) {
    throw ContractViolation("attempt to mutate '" + std::string(name) + "' of a frozen model");
  }
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractViolation("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].value;
}

std::size_t ModelParameters::trainable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.value.numel();
  }
  return n;
}

ModelParameters ModelParameters::thawed_copy() const {
  ModelParameters copy = *this;
  copy.frozen_ = false;
  return copy;
}

bool ModelParameters::bit_equal(const ModelParameters& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.trainable != b.trainable || !a.value.bit_equal(b.value)) return false;
  }
  return true;
}

ModelParameters snapshot(const ModelParameters& model) {
  ModelParameters copy = model;
  copy.freeze();
  return copy;
}

bool is_buffer_name(std::string_view name) noexcept {
  return name.ends_with("running_mean") || name.ends_with("running_var");
}

}  // namespace hfadapt
