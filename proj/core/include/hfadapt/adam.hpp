#pragma once

#include <cstdint>

#include "hfadapt/params.hpp"

namespace hfadapt {

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Moment estimates for every trainable entry, created lazily on the first
/// update so their shapes mirror the parameters.
struct AdamState {
  AdamState() = default;
  explicit AdamState(const AdamConfig& c) : config(c) {}

  AdamConfig config;
  std::uint64_t t = 0;
  GradientMap m;
  GradientMap v;
};

// One bias-corrected Adam step over every trainable entry of `model`.
// `grads` must hold exactly the trainable names.
void adam_update(ModelParameters& model, const GradientMap& grads, AdamState& state);

}  // namespace hfadapt
