#include "hfadapt/adam.hpp"

#include <cmath>

#include "hfadapt/error.hpp"

namespace hfadapt {

void adam_update(ModelParameters& model, const GradientMap& grads, AdamState& state) {
  if (model.frozen()) throw ContractViolation("adam_update on a frozen model");
  std::size_t trainable = 0;
  for (const auto& e : model.entries()) {
    if (!e.trainable) continue;
    ++trainable;
    auto it = grads.find(e.name);
    if (it == grads.end()) throw ContractViolation("missing gradient for '" + e.name + "'");
    if (it->second.shape() != e.value.shape()) {
      throw ContractViolation("gradient for '" + e.name + "' has shape " +
                              shape_str(it->second.shape()));
    }
  }
  if (grads.size() != trainable) {
    throw ContractViolation("gradient map names entries that are not trainable parameters");
  }

  const AdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(static_cast<double>(c.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(c.beta2), t);

  for (const auto& e : model.entries()) {
    if (!e.trainable) continue;
    const Tensor& g = grads.at(e.name);
    auto [mit, m_new] = state.m.try_emplace(e.name, e.value.shape(), 0.0f);
    auto [vit, v_new] = state.v.try_emplace(e.name, e.value.shape(), 0.0f);
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    Tensor& w = model.mutable_at(e.name);
    for (std::size_t i = 0; i < w.numel(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0f - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0f - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] = static_cast<float>(w[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace hfadapt
