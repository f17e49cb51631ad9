#include "hfadapt/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hfadapt/error.hpp"
#include "hfadapt/ops.hpp"

namespace hfadapt {

namespace {

Var log_prob(Var p) { return log_clamped(p, kProbFloor, 1.0f - kProbFloor); }

Var per_sample_constant(Graph& g, std::span<const float> values, const Shape& like) {
  const std::size_t n = like[0];
  if (values.size() != n) {
    throw ContractViolation("expected " + std::to_string(n) + " per-sample values, got " +
                            std::to_string(values.size()));
  }
  Tensor t(like);
  const std::size_t per = t.numel() / n;
  for (std::size_t i = 0; i < n; ++i) std::fill_n(t.data() + i * per, per, values[i]);
  return g.constant(std::move(t));
}

}  // namespace

Var d_loss(Var p_real, Var p_fake) {
  return -(mean(log_prob(p_real)) + mean(log_prob(1.0f - p_fake)));
}

Var g_adv_loss(Var p_fake) { return -mean(log_prob(p_fake)); }

Var l1_loss(Var target, Var output) {
  if (target.shape() != output.shape()) throw ContractViolation("l1_loss shape mismatch");
  return mean(abs(output - target));
}

Var reward_bce(Var r, std::span<const float> labels, std::span<const float> weights) {
  Graph& g = r.graph();
  for (float y : labels) {
    if (y != 0.0f && y != 1.0f) throw ContractViolation("reward labels must be 0 or 1");
  }
  Var y = per_sample_constant(g, labels, r.shape());
  Var bce = -(y * log_prob(r) + (1.0f - y) * log_prob(1.0f - r));
  if (weights.empty()) return mean(bce);
  double total = 0.0;
  for (float w : weights) total += w;
  if (!(total > 0.0)) throw ContractViolation("reward_bce weights must sum to a positive value");
  Var w = per_sample_constant(g, weights, r.shape());
  const double per = static_cast<double>(r.value().numel() / r.value().dim(0));
  return sum(w * bce) * static_cast<float>(1.0 / (total * per));
}

Var loss_reward(Var r) { return -mean(log_prob(1.0f - r)); }

Var loss_consistency(Var out, Var anchor, std::span<const float> gates) {
  if (out.shape() != anchor.shape()) throw ContractViolation("loss_consistency shape mismatch");
  for (float s : gates) {
    if (s != 0.0f && s != 1.0f) throw ContractViolation("gate bits must be 0 or 1");
  }
  Var per = mean_per_sample(abs(anchor - out));
  return mean(per * per_sample_constant(out.graph(), gates, per.shape()));
}

Var loss_snapshot(Var out, Var snapshot_out) {
  if (out.shape() != snapshot_out.shape()) throw ContractViolation("loss_snapshot shape mismatch");
  return mean(mean_per_sample(abs(snapshot_out - out)));
}

Var total_loss(Var l_r, Var l_p, Var l_n, float alpha) {
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ContractViolation("alpha must be in [0,1]");
  return l_r + (l_p * alpha + l_n * (1.0f - alpha));
}

int gate(double r, double epsilon) { return r < epsilon ? 1 : 0; }

double bce_value(double r, int label) {
  const double p = std::clamp(r, static_cast<double>(kProbFloor), 1.0 - kProbFloor);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double total_value(double l_r, double l_p, double l_n, double alpha) {
  return l_r + alpha * l_p + (1.0 - alpha) * l_n;
}

}  // namespace hfadapt
