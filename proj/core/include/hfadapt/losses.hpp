#pragma once

#include <span>

#include "hfadapt/graph.hpp"

namespace hfadapt {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr float kProbFloor = 1e-7f;

// Critic objective on probability grids:
//   -mean log p_real - mean log(1 - p_fake)
Var d_loss(Var p_real, Var p_fake);
// Non-saturating generator term: -mean log p_fake.
Var g_adv_loss(Var p_fake);
// Mean absolute error over every element.
Var l1_loss(Var target, Var output);

// Binary cross-entropy of rewards `r` ([N] or [N,...]) against labels y in
// {0,1} (broadcast per sample). `weights` optionally scales each sample; the
// result is sum(w * bce) / sum(w), i.e. the plain mean when absent.
Var reward_bce(Var r, std::span<const float> labels, std::span<const float> weights = {});

// mean_n -log(1 - r_n)
Var loss_reward(Var r);
// mean_n gate_n * mean|anchor_n - out_n|, gates in {0,1}.
Var loss_consistency(Var out, Var anchor, std::span<const float> gates);
// mean_n mean|snapshot_n - out_n|
Var loss_snapshot(Var out, Var snapshot_out);
// l_r + alpha * l_p + (1 - alpha) * l_n
Var total_loss(Var l_r, Var l_p, Var l_n, float alpha);

// Step-function gate: 1 when r < epsilon, else 0.
int gate(double r, double epsilon);

// Scalar reference forms, used for logging and checks.
double bce_value(double r, int label);
double total_value(double l_r, double l_p, double l_n, double alpha);

}  // namespace hfadapt
