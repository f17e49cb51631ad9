#pragma once

#include <cstdint>

#include "hfadapt/layers.hpp"

namespace hfadapt {

struct ArchitectureConfig {
  std::size_t resolution = 64;
  std::size_t base_width = 16;
  std::size_t depth = 3;       // encoder/decoder stages
  bool use_dropout = false;    // dropout in the innermost decoder stages (training only)
  bool patch_output = true;    // critic emits a patch grid; otherwise a single logit

  // ConfigError unless resolution % 2^depth == 0, depth >= 1, width >= 4 and
  // the critic's grid is large enough.
  void validate() const;
};

// Encoder/decoder with skip connections: [N,1,S,S] -> [N,1,S,S] in [0,1].
// Stage i (1-based) has base_width * 2^(i-1) channels at S / 2^i.
ModelParameters build_generator(const ArchitectureConfig& cfg, std::uint64_t seed);

Var generator_forward(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg, Var z,
                      const ForwardOptions& opts = {});
// Eval-mode inference in chunks of `chunk` samples.
Tensor generate(const ModelParameters& params, const ArchitectureConfig& cfg, const Tensor& z,
                std::size_t chunk = 50);

// Conditional patch critic over the channel pair (condition, candidate).
SequentialArch critic_arch(const ArchitectureConfig& cfg);
ModelParameters build_critic(const ArchitectureConfig& cfg, std::uint64_t seed);
// Spatial shape [1, h, w] of the logit grid.
Shape critic_grid_shape(const ArchitectureConfig& cfg);

Var critic_logits(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg,
                  Var condition, Var candidate, const ForwardOptions& opts = {});
// [N] mean patch probability; the differentiable form of reward_scalar.
Var critic_mean_prob(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg,
                     Var condition, Var candidate, const ForwardOptions& opts = {});

// [N, 1, h, w] per-patch probabilities (eval mode).
Tensor critic_score(const ModelParameters& params, const ArchitectureConfig& cfg,
                    const Tensor& condition, const Tensor& candidate);
// [N] spatial mean of critic_score: 0 reads as Good, 1 as Bad.
Tensor reward_scalar(const ModelParameters& params, const ArchitectureConfig& cfg,
                     const Tensor& condition, const Tensor& candidate, std::size_t chunk = 50);

}  // namespace hfadapt
