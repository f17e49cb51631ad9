#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hfadapt/adam.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/models.hpp"

namespace hfadapt {

struct AdaptConfig {
  double alpha = 0.9;                 // weight of the consistency term; (1 - alpha) on the snapshot term
  double epsilon = 0.2;               // gate threshold on the frozen reward
  std::size_t snapshot_interval = 2;  // optimizer steps between snapshot refreshes
  std::size_t epochs = 10;
  std::size_t batch = 10;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool reward_only = false;  // drop both anchor terms (they are logged as 0)

  void validate() const;
};

// Named loss-term variants compared in the ablation.
enum class AdaptVariant { Full, WithoutConsistency, WithoutSnapshot, RewardOnly };
const char* variant_name(AdaptVariant v);  // full, wo_Lp, wo_Ln, only_Lr
AdaptConfig with_variant(AdaptConfig cfg, AdaptVariant v);

/// Per-sample gate bits and anchor outputs, computed once from the frozen
/// source generator and frozen reward model.
struct GateCache {
  Tensor anchor;               // [N,1,S,S] frozen source outputs
  std::vector<double> reward;  // frozen reward of each anchor output
  std::vector<float> gate;     // 1 where reward < epsilon

  static GateCache build(const ModelParameters& source, const ModelParameters& reward_model,
                         const ArchitectureConfig& arch, const Tensor& z, double epsilon);
  std::size_t gated_on() const;
};

struct AdaptLogRow {
  std::size_t step = 0;
  double l_r = 0.0;
  double l_p = 0.0;
  double l_n = 0.0;
  double total = 0.0;
  bool snapshot_refreshed = false;
};

inline const std::vector<std::string> kAdaptLogHeader = {"step", "l_r",   "l_p",
                                                         "l_n",  "total", "snapshot_refreshed"};

// Called at each step after any snapshot refresh and before the update.
struct AdaptStepView {
  std::size_t step;
  bool refreshed;
  const ModelParameters& generator;
  const ModelParameters& snapshot;
};
using AdaptObserver = std::function<void(const AdaptStepView&)>;

struct AdaptResult {
  ModelParameters generator;
  std::vector<AdaptLogRow> log;
  GateCache gates;
};

// Non-finite loss or parameters: carries the parameters from before the
// failing step.
class AdaptDivergedError : public DivergenceError {
 public:
  AdaptDivergedError(const std::string& what, ModelParameters last_good, std::size_t step)
      : DivergenceError(what), last_good_(std::move(last_good)), step_(step) {}
  const ModelParameters& last_good() const noexcept { return last_good_; }
  std::size_t step() const noexcept { return step_; }

 private:
  ModelParameters last_good_;
  std::size_t step_;
};

// Fine-tunes a copy of `source` on unlabeled target inputs `z` ([N,1,S,S]).
// Normalization layers run on their stored statistics throughout.
AdaptResult run_adapt(const ModelParameters& source, const ModelParameters& reward_model,
                      const ArchitectureConfig& arch, const Tensor& z, const AdaptConfig& cfg,
                      const AdaptObserver& observer = {},
                      const std::optional<std::filesystem::path>& log_path = std::nullopt);

}  // namespace hfadapt
