#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hfadapt/adapt.hpp"
#include "hfadapt/metrics.hpp"
#include "hfadapt/models.hpp"

namespace hfadapt {

struct EvalSet {
  std::string name;
  Tensor z;  // [N,1,S,S]
  Tensor x;  // [N,1,S,S]
};

struct MetricRow {
  std::string config;
  std::string dataset;
  std::size_t n = 0;  // finite-PSNR images in the means
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  std::size_t inf_count = 0;
};

inline const std::vector<std::string> kEvalHeader = {"config",   "dataset",  "n",        "psnr_mean",
                                                     "psnr_std", "ssim_mean", "ssim_std", "inf_count"};

// Per-image PSNR/SSIM of `outputs` against `reference`.
MetricRow summarize_outputs(const std::string& config, const std::string& dataset,
                            const Tensor& outputs, const Tensor& reference);
MetricRow summarize(const std::string& config, const ModelParameters& generator,
                    const ArchitectureConfig& arch, const EvalSet& data);
// The noisy input itself scored against the reference.
MetricRow noisy_baseline(const EvalSet& data);
// Row for a run that failed: n = 0 and NaN statistics.
MetricRow failed_row(const std::string& config, const std::string& dataset);

/// Per-image PSNR change after - before. Negative deltas are summarized by
/// their magnitude; a group without members reports NaN.
struct DeltaStats {
  std::string dataset;
  std::size_t n = 0;  // images with a finite delta
  double frac_improved = 0.0;  // strictly positive deltas / n
  double pos_mean = 0.0;
  double pos_std = 0.0;
  double neg_mean = 0.0;
  double neg_std = 0.0;
  double max = 0.0;
  double min = 0.0;
};

inline const std::vector<std::string> kDeltaHeader = {"dataset",  "frac_improved", "pos_mean",
                                                      "pos_std",  "neg_mean",      "neg_std",
                                                      "max",      "min"};

DeltaStats delta_stats(const std::string& dataset, const std::vector<double>& before,
                       const std::vector<double>& after);
DeltaStats compare(const ModelParameters& before, const ModelParameters& after,
                   const ArchitectureConfig& arch, const EvalSet& data);

void write_eval_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_eval_csv(const std::filesystem::path& path);
void write_delta_csv(const std::filesystem::path& path, const std::vector<DeltaStats>& rows);
std::vector<DeltaStats> read_delta_csv(const std::filesystem::path& path);

inline const std::vector<std::string> kAblationConfigs = {"full",    "wo_Lp",       "wo_Ln",
                                                          "only_Lr", "source_only", "noisy_baseline"};

struct AblationInputs {
  const ModelParameters* source = nullptr;
  const ModelParameters* reward_model = nullptr;
  ArchitectureConfig arch;
  AdaptConfig adapt;
  Tensor adapt_inputs;  // unlabeled target inputs for fine-tuning
  std::vector<EvalSet> datasets;
};

// One row per (config, dataset), configs in the order given. Adaptation
// failures become failed rows rather than aborting the table. `on_run`
// receives each finished adapted generator (may be empty).
std::vector<MetricRow> ablation(
    const std::vector<std::string>& configs, const AblationInputs& in,
    const std::function<void(const std::string&, const AdaptResult&)>& on_run = {});

}  // namespace hfadapt
