#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "hfadapt/adam.hpp"
#include "hfadapt/feedback.hpp"
#include "hfadapt/models.hpp"

namespace hfadapt {

struct RewardTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 10;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double holdout = 0.2;          // fraction of labeled samples kept out of training
  bool per_patch = false;        // BCE on every patch instead of the patch mean
  bool balance_classes = false;  // inverse-frequency sample weights

  void validate() const;
};

struct RewardReport {
  std::string split;
  std::size_t n = 0;
  double accuracy = 0.0;
  double mean_reward_good = 0.0;
  double mean_reward_bad = 0.0;
};

inline const std::vector<std::string> kRewardReportHeader = {
    "split", "n", "accuracy", "mean_reward_good", "mean_reward_bad"};

struct RewardTrainResult {
  ModelParameters model;
  // Candidate indices with their y_r, as split for training and reporting.
  std::vector<std::pair<std::size_t, int>> train;
  std::vector<std::pair<std::size_t, int>> holdout;
  std::vector<RewardReport> reports;  // "train" then "holdout"
};

// Trains the critic-shaped reward model on (z, frozen output) pairs against
// y_r. Throws ValidationError when the training split holds one class only.
RewardTrainResult train_reward(const CandidateSet& candidates,
                               const std::vector<std::pair<std::size_t, int>>& labeled,
                               const ArchitectureConfig& arch, const RewardTrainConfig& cfg);

// Accuracy of (reward >= 0.5) against y_r == 1 plus class-conditional means.
// Throws ValidationError if either class is absent.
RewardReport score_rewards(const std::vector<double>& rewards, const std::vector<int>& labels,
                           std::string split);
RewardReport evaluate_reward(const ModelParameters& reward_model, const ArchitectureConfig& arch,
                             const CandidateSet& candidates,
                             const std::vector<std::pair<std::size_t, int>>& labeled,
                             std::string split);

void write_reward_report(const std::filesystem::path& path, const std::vector<RewardReport>& rows);
std::vector<RewardReport> read_reward_report(const std::filesystem::path& path);

// Rows `indices` of an [N, ...] batch.
Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& indices);

}  // namespace hfadapt
