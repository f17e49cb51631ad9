#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hfadapt/config.hpp"
#include "hfadapt/eval.hpp"

namespace hfadapt {

// Dataset names used in reports.
inline constexpr const char* kSourceValName = "mnist0_val";
inline constexpr const char* kTargetLabeledName = "fashion_test";
inline constexpr const char* kTargetEvalName = "fashion_train";

struct SourcePairs {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
};

// Class-filtered source training file, split into disjoint train/val.
SourcePairs load_source_pairs(const RunConfig& cfg);
// Target test file subset that gets labeled and adapted on.
std::vector<PairedSample> load_target_labeled(const RunConfig& cfg);
// Disjoint target subset drawn from the target training file.
std::vector<PairedSample> load_target_eval(const RunConfig& cfg);

EvalSet make_eval_set(const std::string& name, const std::vector<PairedSample>& pairs);

/// File names inside a run directory.
namespace artifact {
inline constexpr const char* kGenerator = "gs.ckpt";
inline constexpr const char* kCritic = "critic.ckpt";
inline constexpr const char* kPretrainLog = "pretrain_log.csv";
inline constexpr const char* kCandidates = "candidates.ckpt";
inline constexpr const char* kCandidatesMeta = "candidates.json";
inline constexpr const char* kFeedback = "feedback.jsonl";
inline constexpr const char* kReward = "reward.ckpt";
inline constexpr const char* kRewardReport = "reward_report.csv";
inline constexpr const char* kAdapted = "gt.ckpt";
inline constexpr const char* kAdaptLog = "adapt_log.csv";
inline constexpr const char* kEval = "eval.csv";
inline constexpr const char* kDelta = "delta.csv";
inline constexpr const char* kAblation = "ablation.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kConfig = "config.json";
}  // namespace artifact

// Stage entry points. Each one reads its prerequisites from `out`, writes its
// artifacts there and refreshes the manifest. A missing input raises
// MissingPrerequisite naming the subcommand that produces it.
void run_pretrain_stage(const RunConfig& cfg, const std::filesystem::path& out);
void run_infer_stage(const RunConfig& cfg, const std::filesystem::path& out);
LabelCounts run_feedback_auto_stage(const RunConfig& cfg, const std::filesystem::path& out);
void run_feedback_serve_stage(const RunConfig& cfg, const std::filesystem::path& out,
                              const std::string& host, int port);
std::vector<RewardReport> run_train_reward_stage(const RunConfig& cfg,
                                                 const std::filesystem::path& out);
void run_adapt_stage(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<MetricRow> run_eval_stage(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<MetricRow> run_ablate_stage(const RunConfig& cfg, const std::filesystem::path& out);
// pretrain -> infer -> feedback-auto -> train-reward -> adapt -> eval
std::vector<MetricRow> run_pipeline(const RunConfig& cfg, const std::filesystem::path& out);

// Records the config hash, seed, library versions and the SHA-256 of every
// artifact present in `out` into manifest.json.
void write_manifest(const RunConfig& cfg, const std::filesystem::path& out,
                    const std::string& stage);

std::string config_sha256(const RunConfig& cfg);
std::string version_string();

}  // namespace hfadapt
