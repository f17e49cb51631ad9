#include "hfadapt/experiment.hpp"

#include <Eigen/Core>
#include <csignal>
#include <iostream>
#include <json.hpp>
#include <openssl/crypto.h>
#include <png.h>
#include <pthread.h>
#include <thread>

#include "hfadapt/checkpoint.hpp"
#include "hfadapt/csv.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/feedback_service.hpp"
#include "hfadapt/hash.hpp"
#include "hfadapt/rng.hpp"

#ifndef HFADAPT_VERSION
#define HFADAPT_VERSION "0.0.0"
#endif

namespace hfadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Keys separating the seeded streams of each dataset.
enum : std::uint64_t { kSourceSplit = 10, kTargetLabeledSplit = 11, kTargetEvalSplit = 12 };

RawDataset load_split_file(const std::string& dir, const char* prefix, const char* key) {
  const fs::path images = fs::path(dir) / (std::string(prefix) + "-images-idx3-ubyte");
  const fs::path labels = fs::path(dir) / (std::string(prefix) + "-labels-idx1-ubyte");
  if (!fs::exists(images) || !fs::exists(labels)) {
    throw ConfigError(std::string(key) + ": IDX files " + images.string() + " / " +
                      labels.string() + " not found");
  }
  return load_idx(images, labels, fs::path(dir).filename().string() + "/" + prefix);
}

NoiseSpec noise_for(const RunConfig& cfg, std::uint64_t key) {
  NoiseSpec n = cfg.noise;
  n.seed = mix_seed(cfg.noise.seed, key);
  return n;
}

std::vector<PairedSample> target_subset(const RunConfig& raw, const char* prefix, std::size_t n,
                                        std::uint64_t key) {
  const RunConfig cfg = with_derived_seeds(raw);
  RawDataset ds = load_split_file(cfg.paths.fashion_dir, prefix, "paths.fashion_dir");
  const auto s = split(ds, n, 0, mix_seed(cfg.seed, key));
  return make_pairs(ds, noise_for(cfg, key), static_cast<std::size_t>(cfg.arch.resolution),
                    Domain::Target, s.train);
}

fs::path require(const fs::path& out, const char* name, const char* producer) {
  const fs::path p = out / name;
  if (!fs::exists(p)) {
    throw MissingPrerequisite(p.string() + " does not exist; run `hfadapt " + producer +
                                  "` with the same --out first",
                              producer);
  }
  return p;
}

ModelParameters load_generator(const RunConfig& cfg, const fs::path& out, const char* name,
                               const char* producer) {
  return load_checkpoint(require(out, name, producer), build_generator(cfg.arch, 0));
}

ModelParameters load_reward_model(const RunConfig& cfg, const fs::path& out) {
  return load_checkpoint(require(out, artifact::kReward, "train-reward"),
                         build_critic(cfg.arch, 0));
}

CandidateSet load_stage_candidates(const fs::path& out) {
  require(out, artifact::kCandidatesMeta, "infer");
  return load_candidates(out);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

void prepare(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ConfigError("output directory " + out.string() + " is not writable");
  write_text(out / artifact::kConfig, to_json(cfg));
}

std::vector<EvalSet> evaluation_sets(const RunConfig& cfg) {
  const auto source = load_source_pairs(cfg);
  return {make_eval_set(kSourceValName, source.val),
          make_eval_set(kTargetLabeledName, load_target_labeled(cfg)),
          make_eval_set(kTargetEvalName, load_target_eval(cfg))};
}

}  // namespace

SourcePairs load_source_pairs(const RunConfig& raw) {
  const RunConfig cfg = with_derived_seeds(raw);
  RawDataset all = load_split_file(cfg.paths.mnist_dir, "train", "paths.mnist_dir");
  RawDataset ds = filter_class(all, cfg.data.source_class);
  const auto s = split(ds, cfg.data.source_train, cfg.data.source_val, mix_seed(cfg.seed, kSourceSplit));
  const NoiseSpec noise = noise_for(cfg, kSourceSplit);
  const auto size = static_cast<std::size_t>(cfg.arch.resolution);
  SourcePairs p;
  p.train = make_pairs(ds, noise, size, Domain::Source, s.train);
  if (!s.val.empty()) p.val = make_pairs(ds, noise, size, Domain::Source, s.val);
  return p;
}

std::vector<PairedSample> load_target_labeled(const RunConfig& cfg) {
  return target_subset(cfg, "t10k", cfg.data.target_labeled, kTargetLabeledSplit);
}

std::vector<PairedSample> load_target_eval(const RunConfig& cfg) {
  return target_subset(cfg, "train", cfg.data.target_eval, kTargetEvalSplit);
}

EvalSet make_eval_set(const std::string& name, const std::vector<PairedSample>& pairs) {
  if (pairs.empty()) throw EmptyDatasetError("evaluation set " + name + " is empty");
  std::vector<std::size_t> all(pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return {name, stack_noisy(pairs, all), stack_clean(pairs, all)};
}

std::string version_string() { return HFADAPT_VERSION; }

std::string config_sha256(const RunConfig& cfg) { return sha256_hex(to_json(cfg)); }

void write_manifest(const RunConfig& cfg, const fs::path& out, const std::string& stage) {
  const fs::path path = out / artifact::kManifest;
  json m = json::object();
  if (fs::exists(path)) {
    try {
      const auto bytes = read_file_bytes(path);
      m = json::parse(bytes.begin(), bytes.end());
    } catch (const std::exception&) {
      m = json::object();  // a damaged manifest is rebuilt from the directory
    }
  }
  m["tool"] = "hfadapt";
  m["seed"] = cfg.seed;
  m["config_sha256"] = config_sha256(cfg);
  m["config"] = json::parse(to_json(cfg));
  m["versions"] = {
      {"hfadapt", version_string()},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"openssl", OpenSSL_version(OPENSSL_VERSION)},
      {"libpng", png_get_libpng_ver(nullptr)},
      {"compiler", __VERSION__},
  };
  json& stages = m["stages"];
  if (!stages.is_array()) stages = json::array();
  stages.push_back({{"stage", stage}, {"config_sha256", config_sha256(cfg)}, {"seed", cfg.seed}});

  json artifacts = json::object();
  for (const auto& entry : fs::directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == artifact::kManifest || name.ends_with(".tmp")) continue;
    artifacts[name] = sha256_file(entry.path());
  }
  m["artifacts"] = artifacts;
  write_text(path, m.dump(2) + "\n");
}

void run_pretrain_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const SourcePairs data = load_source_pairs(cfg);
  run_pretrain(data.train, data.val, cfg.arch, cfg.pretrain, PretrainOutputs{out});
  write_manifest(raw, out, "pretrain");
}

void run_infer_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const fs::path gs_path = require(out, artifact::kGenerator, "pretrain");
  const ModelParameters gs = load_checkpoint(gs_path, build_generator(cfg.arch, 0));
  const auto target = load_target_labeled(cfg);
  const CandidateSet set = generate_candidates(gs, cfg.arch, target, sha256_file(gs_path),
                                               noise_for(cfg, kTargetLabeledSplit), kTargetLabeledName);
  save_candidates(set, out);
  write_manifest(raw, out, "infer");
}

LabelCounts run_feedback_auto_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const CandidateSet set = load_stage_candidates(out);
  FeedbackStore store(out / artifact::kFeedback);
  const LabelCounts counts = label_with_oracle(set, store, raw.oracle);
  write_manifest(raw, out, "feedback-auto");
  return counts;
}

void run_feedback_serve_stage(const RunConfig& raw, const fs::path& out, const std::string& host,
                              int port) {
  prepare(raw, out);
  const CandidateSet set = load_stage_candidates(out);
  FeedbackStore store(out / artifact::kFeedback, true);
  FeedbackService service(set, store);

  // Block the stop signals here so the server thread inherits the mask and
  // this thread can wait for them synchronously.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  const int bound = service.bind(host, port);
  std::cout << "serving session " << set.session << " (" << set.size() << " candidates) on http://"
            << host << ":" << bound << "  (Ctrl-C to stop)" << std::endl;
  std::thread server([&] { service.serve(); });
  int sig = 0;
  sigwait(&stop_signals, &sig);
  service.stop();
  server.join();
  pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
  std::cout << "stored " << store.size() << " labels in " << store.path().string() << std::endl;
  write_manifest(raw, out, "feedback-serve");
}

std::vector<RewardReport> run_train_reward_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const CandidateSet set = load_stage_candidates(out);
  const auto records = load_feedback(out / artifact::kFeedback);
  const auto labeled = labeled_indices(set, records);
  if (labeled.empty()) {
    throw MissingPrerequisite("no feedback for session " + set.session + " in " +
                                  (out / artifact::kFeedback).string(),
                              "feedback-auto");
  }
  const RewardTrainResult result = train_reward(set, labeled, cfg.arch, cfg.reward);
  save_checkpoint(result.model, out / artifact::kReward);
  write_reward_report(out / artifact::kRewardReport, result.reports);
  write_manifest(raw, out, "train-reward");
  return result.reports;
}

void run_adapt_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const ModelParameters gs = load_generator(cfg, out, artifact::kGenerator, "pretrain");
  const ModelParameters reward = load_reward_model(cfg, out);
  const CandidateSet set = load_stage_candidates(out);
  const AdaptResult result =
      run_adapt(gs, reward, cfg.arch, set.z, cfg.adapt, {}, out / artifact::kAdaptLog);
  save_checkpoint(result.generator, out / artifact::kAdapted);
  write_manifest(raw, out, "adapt");
}

std::vector<MetricRow> run_eval_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const ModelParameters gs = load_generator(cfg, out, artifact::kGenerator, "pretrain");
  const ModelParameters gt = load_generator(cfg, out, artifact::kAdapted, "adapt");
  const auto sets = evaluation_sets(cfg);
  std::vector<MetricRow> rows;
  for (const auto& s : sets) rows.push_back(summarize("source_only", gs, cfg.arch, s));
  for (const auto& s : sets) rows.push_back(summarize("full", gt, cfg.arch, s));
  std::vector<DeltaStats> deltas;
  for (const auto& s : sets) deltas.push_back(compare(gs, gt, cfg.arch, s));
  write_eval_csv(out / artifact::kEval, rows);
  write_delta_csv(out / artifact::kDelta, deltas);
  write_manifest(raw, out, "eval");
  return rows;
}

std::vector<MetricRow> run_ablate_stage(const RunConfig& raw, const fs::path& out) {
  prepare(raw, out);
  const RunConfig cfg = with_derived_seeds(raw);
  const ModelParameters gs = load_generator(cfg, out, artifact::kGenerator, "pretrain");
  const ModelParameters reward = load_reward_model(cfg, out);
  const CandidateSet set = load_stage_candidates(out);
  AblationInputs in;
  in.source = &gs;
  in.reward_model = &reward;
  in.arch = cfg.arch;
  in.adapt = cfg.adapt;
  in.adapt_inputs = set.z;
  in.datasets = evaluation_sets(cfg);
  const auto rows = ablation(kAblationConfigs, in, [&](const std::string& name, const AdaptResult& r) {
    save_checkpoint(r.generator, out / ("gt_" + name + ".ckpt"));
  });
  write_eval_csv(out / artifact::kAblation, rows);
  write_manifest(raw, out, "ablate");
  return rows;
}

std::vector<MetricRow> run_pipeline(const RunConfig& cfg, const fs::path& out) {
  run_pretrain_stage(cfg, out);
  run_infer_stage(cfg, out);
  run_feedback_auto_stage(cfg, out);
  run_train_reward_stage(cfg, out);
  run_adapt_stage(cfg, out);
  return run_eval_stage(cfg, out);
}

}  // namespace hfadapt
