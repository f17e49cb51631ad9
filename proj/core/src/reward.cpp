#include "hfadapt/reward.hpp"

#include <algorithm>
#include <cmath>

#include "hfadapt/csv.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/losses.hpp"

namespace hfadapt {

void RewardTrainConfig::validate() const {
  if (batch < 1) throw ConfigError("reward.batch must be >= 1");
  if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("reward.holdout must be in (0,1)");
  if (!(adam.lr > 0.0f)) throw ConfigError("reward.lr must be > 0");
}

Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractViolation("gather of zero rows");
  Shape s = batch.shape();
  const std::size_t per = batch.numel() / s[0];
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= batch.dim(0)) throw ContractViolation("gather index out of range");
    std::copy_n(batch.data() + indices[i] * per, per, out.data() + i * per);
  }
  return out;
}

namespace {

void check_two_classes(const std::vector<std::pair<std::size_t, int>>& items, const char* what) {
  std::size_t bad = 0;
  for (const auto& [i, y] : items) bad += (y == 1);
  if (bad == 0 || bad == items.size()) {
    throw ValidationError(std::string(what) + " holds only " + (bad == 0 ? "Good" : "Bad") +
                          " feedback (" + std::to_string(items.size()) +
                          " records); the reward model needs both Good and Bad examples");
  }
}

}  // namespace

RewardTrainResult train_reward(const CandidateSet& candidates,
                               const std::vector<std::pair<std::size_t, int>>& labeled,
                               const ArchitectureConfig& arch, const RewardTrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  if (labeled.size() < 2) throw ValidationError("reward training needs at least two labeled samples");

  RewardTrainResult res;
  const auto order = permutation(labeled.size(), mix_seed(cfg.seed, 4));
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.holdout * static_cast<double>(labeled.size()))), 1,
      labeled.size() - 1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < labeled.size() - n_hold ? res.train : res.holdout).push_back(labeled[order[k]]);
  }
  check_two_classes(res.train, "the training split");

  double w_good = 1.0, w_bad = 1.0;
  if (cfg.balance_classes) {
    std::size_t bad = 0;
    for (const auto& [i, y] : res.train) bad += (y == 1);
    const double n = static_cast<double>(res.train.size());
    w_good = n / (2.0 * static_cast<double>(res.train.size() - bad));
    w_bad = n / (2.0 * static_cast<double>(bad));
  }

  res.model = build_critic(arch, mix_seed(cfg.seed, 3));
  AdamState opt{cfg.adam};
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto shuffled = permutation(res.train.size(), mix_seed(cfg.seed, 2000 + epoch));
    for (std::size_t b = 0; b < shuffled.size(); b += cfg.batch) {
      const std::size_t e = std::min(shuffled.size(), b + cfg.batch);
      std::vector<std::size_t> rows;
      std::vector<float> labels, weights;
      for (std::size_t k = b; k < e; ++k) {
        const auto& [idx, y] = res.train[shuffled[k]];
        rows.push_back(idx);
        labels.push_back(static_cast<float>(y));
        weights.push_back(static_cast<float>(y == 1 ? w_bad : w_good));
      }
      Graph g;
      std::vector<BatchStatsUpdate> stats;
      ForwardOptions opts{Mode::Train, 0, &stats};
      Var z = g.constant(gather_rows(candidates.z, rows));
      Var out = g.constant(gather_rows(candidates.g, rows));
      Var r = cfg.per_patch ? sigmoid(critic_logits(g, res.model, arch, z, out, opts))
                            : critic_mean_prob(g, res.model, arch, z, out, opts);
      Var loss = cfg.balance_classes ? reward_bce(r, labels, weights) : reward_bce(r, labels);
      if (!std::isfinite(loss.value().item())) {
        throw DivergenceError("reward loss became non-finite in epoch " + std::to_string(epoch));
      }
      adam_update(res.model, backward(loss, res.model), opt);
      apply_stats_updates(res.model, stats);
    }
  }
  res.reports.push_back(evaluate_reward(res.model, arch, candidates, res.train, "train"));
  check_two_classes(res.holdout, "the held-out split");
  res.reports.push_back(evaluate_reward(res.model, arch, candidates, res.holdout, "holdout"));
  return res;
}

RewardReport score_rewards(const std::vector<double>& rewards, const std::vector<int>& labels,
                           std::string split) {
  if (rewards.size() != labels.size()) throw ContractViolation("reward/label count mismatch");
  RewardReport rep;
  rep.split = std::move(split);
  rep.n = rewards.size();
  std::size_t correct = 0, n_good = 0, n_bad = 0;
  double sum_good = 0.0, sum_bad = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const int predicted = rewards[i] >= 0.5 ? 1 : 0;
    correct += (predicted == labels[i]);
    if (labels[i] == 1) {
      ++n_bad;
      sum_bad += rewards[i];
    } else {
      ++n_good;
      sum_good += rewards[i];
    }
  }
  if (n_good == 0 || n_bad == 0) {
    throw ValidationError("reward evaluation on '" + rep.split + "' lacks " +
                          (n_good == 0 ? "Good" : "Bad") + " samples");
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.n);
  rep.mean_reward_good = sum_good / static_cast<double>(n_good);
  rep.mean_reward_bad = sum_bad / static_cast<double>(n_bad);
  return rep;
}

RewardReport evaluate_reward(const ModelParameters& reward_model, const ArchitectureConfig& arch,
                             const CandidateSet& candidates,
                             const std::vector<std::pair<std::size_t, int>>& labeled,
                             std::string split) {
  if (labeled.empty()) throw ValidationError("reward evaluation on an empty split");
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const auto& [i, y] : labeled) {
    rows.push_back(i);
    labels.push_back(y);
  }
  const Tensor r = reward_scalar(reward_model, arch, gather_rows(candidates.z, rows),
                                 gather_rows(candidates.g, rows));
  std::vector<double> rewards(r.values().begin(), r.values().end());
  return score_rewards(rewards, labels, std::move(split));
}

void write_reward_report(const std::filesystem::path& path, const std::vector<RewardReport>& rows) {
  CsvTable t;
  t.header = kRewardReportHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.split, std::to_string(r.n), format_number(r.accuracy),
                      format_number(r.mean_reward_good), format_number(r.mean_reward_bad)});
  }
  write_csv(path, t);
}

std::vector<RewardReport> read_reward_report(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kRewardReportHeader) throw ValidationError("unexpected reward report header");
  std::vector<RewardReport> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    RewardReport r;
    r.split = t.rows[i][0];
    r.n = static_cast<std::size_t>(t.number(i, "n"));
    r.accuracy = t.number(i, "accuracy");
    r.mean_reward_good = t.number(i, "mean_reward_good");
    r.mean_reward_bad = t.number(i, "mean_reward_bad");
    out.push_back(r);
  }
  return out;
}

}  // namespace hfadapt
