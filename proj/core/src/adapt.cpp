#include "hfadapt/adapt.hpp"

#include <cmath>

#include "hfadapt/csv.hpp"
#include "hfadapt/losses.hpp"
#include "hfadapt/reward.hpp"

namespace hfadapt {

void AdaptConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("adapt.alpha must be in [0,1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("adapt.epsilon must be in (0,1)");
  if (snapshot_interval < 1) throw ConfigError("adapt.snapshot_interval must be >= 1");
  if (batch < 1) throw ConfigError("adapt.batch must be >= 1");
  if (!(adam.lr > 0.0f)) throw ConfigError("adapt.lr must be > 0");
}

const char* variant_name(AdaptVariant v) {
  switch (v) {
    case AdaptVariant::Full: return "full";
    case AdaptVariant::WithoutConsistency: return "wo_Lp";
    case AdaptVariant::WithoutSnapshot: return "wo_Ln";
    case AdaptVariant::RewardOnly: return "only_Lr";
  }
  return "?";
}

AdaptConfig with_variant(AdaptConfig cfg, AdaptVariant v) {
  cfg.reward_only = false;
  switch (v) {
    case AdaptVariant::Full: break;
    case AdaptVariant::WithoutConsistency: cfg.alpha = 0.0; break;
    case AdaptVariant::WithoutSnapshot: cfg.alpha = 1.0; break;
    case AdaptVariant::RewardOnly: cfg.reward_only = true; break;
  }
  return cfg;
}

GateCache GateCache::build(const ModelParameters& source, const ModelParameters& reward_model,
                           const ArchitectureConfig& arch, const Tensor& z, double epsilon) {
  GateCache c;
  c.anchor = generate(source, arch, z);
  const Tensor r = reward_scalar(reward_model, arch, z, c.anchor);
  for (float v : r.values()) {
    c.reward.push_back(v);
    c.gate.push_back(static_cast<float>(hfadapt::gate(v, epsilon)));
  }
  return c;
}

std::size_t GateCache::gated_on() const {
  std::size_t n = 0;
  for (float g : gate) n += g != 0.0f;
  return n;
}

namespace {

bool params_finite(const ModelParameters& m) {
  for (const auto& e : m.entries())
    if (!e.value.all_finite()) return false;
  return true;
}

}  // namespace

AdaptResult run_adapt(const ModelParameters& source, const ModelParameters& reward_model,
                      const ArchitectureConfig& arch, const Tensor& z, const AdaptConfig& cfg,
                      const AdaptObserver& observer, const std::optional<std::filesystem::path>& log_path) {
  cfg.validate();
  arch.validate();
  if (z.rank() != 4 || z.dim(0) == 0) throw EmptyDatasetError("adaptation needs target inputs");

  // Frozen views: no gradient can reach these.
  const ModelParameters source_frozen = snapshot(source);
  const ModelParameters reward_frozen = snapshot(reward_model);

  AdaptResult res;
  res.gates = GateCache::build(source_frozen, reward_frozen, arch, z, cfg.epsilon);
  res.generator = source_frozen.thawed_copy();
  ModelParameters snap = snapshot(res.generator);
  AdamState opt{cfg.adam};

  std::optional<CsvAppender> log_file;
  if (log_path) log_file.emplace(*log_path, kAdaptLogHeader);

  const float alpha = static_cast<float>(cfg.alpha);
  const ForwardOptions eval_opts{Mode::Eval, 0, nullptr};
  const std::size_t n = z.dim(0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = permutation(n, mix_seed(cfg.seed, 3000 + epoch));
    for (std::size_t b = 0; b < n; b += cfg.batch) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg.batch)));
      AdaptLogRow row;
      row.step = step;
      if (step % cfg.snapshot_interval == 0) {
        snap = snapshot(res.generator);
        row.snapshot_refreshed = true;
      }
      if (observer) observer({step, row.snapshot_refreshed, res.generator, snap});

      const ModelParameters last_good = res.generator;
      try {
        const Tensor zb = gather_rows(z, rows);
        Graph g;
        Var zv = g.constant(zb);
        Var out = generator_forward(g, res.generator, arch, zv, eval_opts);
        Var r = critic_mean_prob(g, reward_frozen, arch, zv, out, eval_opts);
        Var l_r = loss_reward(r);
        Var total = l_r;
        row.l_r = l_r.value().item();
        if (!cfg.reward_only) {
          std::vector<float> gates;
          for (auto i : rows) gates.push_back(res.gates.gate[i]);
          Var l_p = loss_consistency(out, g.constant(gather_rows(res.gates.anchor, rows)), gates);
          Var l_n = loss_snapshot(out, g.constant(generate(snap, arch, zb)));
          total = total_loss(l_r, l_p, l_n, alpha);
          row.l_p = l_p.value().item();
          row.l_n = l_n.value().item();
        }
        row.total = total.value().item();
        if (!std::isfinite(row.total)) throw DivergenceError("adaptation loss became non-finite");
        adam_update(res.generator, backward(total, res.generator), opt);
        if (!params_finite(res.generator)) throw DivergenceError("adaptation produced non-finite parameters");
      } catch (const DivergenceError& e) {
        throw AdaptDivergedError(std::string(e.what()) + " at step " + std::to_string(step),
                                 last_good, step);
      }
      res.log.push_back(row);
      if (log_file) {
        log_file->append({std::to_string(row.step), format_number(row.l_r), format_number(row.l_p),
                          format_number(row.l_n), format_number(row.total),
                          row.snapshot_refreshed ? "1" : "0"});
      }
      ++step;
    }
  }
  return res;
}

}  // namespace hfadapt
