#include "hfadapt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hfadapt/csv.hpp"
#include "hfadapt/error.hpp"

namespace hfadapt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

AdaptVariant variant_of(const std::string& config) {
  if (config == "full") return AdaptVariant::Full;
  if (config == "wo_Lp") return AdaptVariant::WithoutConsistency;
  if (config == "wo_Ln") return AdaptVariant::WithoutSnapshot;
  if (config == "only_Lr") return AdaptVariant::RewardOnly;
  throw ConfigError("unknown ablation config '" + config + "'");
}

}  // namespace

MetricRow summarize_outputs(const std::string& config, const std::string& dataset,
                            const Tensor& outputs, const Tensor& reference) {
  if (outputs.dim(0) == 0) throw EmptyDatasetError("cannot summarize an empty dataset");
  const auto p = describe(psnr_batch(outputs, reference));
  const auto s = describe(ssim_batch(outputs, reference));
  MetricRow row;
  row.config = config;
  row.dataset = dataset;
  row.n = p.n;
  row.psnr_mean = p.n ? p.mean : kNaN;
  row.psnr_std = p.n ? p.stddev : kNaN;
  row.ssim_mean = s.mean;
  row.ssim_std = s.stddev;
  row.inf_count = p.inf_count;
  return row;
}

MetricRow summarize(const std::string& config, const ModelParameters& generator,
                    const ArchitectureConfig& arch, const EvalSet& data) {
  return summarize_outputs(config, data.name, generate(generator, arch, data.z), data.x);
}

MetricRow noisy_baseline(const EvalSet& data) {
  return summarize_outputs("noisy_baseline", data.name, data.z, data.x);
}

MetricRow failed_row(const std::string& config, const std::string& dataset) {
  return MetricRow{config, dataset, 0, kNaN, kNaN, kNaN, kNaN, 0};
}

DeltaStats delta_stats(const std::string& dataset, const std::vector<double>& before,
                       const std::vector<double>& after) {
  if (before.size() != after.size()) throw ContractViolation("delta inputs differ in length");
  std::vector<double> deltas, pos, neg;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = after[i] - before[i];
    if (!std::isfinite(d)) continue;
    deltas.push_back(d);
    if (d > 0.0) pos.push_back(d);
    else if (d < 0.0) neg.push_back(-d);
  }
  DeltaStats s;
  s.dataset = dataset;
  s.n = deltas.size();
  if (s.n == 0) {
    s.frac_improved = s.pos_mean = s.pos_std = s.neg_mean = s.neg_std = s.max = s.min = kNaN;
    return s;
  }
  s.frac_improved = static_cast<double>(pos.size()) / static_cast<double>(s.n);
  const auto ps = describe(pos);
  const auto ns = describe(neg);
  s.pos_mean = ps.n ? ps.mean : kNaN;
  s.pos_std = ps.n ? ps.stddev : kNaN;
  s.neg_mean = ns.n ? ns.mean : kNaN;
  s.neg_std = ns.n ? ns.stddev : kNaN;
  s.max = *std::max_element(deltas.begin(), deltas.end());
  s.min = *std::min_element(deltas.begin(), deltas.end());
  return s;
}

DeltaStats compare(const ModelParameters& before, const ModelParameters& after,
                   const ArchitectureConfig& arch, const EvalSet& data) {
  return delta_stats(data.name, psnr_batch(generate(before, arch, data.z), data.x),
                     psnr_batch(generate(after, arch, data.z), data.x));
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  CsvTable t;
  t.header = kEvalHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.config, r.dataset, std::to_string(r.n), format_number(r.psnr_mean),
                      format_number(r.psnr_std), format_number(r.ssim_mean),
                      format_number(r.ssim_std), std::to_string(r.inf_count)});
  }
  write_csv(path, t);
}

std::vector<MetricRow> read_eval_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kEvalHeader) throw ValidationError("unexpected eval report header in " + path.string());
  std::vector<MetricRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    MetricRow r;
    r.config = t.rows[i][0];
    r.dataset = t.rows[i][1];
    r.n = static_cast<std::size_t>(t.number(i, "n"));
    r.psnr_mean = t.number(i, "psnr_mean");
    r.psnr_std = t.number(i, "psnr_std");
    r.ssim_mean = t.number(i, "ssim_mean");
    r.ssim_std = t.number(i, "ssim_std");
    r.inf_count = static_cast<std::size_t>(t.number(i, "inf_count"));
    out.push_back(r);
  }
  return out;
}

void write_delta_csv(const std::filesystem::path& path, const std::vector<DeltaStats>& rows) {
  CsvTable t;
  t.header = kDeltaHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.dataset, format_number(r.frac_improved), format_number(r.pos_mean),
                      format_number(r.pos_std), format_number(r.neg_mean), format_number(r.neg_std),
                      format_number(r.max), format_number(r.min)});
  }
  write_csv(path, t);
}

std::vector<DeltaStats> read_delta_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kDeltaHeader) throw ValidationError("unexpected delta report header in " + path.string());
  std::vector<DeltaStats> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    DeltaStats d;
    d.dataset = t.rows[i][0];
    d.frac_improved = t.number(i, "frac_improved");
    d.pos_mean = t.number(i, "pos_mean");
    d.pos_std = t.number(i, "pos_std");
    d.neg_mean = t.number(i, "neg_mean");
    d.neg_std = t.number(i, "neg_std");
    d.max = t.number(i, "max");
    d.min = t.number(i, "min");
    out.push_back(d);
  }
  return out;
}

std::vector<MetricRow> ablation(
    const std::vector<std::string>& configs, const AblationInputs& in,
    const std::function<void(const std::string&, const AdaptResult&)>& on_run) {
  for (const auto& c : configs) {
    if (std::find(kAblationConfigs.begin(), kAblationConfigs.end(), c) == kAblationConfigs.end()) {
      throw ConfigError("unknown ablation config '" + c + "'");
    }
  }
  std::vector<MetricRow> rows;
  for (const auto& config : configs) {
    if (config == "noisy_baseline") {
      for (const auto& d : in.datasets) rows.push_back(noisy_baseline(d));
      continue;
    }
    if (!in.source) throw ContractViolation("ablation needs a source generator");
    if (config == "source_only") {
      for (const auto& d : in.datasets) rows.push_back(summarize(config, *in.source, in.arch, d));
      continue;
    }
    if (!in.reward_model) throw ContractViolation("ablation needs a reward model");
    try {
      const AdaptResult run = run_adapt(*in.source, *in.reward_model, in.arch, in.adapt_inputs,
                                        with_variant(in.adapt, variant_of(config)));
      if (on_run) on_run(config, run);
      for (const auto& d : in.datasets) rows.push_back(summarize(config, run.generator, in.arch, d));
    } catch (const DivergenceError&) {
      for (const auto& d : in.datasets) rows.push_back(failed_row(config, d.name));
    }
  }
  return rows;
}

}  // namespace hfadapt
