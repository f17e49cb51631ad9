#include "hfadapt/pretrain.hpp"

#include <cmath>
#include <numeric>

#include "hfadapt/checkpoint.hpp"
#include "hfadapt/csv.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/losses.hpp"
#include "hfadapt/metrics.hpp"

namespace hfadapt {

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("pretrain.epochs must be >= 1");
  if (batch < 1) throw ConfigError("pretrain.batch must be >= 1");
  if (!(l1_weight >= 0.0f)) throw ConfigError("pretrain.l1_weight must be >= 0");
  if (!(adam.lr > 0.0f)) throw ConfigError("pretrain.lr must be > 0");
}

namespace {

void require_finite(double v, const char* what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string(what) + " became non-finite in epoch " + std::to_string(epoch));
  }
}

}  // namespace

PretrainStepTerms pretrain_step(ModelParameters& generator, ModelParameters& critic,
                                AdamState& g_opt, AdamState& d_opt, const ArchitectureConfig& arch,
                                const Tensor& z, const Tensor& x, float l1_weight,
                                std::uint64_t dropout_seed) {
  PretrainStepTerms terms;
  std::vector<BatchStatsUpdate> g_stats, d_stats;
  Graph gg;
  Var zv = gg.constant(z);
  Var xv = gg.constant(x);
  ForwardOptions g_opts{Mode::Train, dropout_seed, &g_stats};
  Var fake = generator_forward(gg, generator, arch, zv, g_opts);

  {
    Graph gd;
    ForwardOptions d_opts{Mode::Train, 0, &d_stats};
    Var zc = gd.constant(z);
    Var p_real = sigmoid(critic_logits(gd, critic, arch, zc, gd.constant(x), d_opts));
    Var p_fake = sigmoid(critic_logits(gd, critic, arch, zc, gd.constant(fake.value()), d_opts));
    Var loss = d_loss(p_real, p_fake);
    terms.d_loss = loss.value().item();
    adam_update(critic, backward(loss, critic), d_opt);
  }

  // The generator sees the updated critic as a fixed function.
  const ModelParameters critic_now = snapshot(critic);
  ForwardOptions c_opts{Mode::Train, 0, &d_stats};
  Var p = sigmoid(critic_logits(gg, critic_now, arch, zv, fake, c_opts));
  Var adv = g_adv_loss(p);
  Var l1 = l1_loss(xv, fake);
  Var total = adv + l1 * l1_weight;
  terms.g_adv = adv.value().item();
  terms.l1 = l1.value().item();
  terms.g_total = total.value().item();
  adam_update(generator, backward(total, generator), g_opt);

  apply_stats_updates(generator, g_stats);
  apply_stats_updates(critic, d_stats);
  return terms;
}

PretrainResult run_pretrain(const std::vector<PairedSample>& train,
                            const std::vector<PairedSample>& val, const ArchitectureConfig& arch,
                            const PretrainConfig& cfg, const std::optional<PretrainOutputs>& outputs) {
  cfg.validate();
  arch.validate();
  if (train.empty()) throw EmptyDatasetError("pretraining needs at least one training pair");

  PretrainResult res;
  res.generator = build_generator(arch, mix_seed(cfg.seed, 1));
  res.critic = build_critic(arch, mix_seed(cfg.seed, 2));
  AdamState g_opt{cfg.adam};
  AdamState d_opt{cfg.adam};

  std::optional<CsvAppender> log_file;
  if (outputs) log_file.emplace(outputs->dir / "pretrain_log.csv", kPretrainLogHeader);

  Tensor val_z, val_x;
  if (!val.empty()) {
    std::vector<std::size_t> all(val.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    val_z = stack_noisy(val, all);
    val_x = stack_clean(val, all);
  }

  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = permutation(train.size(), mix_seed(cfg.seed, 1000 + epoch));
    double sum_d = 0.0, sum_adv = 0.0, sum_l1 = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      std::span<const std::size_t> idx(order.data() + b, e - b);
      PretrainStepTerms t;
      try {
        t = pretrain_step(res.generator, res.critic, g_opt, d_opt, arch, stack_noisy(train, idx),
                          stack_clean(train, idx), cfg.l1_weight, mix_seed(cfg.seed, 1u << 20 | step));
      } catch (const DivergenceError& err) {
        throw DivergenceError(std::string("pretraining diverged in epoch ") + std::to_string(epoch) +
                              ": " + err.what());
      }
      require_finite(t.d_loss, "critic loss", epoch);
      require_finite(t.g_total, "generator loss", epoch);
      sum_d += t.d_loss;
      sum_adv += t.g_adv;
      sum_l1 += t.l1;
      ++batches;
      ++step;
    }

    PretrainLogRow row;
    row.epoch = epoch;
    row.d_loss = sum_d / static_cast<double>(batches);
    row.g_adv = sum_adv / static_cast<double>(batches);
    row.l1 = sum_l1 / static_cast<double>(batches);
    row.val_psnr = row.val_ssim = std::nan("");
    if (!val.empty()) {
      const Tensor out = generate(res.generator, arch, val_z);
      row.val_psnr = describe(psnr_batch(out, val_x)).mean;
      row.val_ssim = describe(ssim_batch(out, val_x)).mean;
    }
    res.log.push_back(row);
    if (log_file) {
      log_file->append({std::to_string(row.epoch), format_number(row.d_loss),
                        format_number(row.g_adv), format_number(row.l1),
                        format_number(row.val_psnr), format_number(row.val_ssim)});
    }
    if (outputs && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
        epoch != cfg.epochs) {
      save_checkpoint(res.generator, outputs->dir / ("gs_epoch" + std::to_string(epoch) + ".ckpt"));
    }
  }
  if (outputs) {
    save_checkpoint(res.generator, outputs->dir / "gs.ckpt");
    save_checkpoint(res.critic, outputs->dir / "critic.ckpt");
  }
  return res;
}

}  // namespace hfadapt
