#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "hfadapt/adam.hpp"
#include "hfadapt/dataio.hpp"
#include "hfadapt/models.hpp"

namespace hfadapt {

struct PretrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 10;
  AdamConfig adam;
  float l1_weight = 100.0f;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only

  void validate() const;
};

struct PretrainLogRow {
  std::size_t epoch = 0;
  double d_loss = 0.0;  // epoch means over batches
  double g_adv = 0.0;
  double l1 = 0.0;
  double val_psnr = 0.0;  // NaN without a validation set
  double val_ssim = 0.0;
};

inline const std::vector<std::string> kPretrainLogHeader = {"epoch", "d_loss",   "g_adv",
                                                            "l1",    "val_psnr", "val_ssim"};

struct PretrainResult {
  ModelParameters generator;
  ModelParameters critic;
  std::vector<PretrainLogRow> log;
};

struct PretrainOutputs {
  std::filesystem::path dir;  // gs.ckpt, critic.ckpt, pretrain_log.csv, gs_epoch<k>.ckpt
};

// Per-batch terms, exposed for checks on the objective's structure.
struct PretrainStepTerms {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double l1 = 0.0;
  double g_total = 0.0;
};

// One alternating update: a critic step on (real, detached fake), then a
// generator step through the updated critic on g_adv + l1_weight * l1.
PretrainStepTerms pretrain_step(ModelParameters& generator, ModelParameters& critic,
                                AdamState& g_opt, AdamState& d_opt, const ArchitectureConfig& arch,
                                const Tensor& z, const Tensor& x, float l1_weight,
                                std::uint64_t dropout_seed);

// Throws DivergenceError if any loss becomes non-finite.
PretrainResult run_pretrain(const std::vector<PairedSample>& train,
                            const std::vector<PairedSample>& val, const ArchitectureConfig& arch,
                            const PretrainConfig& cfg,
                            const std::optional<PretrainOutputs>& outputs = std::nullopt);

}  // namespace hfadapt
