#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hfadapt/adapt.hpp"
#include "hfadapt/dataio.hpp"
#include "hfadapt/feedback.hpp"
#include "hfadapt/models.hpp"
#include "hfadapt/pretrain.hpp"
#include "hfadapt/reward.hpp"

namespace hfadapt {

struct PathsConfig {
  std::string mnist_dir = "data/mnist";
  std::string fashion_dir = "data/fashion";
};

struct DataConfig {
  int source_class = 0;
  std::size_t source_train = 1000;
  std::size_t source_val = 1000;
  std::size_t target_labeled = 2000;  // labeled and adapted on (target test file)
  std::size_t target_eval = 1000;     // disjoint evaluation split (target train file)
};

/// Every knob of a run. Stage seeds are derived from `seed`, so the
/// per-stage `seed` fields below are ignored on input and not serialized.
struct RunConfig {
  std::uint64_t seed = 0;
  PathsConfig paths;
  NoiseSpec noise;
  DataConfig data;
  ArchitectureConfig arch;
  PretrainConfig pretrain;
  OracleSpec oracle;
  RewardTrainConfig reward;
  AdaptConfig adapt;

  void validate() const;  // ConfigError on the first invalid field
};

// Parses a JSON document over the defaults. Unknown keys, wrong types and
// invalid values raise ConfigError naming the dotted key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);

// "a.b.c=value"; the value is read as JSON when it parses, else as a string.
void apply_override(RunConfig& cfg, std::string_view assignment);

// Stage seeds derived from the run seed.
RunConfig with_derived_seeds(RunConfig cfg);

}  // namespace hfadapt
