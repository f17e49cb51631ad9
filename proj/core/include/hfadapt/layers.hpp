#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "hfadapt/graph.hpp"
#include "hfadapt/ops.hpp"
#include "hfadapt/rng.hpp"

namespace hfadapt {

struct Conv2dSpec {
  std::size_t out_channels = 1;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  bool bias = true;
};

struct ConvTranspose2dSpec {
  std::size_t out_channels = 1;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  bool bias = true;
};

struct BatchNormSpec {
  float eps = 1e-5f;
  float momentum = 0.1f;
};

struct LeakyReLUSpec {
  float slope = 0.2f;
};
struct ReLUSpec {};
struct TanhSpec {};
struct SigmoidSpec {};
struct DropoutSpec {
  float p = 0.5f;
};

using LayerSpec = std::variant<Conv2dSpec, ConvTranspose2dSpec, BatchNormSpec, LeakyReLUSpec,
                               ReLUSpec, TanhSpec, SigmoidSpec, DropoutSpec>;

std::string layer_kind(const LayerSpec& spec);

/// A plain chain of layers over a [C, H, W] input.
struct SequentialArch {
  Shape input_shape;  // [C, H, W]
  std::vector<LayerSpec> layers;
};

// [C, H, W] after the last layer. Throws ConfigError naming the first layer
// that cannot accept its input.
Shape output_shape(const SequentialArch& arch);

// Seeded init: conv weights N(0, 0.02), biases 0, BN gamma N(1, 0.02), beta 0,
// running mean 0, running var 1. Names are "L<i>.<field>".
ModelParameters init_parameters(const SequentialArch& arch, std::uint64_t seed);

enum class Mode { Train, Eval };

/// Running-statistic updates produced by a training-mode forward pass.
struct BatchStatsUpdate {
  std::string prefix;  // "<prefix>.running_mean" / "<prefix>.running_var"
  BatchStats stats;
  std::size_t count;  // values per channel that produced the stats
  float momentum;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  // Dropout masks derive from this seed and the layer position.
  std::uint64_t dropout_seed = 0;
  // Receives one entry per batch-norm layer in training mode (may be null).
  std::vector<BatchStatsUpdate>* stats_sink = nullptr;
};

// Folds recorded batch statistics into the model's running buffers
// (running_var uses the unbiased batch variance).
void apply_stats_updates(ModelParameters& model, const std::vector<BatchStatsUpdate>& updates);

Var forward(Graph& g, const ModelParameters& model, const SequentialArch& arch, Var x,
            const ForwardOptions& opts = {});
// Gradient-free evaluation in eval mode. `x` is [N, C, H, W].
Tensor forward(const ModelParameters& model, const SequentialArch& arch, const Tensor& x);

// Building blocks shared with the model factories.
namespace layer {

void add_conv(ModelParameters& model, const std::string& prefix, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, bool bias, bool transposed, Rng& rng);
void add_batch_norm(ModelParameters& model, const std::string& prefix, std::size_t channels,
                    Rng& rng);

Var conv(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
         ConvGeometry geom, bool bias);
Var conv_transpose(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
                   ConvGeometry geom, bool bias);
Var batch_norm(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
               const BatchNormSpec& spec, const ForwardOptions& opts);

}  // namespace layer

}  // namespace hfadapt
