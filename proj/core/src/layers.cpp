#include "hfadapt/layers.hpp"

#include "hfadapt/error.hpp"

namespace hfadapt {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr float kInitStd = 0.02f;

Tensor gaussian(Shape shape, float mean, float std, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(mean + std * rng.normal());
  return t;
}

std::string layer_name(std::size_t i) { return "L" + std::to_string(i); }

}  // namespace

std::string layer_kind(const LayerSpec& spec) {
  return std::visit(overloaded{
                        [](const Conv2dSpec&) { return std::string("conv2d"); },
                        [](const ConvTranspose2dSpec&) { return std::string("conv_transpose2d"); },
                        [](const BatchNormSpec&) { return std::string("batch_norm"); },
                        [](const LeakyReLUSpec&) { return std::string("leaky_relu"); },
                        [](const ReLUSpec&) { return std::string("relu"); },
                        [](const TanhSpec&) { return std::string("tanh"); },
                        [](const SigmoidSpec&) { return std::string("sigmoid"); },
                        [](const DropoutSpec&) { return std::string("dropout"); },
                    },
                    spec);
}

Shape output_shape(const SequentialArch& arch) {
  if (arch.input_shape.size() != 3 || shape_numel(arch.input_shape) == 0) {
    throw ConfigError("architecture input shape must be [C, H, W], got " +
                      shape_str(arch.input_shape));
  }
  Shape s = arch.input_shape;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& spec = arch.layers[i];
    try {
      std::visit(overloaded{
                     [&](const Conv2dSpec& c) {
                       if (c.out_channels == 0 || c.kernel == 0) throw ConfigError("empty kernel");
                       const ConvGeometry geom{c.stride, c.padding};
                       s = {c.out_channels, conv_output_size(s[1], c.kernel, geom),
                            conv_output_size(s[2], c.kernel, geom)};
                     },
                     [&](const ConvTranspose2dSpec& c) {
                       if (c.out_channels == 0 || c.kernel == 0) throw ConfigError("empty kernel");
                       const ConvGeometry geom{c.stride, c.padding};
                       s = {c.out_channels, conv_transpose_output_size(s[1], c.kernel, geom),
                            conv_transpose_output_size(s[2], c.kernel, geom)};
                     },
                     [&](const DropoutSpec& d) {
                       if (!(d.p >= 0.0f && d.p < 1.0f)) throw ConfigError("dropout p outside [0,1)");
                     },
                     [](const auto&) {},
                 },
                 spec);
    } catch (const ConfigError& e) {
      throw ConfigError("layer " + layer_name(i) + " (" + layer_kind(spec) + "): " + e.what());
    }
  }
  return s;
}

namespace layer {

void add_conv(ModelParameters& model, const std::string& prefix, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, bool bias, bool transposed, Rng& rng) {
  Shape ws = transposed ? Shape{in_channels, out_channels, kernel, kernel}
                        : Shape{out_channels, in_channels, kernel, kernel};
  model.add(prefix + ".weight", gaussian(std::move(ws), 0.0f, kInitStd, rng));
  if (bias) model.add(prefix + ".bias", Tensor({out_channels}, 0.0f));
}

void add_batch_norm(ModelParameters& model, const std::string& prefix, std::size_t channels,
                    Rng& rng) {
  model.add(prefix + ".gamma", gaussian({channels}, 1.0f, kInitStd, rng));
  model.add(prefix + ".beta", Tensor({channels}, 0.0f));
  model.add(prefix + ".running_mean", Tensor({channels}, 0.0f), false);
  model.add(prefix + ".running_var", Tensor({channels}, 1.0f), false);
}

Var conv(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
         ConvGeometry geom, bool bias) {
  std::optional<Var> b;
  if (bias) b = g.parameter(model, prefix + ".bias");
  return conv2d(x, g.parameter(model, prefix + ".weight"), b, geom);
}

Var conv_transpose(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
                   ConvGeometry geom, bool bias) {
  std::optional<Var> b;
  if (bias) b = g.parameter(model, prefix + ".bias");
  return conv_transpose2d(x, g.parameter(model, prefix + ".weight"), b, geom);
}

Var batch_norm(Graph& g, const ModelParameters& model, const std::string& prefix, Var x,
               const BatchNormSpec& spec, const ForwardOptions& opts) {
  Var gamma = g.parameter(model, prefix + ".gamma");
  Var beta = g.parameter(model, prefix + ".beta");
  if (opts.mode == Mode::Eval) {
    return batch_norm_eval(x, gamma, beta, model.at(prefix + ".running_mean"),
                           model.at(prefix + ".running_var"), spec.eps);
  }
  BatchStats stats;
  Var out = batch_norm_train(x, gamma, beta, spec.eps, &stats);
  if (opts.stats_sink) {
    const Shape& s = x.shape();
    opts.stats_sink->push_back({prefix, std::move(stats), s[0] * s[2] * s[3], spec.momentum});
  }
  return out;
}

}  // namespace layer

void apply_stats_updates(ModelParameters& model, const std::vector<BatchStatsUpdate>& updates) {
  for (const auto& u : updates) {
    Tensor& rm = model.mutable_at(u.prefix + ".running_mean");
    Tensor& rv = model.mutable_at(u.prefix + ".running_var");
    const double m = u.momentum;
    const double unbias =
        u.count > 1 ? static_cast<double>(u.count) / static_cast<double>(u.count - 1) : 1.0;
    for (std::size_t c = 0; c < rm.numel(); ++c) {
      rm[c] = static_cast<float>((1.0 - m) * rm[c] + m * u.stats.mean[c]);
      rv[c] = static_cast<float>((1.0 - m) * rv[c] + m * u.stats.variance[c] * unbias);
    }
  }
}

ModelParameters init_parameters(const SequentialArch& arch, std::uint64_t seed) {
  output_shape(arch);  // validates
  ModelParameters model;
  Rng rng(seed);
  std::size_t channels = arch.input_shape[0];
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const std::string prefix = layer_name(i);
    std::visit(overloaded{
                   [&](const Conv2dSpec& c) {
                     layer::add_conv(model, prefix, channels, c.out_channels, c.kernel, c.bias,
                                     false, rng);
                     channels = c.out_channels;
                   },
                   [&](const ConvTranspose2dSpec& c) {
                     layer::add_conv(model, prefix, channels, c.out_channels, c.kernel, c.bias,
                                     true, rng);
                     channels = c.out_channels;
                   },
                   [&](const BatchNormSpec&) { layer::add_batch_norm(model, prefix, channels, rng); },
                   [](const auto&) {},
               },
               arch.layers[i]);
  }
  return model;
}

Var forward(Graph& g, const ModelParameters& model, const SequentialArch& arch, Var x,
            const ForwardOptions& opts) {
  const Shape& in = x.shape();
  if (in.size() != 4 || Shape(in.begin() + 1, in.end()) != arch.input_shape) {
    throw ConfigError("input " + shape_str(in) + " does not match declared [N]+" +
                      shape_str(arch.input_shape));
  }
  Var h = x;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const std::string prefix = layer_name(i);
    try {
      h = std::visit(
          overloaded{
              [&](const Conv2dSpec& c) {
                return layer::conv(g, model, prefix, h, {c.stride, c.padding}, c.bias);
              },
              [&](const ConvTranspose2dSpec& c) {
                return layer::conv_transpose(g, model, prefix, h, {c.stride, c.padding}, c.bias);
              },
              [&](const BatchNormSpec& b) { return layer::batch_norm(g, model, prefix, h, b, opts); },
              [&](const LeakyReLUSpec& l) { return leaky_relu(h, l.slope); },
              [&](const ReLUSpec&) { return relu(h); },
              [&](const TanhSpec&) { return tanh(h); },
              [&](const SigmoidSpec&) { return sigmoid(h); },
              [&](const DropoutSpec& d) {
                if (opts.mode == Mode::Eval || d.p == 0.0f) return h;
                return dropout(h, d.p, mix_seed(opts.dropout_seed, i));
              },
          },
          arch.layers[i]);
    } catch (const ContractViolation& e) {
      throw ConfigError("layer " + prefix + " (" + layer_kind(arch.layers[i]) + "): " + e.what());
    } catch (const std::out_of_range& e) {
      throw ConfigError("layer " + prefix + " (" + layer_kind(arch.layers[i]) +
                        "): missing parameter: " + e.what());
    }
  }
  return h;
}

Tensor forward(const ModelParameters& model, const SequentialArch& arch, const Tensor& x) {
  Graph g;
  return forward(g, model, arch, g.constant(x)).value();
}

}  // namespace hfadapt
