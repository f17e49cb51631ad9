#include "hfadapt/models.hpp"

#include <algorithm>

#include "hfadapt/error.hpp"

namespace hfadapt {

namespace {

constexpr float kSlope = 0.2f;
const BatchNormSpec kNorm{};

std::size_t stage_channels(const ArchitectureConfig& cfg, std::size_t stage) {
  return cfg.base_width << (stage - 1);
}

std::string enc(std::size_t i) { return "enc" + std::to_string(i); }
std::string dec(std::size_t i) { return "dec" + std::to_string(i); }

// Stride-2 layers of the critic before its two stride-1 convs.
std::size_t critic_downsamples(const ArchitectureConfig& cfg) {
  return std::max<std::size_t>(1, cfg.depth - 1);
}

Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end) {
  Shape s = t.shape();
  const std::size_t per = t.numel() / s[0];
  s[0] = end - begin;
  return Tensor(s, std::vector<float>(t.data() + begin * per, t.data() + end * per));
}

void check_images(const Tensor& t, const ArchitectureConfig& cfg, const char* what) {
  if (t.rank() != 4 || t.dim(1) != 1 || t.dim(2) != cfg.resolution || t.dim(3) != cfg.resolution) {
    throw ConfigError(std::string(what) + " must be [N,1," + std::to_string(cfg.resolution) + "," +
                      std::to_string(cfg.resolution) + "], got " + shape_str(t.shape()));
  }
}

}  // namespace

void ArchitectureConfig::validate() const {
  if (depth < 1) throw ConfigError("arch.depth must be >= 1");
  if (depth > 10) throw ConfigError("arch.depth must be <= 10");
  if (base_width < 4) throw ConfigError("arch.base_width must be >= 4");
  if (resolution == 0 || resolution % (std::size_t{1} << depth) != 0) {
    throw ConfigError("arch.resolution " + std::to_string(resolution) +
                      " is not divisible by 2^depth = " + std::to_string(1u << depth));
  }
  const std::size_t grid = resolution >> critic_downsamples(*this);
  if (grid < 3) {
    throw ConfigError("arch.resolution " + std::to_string(resolution) +
                      " leaves a critic grid below 3x3 at depth " + std::to_string(depth));
  }
}

ModelParameters build_generator(const ArchitectureConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParameters p;
  Rng rng(seed);
  const std::size_t d = cfg.depth;
  for (std::size_t i = 1; i <= d; ++i) {
    const std::size_t in = i == 1 ? 1 : stage_channels(cfg, i - 1);
    const bool plain = i == 1 || i == d;  // outermost and innermost: bias, no norm
    layer::add_conv(p, enc(i), in, stage_channels(cfg, i), 4, plain, false, rng);
    if (!plain) layer::add_batch_norm(p, enc(i) + ".bn", stage_channels(cfg, i), rng);
  }
  for (std::size_t i = d; i >= 1; --i) {
    const std::size_t in = i == d ? stage_channels(cfg, d) : 2 * stage_channels(cfg, i);
    if (i == 1) {
      layer::add_conv(p, dec(1), in, 1, 4, true, true, rng);
    } else {
      layer::add_conv(p, dec(i), in, stage_channels(cfg, i - 1), 4, false, true, rng);
      layer::add_batch_norm(p, dec(i) + ".bn", stage_channels(cfg, i - 1), rng);
    }
  }
  return p;
}

Var generator_forward(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg, Var z,
                      const ForwardOptions& opts) {
  check_images(z.value(), cfg, "generator input");
  const ConvGeometry down{2, 1};
  const std::size_t d = cfg.depth;
  std::vector<Var> e(d + 1);
  for (std::size_t i = 1; i <= d; ++i) {
    Var in = i == 1 ? z : leaky_relu(e[i - 1], kSlope);
    const bool plain = i == 1 || i == d;
    e[i] = layer::conv(g, params, enc(i), in, down, plain);
    if (!plain) e[i] = layer::batch_norm(g, params, enc(i) + ".bn", e[i], kNorm, opts);
  }
  Var h = e[d];
  for (std::size_t i = d; i >= 1; --i) {
    Var in = relu(i == d ? e[d] : concat_channels(h, e[i]));
    if (i == 1) {
      h = sigmoid(layer::conv_transpose(g, params, dec(1), in, down, true));
    } else {
      h = layer::conv_transpose(g, params, dec(i), in, down, false);
      h = layer::batch_norm(g, params, dec(i) + ".bn", h, kNorm, opts);
      if (cfg.use_dropout && opts.mode == Mode::Train && i + 2 >= d) {
        h = dropout(h, 0.5f, mix_seed(opts.dropout_seed, i));
      }
    }
  }
  return h;
}

Tensor generate(const ModelParameters& params, const ArchitectureConfig& cfg, const Tensor& z,
                std::size_t chunk) {
  check_images(z, cfg, "generator input");
  chunk = std::max<std::size_t>(chunk, 1);
  Tensor out(z.shape());
  const std::size_t per = z.numel() / z.dim(0);
  for (std::size_t b = 0; b < z.dim(0); b += chunk) {
    const std::size_t e = std::min(z.dim(0), b + chunk);
    Graph g;
    Var y = generator_forward(g, params, cfg, g.constant(slice_batch(z, b, e)));
    std::copy_n(y.value().data(), (e - b) * per, out.data() + b * per);
  }
  return out;
}

SequentialArch critic_arch(const ArchitectureConfig& cfg) {
  cfg.validate();
  const std::size_t w = cfg.base_width;
  const std::size_t downs = critic_downsamples(cfg);
  SequentialArch a;
  a.input_shape = {2, cfg.resolution, cfg.resolution};
  a.layers.push_back(Conv2dSpec{w, 4, 2, 1, true});
  a.layers.push_back(LeakyReLUSpec{kSlope});
  std::size_t ch = w;
  for (std::size_t i = 1; i < downs; ++i) {
    ch *= 2;
    a.layers.push_back(Conv2dSpec{ch, 4, 2, 1, false});
    a.layers.push_back(BatchNormSpec{});
    a.layers.push_back(LeakyReLUSpec{kSlope});
  }
  ch *= 2;
  a.layers.push_back(Conv2dSpec{ch, 4, 1, 1, false});
  a.layers.push_back(BatchNormSpec{});
  a.layers.push_back(LeakyReLUSpec{kSlope});
  if (cfg.patch_output) {
    a.layers.push_back(Conv2dSpec{1, 4, 1, 1, true});
  } else {
    // One valid conv spanning the whole remaining grid.
    const std::size_t grid = (cfg.resolution >> downs) - 1;
    a.layers.push_back(Conv2dSpec{1, grid, 1, 0, true});
  }
  return a;
}

ModelParameters build_critic(const ArchitectureConfig& cfg, std::uint64_t seed) {
  return init_parameters(critic_arch(cfg), seed);
}

Shape critic_grid_shape(const ArchitectureConfig& cfg) { return output_shape(critic_arch(cfg)); }

Var critic_logits(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg,
                  Var condition, Var candidate, const ForwardOptions& opts) {
  check_images(condition.value(), cfg, "critic condition");
  check_images(candidate.value(), cfg, "critic candidate");
  if (condition.shape() != candidate.shape()) throw ConfigError("critic inputs differ in shape");
  return forward(g, params, critic_arch(cfg), concat_channels(condition, candidate), opts);
}

Var critic_mean_prob(Graph& g, const ModelParameters& params, const ArchitectureConfig& cfg,
                     Var condition, Var candidate, const ForwardOptions& opts) {
  return mean_per_sample(sigmoid(critic_logits(g, params, cfg, condition, candidate, opts)));
}

Tensor critic_score(const ModelParameters& params, const ArchitectureConfig& cfg,
                    const Tensor& condition, const Tensor& candidate) {
  Graph g;
  return sigmoid(critic_logits(g, params, cfg, g.constant(condition), g.constant(candidate))).value();
}

Tensor reward_scalar(const ModelParameters& params, const ArchitectureConfig& cfg,
                     const Tensor& condition, const Tensor& candidate, std::size_t chunk) {
  check_images(condition, cfg, "critic condition");
  if (condition.shape() != candidate.shape()) throw ConfigError("critic inputs differ in shape");
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t n = condition.dim(0);
  Tensor out({n});
  for (std::size_t b = 0; b < n; b += chunk) {
    const std::size_t e = std::min(n, b + chunk);
    Graph g;
    Var r = critic_mean_prob(g, params, cfg, g.constant(slice_batch(condition, b, e)),
                             g.constant(slice_batch(candidate, b, e)));
    std::copy_n(r.value().data(), e - b, out.data() + b);
  }
  return out;
}

}  // namespace hfadapt
