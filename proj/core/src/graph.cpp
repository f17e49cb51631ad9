#include "hfadapt/graph.hpp"

#include <algorithm>
#include <cmath>

#include "hfadapt/error.hpp"
#include "hfadapt/ops.hpp"
#include "hfadapt/rng.hpp"

namespace hfadapt {

const Tensor& Var::value() const {
  if (!graph_) throw ContractViolation("use of an unbound Var");
  return graph_->value(*this);
}

Var Graph::push(Tensor value, bool requires_grad, BackwardFn fn) {
  if (backward_done_) throw ContractViolation("cannot record onto a graph after backward()");
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, false, std::move(fn)});
  return Var(this, id);
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Graph::variable(Tensor value) { return push(std::move(value), true, nullptr); }

Var Graph::parameter(const ModelParameters& model, std::string_view name) {
  auto key = std::make_pair(&model, std::string(name));
  if (auto it = bindings_.find(key); it != bindings_.end()) return Var(this, it->second);
  const ParamEntry& e = model.entry(name);
  Var v = push(e.value, e.trainable && !model.frozen(), nullptr);
  bindings_.emplace(std::move(key), v.id());
  return v;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.graph_ != this) throw ContractViolation("op mixes Vars from different graphs");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  if (!value.all_finite()) {
    // Surface the problem where it happens rather than at the loss.
    throw DivergenceError("non-finite value produced on the graph (node " +
                          std::to_string(nodes_.size()) + ")");
  }
  return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.has_grad ? &n.grad : nullptr;
}

Tensor& Graph::grad_buffer(Var target) {
  Node& n = nodes_.at(target.id());
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0f);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(Var target, const Tensor& g) {
  if (!nodes_.at(target.id()).requires_grad) return;
  Tensor& buf = grad_buffer(target);
  if (buf.numel() != g.numel()) {
    throw ContractViolation("gradient shape " + shape_str(g.shape()) + " for value " +
                            shape_str(buf.shape()));
  }
  float* dst = buf.data();
  const float* src = g.data();
  for (std::size_t i = 0; i < buf.numel(); ++i) dst[i] += src[i];
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ContractViolation("loss belongs to another graph");
  if (backward_done_) throw ContractViolation("backward() already ran on this graph");
  const Node& root = nodes_.at(loss.id());
  if (root.value.numel() != 1) {
    throw ContractViolation("backward() needs a scalar loss, got shape " +
                            shape_str(root.value.shape()));
  }
  backward_done_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss).fill(1.0f);
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

GradientMap Graph::gradients(const ModelParameters& model) const {
  GradientMap out;
  if (model.frozen()) return out;
  for (const auto& e : model.entries()) {
    if (!e.trainable) continue;
    auto it = bindings_.find(std::make_pair(&model, e.name));
    const Tensor* g = it == bindings_.end() ? nullptr : grad(Var(const_cast<Graph*>(this), it->second));
    out.emplace(e.name, g ? *g : Tensor(e.value.shape(), 0.0f));
  }
  return out;
}

GradientMap backward(Var loss, const ModelParameters& model) {
  loss.graph().backward(loss);
  return loss.graph().gradients(model);
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = f(src[i]);
  return out;
}

// Unary op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
  Graph& g = x.graph();
  Tensor out = map_values(x.value(), fwd);
  return g.record(std::move(out), {x}, [x, deriv](Graph& gr, const Tensor& dy) {
    const Tensor& in = gr.value(x);
    Tensor dx(in.shape());
    const float* iv = in.data();
    const float* gy = dy.data();
    float* gx = dx.data();
    for (std::size_t i = 0; i < in.numel(); ++i) gx[i] = gy[i] * deriv(iv[i]);
    gr.accumulate(x, dx);
  });
}

}  // namespace

Var operator+(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dy) {
    g.accumulate(a, dy);
    g.accumulate(b, dy);
  });
}

Var operator-(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dy) {
    g.accumulate(a, dy);
    if (g.requires_grad(b)) g.accumulate(b, map_values(dy, [](float v) { return -v; }));
  });
}

Var operator*(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dy) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.requires_grad(a)) {
      Tensor da(av.shape());
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] = dy[i] * bv[i];
      g.accumulate(a, da);
    }
    if (g.requires_grad(b)) {
      Tensor db(bv.shape());
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] = dy[i] * av[i];
      g.accumulate(b, db);
    }
  });
}

Var operator*(Var a, float s) {
  return a.graph().record(map_values(a.value(), [s](float v) { return v * s; }), {a},
                          [a, s](Graph& g, const Tensor& dy) {
                            g.accumulate(a, map_values(dy, [s](float v) { return v * s; }));
                          });
}

Var operator*(float s, Var a) { return a * s; }

Var operator+(Var a, float s) {
  return a.graph().record(map_values(a.value(), [s](float v) { return v + s; }), {a},
                          [a](Graph& g, const Tensor& dy) { g.accumulate(a, dy); });
}

Var operator-(float s, Var a) {
  return a.graph().record(map_values(a.value(), [s](float v) { return s - v; }), {a},
                          [a](Graph& g, const Tensor& dy) {
                            g.accumulate(a, map_values(dy, [](float v) { return -v; }));
                          });
}

Var operator-(Var a) { return a * -1.0f; }

Var abs(Var x) {
  return unary(
      x, [](float v) { return std::fabs(v); },
      [](float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Var log_clamped(Var x, float lo, float hi) {
  return unary(
      x, [lo, hi](float v) { return std::log(std::clamp(v, lo, hi)); },
      [lo, hi](float v) { return (v > lo && v < hi) ? 1.0f / v : 0.0f; });
}

Var leaky_relu(Var x, float slope) {
  return unary(
      x, [slope](float v) { return v > 0.0f ? v : slope * v; },
      [slope](float v) { return v > 0.0f ? 1.0f : slope; });
}

Var relu(Var x) {
  return unary(
      x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v) { return v > 0.0f ? 1.0f : 0.0f; });
}

namespace {
float sigmoid_value(float v) {
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}
}  // namespace

Var tanh(Var x) {
  return unary(
      x, [](float v) { return std::tanh(v); },
      [](float v) {
        const float t = std::tanh(v);
        return 1.0f - t * t;
      });
}

Var sigmoid(Var x) {
  return unary(x, sigmoid_value, [](float v) {
    const float s = sigmoid_value(v);
    return s * (1.0f - s);
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (float v : x.value().values()) acc += v;
  return x.graph().record(Tensor::scalar(static_cast<float>(acc)), {x},
                          [x](Graph& g, const Tensor& dy) {
                            g.accumulate(x, Tensor(g.value(x).shape(), dy[0]));
                          });
}

Var mean(Var x) {
  const auto n = x.value().numel();
  double acc = 0.0;
  for (float v : x.value().values()) acc += v;
  return x.graph().record(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))), {x},
                          [x, n](Graph& g, const Tensor& dy) {
                            g.accumulate(x, Tensor(g.value(x).shape(),
                                                   dy[0] / static_cast<float>(n)));
                          });
}

Var mean_per_sample(Var x) {
  const Tensor& v = x.value();
  if (v.rank() < 2) throw ContractViolation("mean_per_sample needs rank >= 2");
  const std::size_t batch = v.dim(0);
  const std::size_t per = v.numel() / batch;
  Tensor out({batch});
  for (std::size_t n = 0; n < batch; ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per; ++i) acc += v[n * per + i];
    out[n] = static_cast<float>(acc / static_cast<double>(per));
  }
  return x.graph().record(std::move(out), {x}, [x, batch, per](Graph& g, const Tensor& dy) {
    Tensor dx(g.value(x).shape());
    for (std::size_t n = 0; n < batch; ++n) {
      const float gv = dy[n] / static_cast<float>(per);
      std::fill_n(dx.data() + n * per, per, gv);
    }
    g.accumulate(x, dx);
  });
}

Var detach(Var x) { return x.graph().constant(x.value()); }

Var concat_channels(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 4 || bv.rank() != 4 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) ||
      av.dim(3) != bv.dim(3)) {
    throw ContractViolation("concat_channels: incompatible " + shape_str(av.shape()) + " and " +
                            shape_str(bv.shape()));
  }
  const std::size_t n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const std::size_t plane = av.dim(2) * av.dim(3);
  Tensor out({n, ca + cb, av.dim(2), av.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(bv.data() + i * cb * plane, cb * plane,
                out.data() + i * (ca + cb) * plane + ca * plane);
  }
  return a.graph().record(std::move(out), {a, b},
                          [a, b, n, ca, cb, plane](Graph& g, const Tensor& dy) {
                            if (g.requires_grad(a)) {
                              Tensor da(g.value(a).shape());
                              for (std::size_t i = 0; i < n; ++i)
                                std::copy_n(dy.data() + i * (ca + cb) * plane, ca * plane,
                                            da.data() + i * ca * plane);
                              g.accumulate(a, da);
                            }
                            if (g.requires_grad(b)) {
                              Tensor db(g.value(b).shape());
                              for (std::size_t i = 0; i < n; ++i)
                                std::copy_n(dy.data() + i * (ca + cb) * plane + ca * plane,
                                            cb * plane, db.data() + i * cb * plane);
                              g.accumulate(b, db);
                            }
                          });
}

Tensor dropout_mask(const Shape& shape, float p, std::uint64_t seed) {
  if (!(p >= 0.0f && p < 1.0f)) throw ContractViolation("dropout probability must be in [0,1)");
  Tensor mask(shape);
  Rng rng(seed);
  const float keep_scale = 1.0f / (1.0f - p);
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    mask[i] = rng.uniform() < static_cast<double>(p) ? 0.0f : keep_scale;
  }
  return mask;
}

Var dropout(Var x, float p, std::uint64_t seed) {
  Var mask = x.graph().constant(dropout_mask(x.shape(), p, seed));
  return x * mask;
}

// ---------------------------------------------------------------------------
// Batch normalisation over (N, H, W) per channel.

namespace {
struct ChannelLayout {
  std::size_t n, c, plane;
};

ChannelLayout layout_of(const Tensor& x) {
  if (x.rank() != 4) throw ContractViolation("batch norm expects NCHW, got " + shape_str(x.shape()));
  return {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
}

void check_channel_param(const Tensor& t, std::size_t c, const char* what) {
  if (t.numel() != c) {
    throw ContractViolation(std::string("batch norm ") + what + " has " +
                            std::to_string(t.numel()) + " values for " + std::to_string(c) +
                            " channels");
  }
}
}  // namespace

Var batch_norm_train(Var x, Var gamma, Var beta, float eps, BatchStats* stats) {
  const Tensor& xv = x.value();
  const auto [n, c, plane] = layout_of(xv);
  check_channel_param(gamma.value(), c, "gamma");
  check_channel_param(beta.value(), c, "beta");
  const double count = static_cast<double>(n * plane);

  Tensor mean_t({c}), var_t({c});
  Tensor xhat(xv.shape()), out(xv.shape());
  std::vector<float> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = xv.data() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) s += p[k];
    }
    const double mu = s / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = xv.data() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const double d = p[k] - mu;
        sq += d * d;
      }
    }
    const double var = sq / count;
    mean_t[ch] = static_cast<float>(mu);
    var_t[ch] = static_cast<float>(var);
    inv_std[ch] = static_cast<float>(1.0 / std::sqrt(var + eps));
    const float gm = gamma.value()[ch], bt = beta.value()[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const float h = (xv[off + k] - mean_t[ch]) * inv_std[ch];
        xhat[off + k] = h;
        out[off + k] = gm * h + bt;
      }
    }
  }
  if (stats) *stats = BatchStats{mean_t, var_t};

  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, plane,
       count](Graph& g, const Tensor& dy) {
        Tensor dgamma({c}), dbeta({c});
        Tensor dx(g.value(x).shape());
        const Tensor& gm = g.value(gamma);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
              sum_dy += dy[off + k];
              sum_dy_xhat += static_cast<double>(dy[off + k]) * xhat[off + k];
            }
          }
          dgamma[ch] = static_cast<float>(sum_dy_xhat);
          dbeta[ch] = static_cast<float>(sum_dy);
          if (g.requires_grad(x)) {
            // dx = gamma * inv_std / M * (M*dy - sum(dy) - xhat * sum(dy*xhat))
            const double scale = gm[ch] * inv_std[ch] / count;
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t off = (i * c + ch) * plane;
              for (std::size_t k = 0; k < plane; ++k) {
                dx[off + k] = static_cast<float>(
                    scale * (count * dy[off + k] - sum_dy - xhat[off + k] * sum_dy_xhat));
              }
            }
          }
        }
        g.accumulate(x, dx);
        g.accumulate(gamma, dgamma);
        g.accumulate(beta, dbeta);
      });
}

Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, float eps) {
  const Tensor& xv = x.value();
  const auto [n, c, plane] = layout_of(xv);
  check_channel_param(gamma.value(), c, "gamma");
  check_channel_param(beta.value(), c, "beta");
  check_channel_param(running_mean, c, "running_mean");
  check_channel_param(running_var, c, "running_var");

  std::vector<float> inv_std(c);
  Tensor xhat(xv.shape()), out(xv.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    inv_std[ch] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(running_var[ch]) + eps));
    const float gm = gamma.value()[ch], bt = beta.value()[ch], mu = running_mean[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const float h = (xv[off + k] - mu) * inv_std[ch];
        xhat[off + k] = h;
        out[off + k] = gm * h + bt;
      }
    }
  }
  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c,
       plane](Graph& g, const Tensor& dy) {
        Tensor dgamma({c}), dbeta({c});
        Tensor dx(g.value(x).shape());
        const Tensor& gm = g.value(gamma);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sb = 0.0;
          const float scale = gm[ch] * inv_std[ch];
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
              sg += static_cast<double>(dy[off + k]) * xhat[off + k];
              sb += dy[off + k];
              dx[off + k] = dy[off + k] * scale;
            }
          }
          dgamma[ch] = static_cast<float>(sg);
          dbeta[ch] = static_cast<float>(sb);
        }
        g.accumulate(x, dx);
        g.accumulate(gamma, dgamma);
        g.accumulate(beta, dbeta);
      });
}

}  // namespace hfadapt
