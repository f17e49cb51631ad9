#pragma once

#include <cstdint>
#include <optional>

#include "hfadapt/graph.hpp"

namespace hfadapt {

// Layouts: activations NCHW; conv weights [out, in, k, k]; transposed-conv
// weights [in, out, k, k]. Kernels are square.
struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvGeometry geom);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, ConvGeometry geom);

Var conv2d(Var x, Var weight, std::optional<Var> bias, ConvGeometry geom);
Var conv_transpose2d(Var x, Var weight, std::optional<Var> bias, ConvGeometry geom);

struct BatchStats {
  Tensor mean;      // per channel
  Tensor variance;  // per channel, biased (1/M)
};

// Normalises with the statistics of the batch itself; writes them to `stats`.
Var batch_norm_train(Var x, Var gamma, Var beta, float eps, BatchStats* stats = nullptr);
// Normalises with fixed statistics.
Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, float eps);

Var leaky_relu(Var x, float slope);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

// Concatenates two NCHW tensors along C.
Var concat_channels(Var a, Var b);

// Inverted dropout with a mask drawn from `seed`.
Var dropout(Var x, float p, std::uint64_t seed);
// The scaled keep-mask dropout() multiplies by (0 or 1/(1-p)).
Tensor dropout_mask(const Shape& shape, float p, std::uint64_t seed);

// Elementwise; operands must share a shape.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);

Var operator*(Var a, float s);
Var operator*(float s, Var a);
Var operator+(Var a, float s);
Var operator-(float s, Var a);
Var operator-(Var a);

Var abs(Var x);
// log(clamp(x, lo, hi)); zero gradient where clamped.
Var log_clamped(Var x, float lo, float hi);

Var sum(Var x);
Var mean(Var x);
// [N, ...] -> [N]: mean over every axis but the first.
Var mean_per_sample(Var x);

// Same value, recorded as a constant (blocks gradient flow).
Var detach(Var x);

}  // namespace hfadapt
