#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "hfadapt/error.hpp"
#include "hfadapt/ops.hpp"

namespace hfadapt {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Grid {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
};

Grid grid_of(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw ContractViolation(std::string(what) + " expects NCHW, got " + shape_str(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Image [N, C, H, W] -> columns [C*k*k, N*Ho*Wo]; out-of-range taps read zero.
void im2col(const float* img, const Grid& g, std::size_t k, ConvGeometry geom, std::size_t ho,
            std::size_t wo, float* col) {
  const std::size_t cols = g.n * ho * wo;
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        float* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const float* src = img + (n * g.c + c) * g.plane();
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * geom.stride + ki) - pad;
            float* dst = row + (n * ho + oh) * wo;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill_n(dst, wo, 0.0f);
              continue;
            }
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * geom.stride + kj) - pad;
              dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w))
                            ? 0.0f
                            : src[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into a zeroed image.
void col2im(const float* col, const Grid& g, std::size_t k, ConvGeometry geom, std::size_t ho,
            std::size_t wo, float* img) {
  const std::size_t cols = g.n * ho * wo;
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  std::fill_n(img, g.n * g.c * g.plane(), 0.0f);
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const float* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          float* dst = img + (n * g.c + c) * g.plane();
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * geom.stride + ki) - pad;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
            const float* src = row + (n * ho + oh) * wo;
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * geom.stride + kj) - pad;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) continue;
              dst[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)] += src[ow];
            }
          }
        }
      }
    }
  }
}

// NCHW -> [C, N*H*W] and back.
void to_channel_major(const float* src, const Grid& g, float* dst) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.c; ++c)
      std::copy_n(src + (n * g.c + c) * g.plane(), g.plane(),
                  dst + c * g.n * g.plane() + n * g.plane());
}

void from_channel_major(const float* src, const Grid& g, float* dst) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.c; ++c)
      std::copy_n(src + c * g.n * g.plane() + n * g.plane(), g.plane(),
                  dst + (n * g.c + c) * g.plane());
}

void add_bias(Tensor& out, const Tensor& bias) {
  const Grid g = grid_of(out, "bias");
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.c; ++c) {
      float* p = out.data() + (n * g.c + c) * g.plane();
      for (std::size_t i = 0; i < g.plane(); ++i) p[i] += bias[c];
    }
}

Tensor bias_grad(const Tensor& dy) {
  const Grid g = grid_of(dy, "bias");
  Tensor db({g.c});
  for (std::size_t c = 0; c < g.c; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) {
      const float* p = dy.data() + (n * g.c + c) * g.plane();
      for (std::size_t i = 0; i < g.plane(); ++i) acc += p[i];
    }
    db[c] = static_cast<float>(acc);
  }
  return db;
}

std::size_t check_kernel(const Tensor& w, std::size_t in_channels, bool transposed) {
  if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
    throw ContractViolation("conv weight must be [a, b, k, k], got " + shape_str(w.shape()));
  }
  const std::size_t expected_in = transposed ? w.dim(0) : w.dim(1);
  if (expected_in != in_channels) {
    throw ContractViolation("conv weight " + shape_str(w.shape()) + " does not accept " +
                            std::to_string(in_channels) + " input channels");
  }
  return w.dim(2);
}

void check_bias(const std::optional<Var>& bias, std::size_t channels) {
  if (bias && bias->value().numel() != channels) {
    throw ContractViolation("conv bias has " + std::to_string(bias->value().numel()) +
                            " values for " + std::to_string(channels) + " channels");
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvGeometry geom) {
  if (geom.stride == 0) throw ConfigError("conv stride must be positive");
  if (in + 2 * geom.padding < kernel) {
    throw ConfigError("conv kernel " + std::to_string(kernel) + " exceeds padded input " +
                      std::to_string(in + 2 * geom.padding));
  }
  return (in + 2 * geom.padding - kernel) / geom.stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, ConvGeometry geom) {
  if (geom.stride == 0) throw ConfigError("conv stride must be positive");
  const std::size_t full = (in - 1) * geom.stride + kernel;
  if (full <= 2 * geom.padding) throw ConfigError("transposed conv output would be empty");
  return full - 2 * geom.padding;
}

Var conv2d(Var x, Var weight, std::optional<Var> bias, ConvGeometry geom) {
  const Grid in = grid_of(x.value(), "conv2d");
  const Tensor& w = weight.value();
  const std::size_t k = check_kernel(w, in.c, false);
  const std::size_t out_c = w.dim(0);
  check_bias(bias, out_c);
  const std::size_t ho = conv_output_size(in.h, k, geom);
  const std::size_t wo = conv_output_size(in.w, k, geom);
  const std::size_t ckk = in.c * k * k;
  const std::size_t cols = in.n * ho * wo;

  std::vector<float> col(ckk * cols);
  im2col(x.value().data(), in, k, geom, ho, wo, col.data());
  std::vector<float> ym(out_c * cols);
  MatMap(ym.data(), out_c, cols).noalias() =
      ConstMatMap(w.data(), out_c, ckk) * ConstMatMap(col.data(), ckk, cols);

  const Grid out_grid{in.n, out_c, ho, wo};
  Tensor out({in.n, out_c, ho, wo});
  from_channel_major(ym.data(), out_grid, out.data());
  if (bias) add_bias(out, bias->value());

  Graph& g = x.graph();
  auto fn = [x, weight, bias, geom, in, k, out_grid, ckk, cols,
             col = std::move(col)](Graph& gr, const Tensor& dy) {
    const std::size_t out_c = out_grid.c;
    std::vector<float> dym(out_c * cols);
    to_channel_major(dy.data(), out_grid, dym.data());
    const ConstMatMap dy_mat(dym.data(), out_c, cols);
    if (gr.requires_grad(weight)) {
      Tensor dw(gr.value(weight).shape());
      MatMap(dw.data(), out_c, ckk).noalias() =
          dy_mat * ConstMatMap(col.data(), ckk, cols).transpose();
      gr.accumulate(weight, dw);
    }
    if (bias && gr.requires_grad(*bias)) gr.accumulate(*bias, bias_grad(dy));
    if (gr.requires_grad(x)) {
      std::vector<float> dcol(ckk * cols);
      MatMap(dcol.data(), ckk, cols).noalias() =
          ConstMatMap(gr.value(weight).data(), out_c, ckk).transpose() * dy_mat;
      Tensor dx(gr.value(x).shape());
      col2im(dcol.data(), in, k, geom, out_grid.h, out_grid.w, dx.data());
      gr.accumulate(x, dx);
    }
  };
  if (bias) return g.record(std::move(out), {x, weight, *bias}, std::move(fn));
  return g.record(std::move(out), {x, weight}, std::move(fn));
}

Var conv_transpose2d(Var x, Var weight, std::optional<Var> bias, ConvGeometry geom) {
  const Grid in = grid_of(x.value(), "conv_transpose2d");
  const Tensor& w = weight.value();
  const std::size_t k = check_kernel(w, in.c, true);
  const std::size_t out_c = w.dim(1);
  check_bias(bias, out_c);
  const std::size_t ho = conv_transpose_output_size(in.h, k, geom);
  const std::size_t wo = conv_transpose_output_size(in.w, k, geom);
  const std::size_t okk = out_c * k * k;
  const std::size_t cols = in.n * in.h * in.w;
  const Grid out_grid{in.n, out_c, ho, wo};

  // The forward pass is the adjoint of a conv from the output grid onto the
  // input grid: columns = W^T X, then scatter-add.
  std::vector<float> xm(in.c * cols);
  to_channel_major(x.value().data(), in, xm.data());
  std::vector<float> col(okk * cols);
  MatMap(col.data(), okk, cols).noalias() =
      ConstMatMap(w.data(), in.c, okk).transpose() * ConstMatMap(xm.data(), in.c, cols);
  Tensor out({in.n, out_c, ho, wo});
  col2im(col.data(), out_grid, k, geom, in.h, in.w, out.data());
  if (bias) add_bias(out, bias->value());

  Graph& g = x.graph();
  auto fn = [x, weight, bias, geom, in, k, out_grid, okk, cols,
             xm = std::move(xm)](Graph& gr, const Tensor& dy) {
    std::vector<float> dcol(okk * cols);
    im2col(dy.data(), out_grid, k, geom, in.h, in.w, dcol.data());
    const ConstMatMap dcol_mat(dcol.data(), okk, cols);
    if (gr.requires_grad(weight)) {
      Tensor dw(gr.value(weight).shape());
      MatMap(dw.data(), in.c, okk).noalias() =
          ConstMatMap(xm.data(), in.c, cols) * dcol_mat.transpose();
      gr.accumulate(weight, dw);
    }
    if (bias && gr.requires_grad(*bias)) gr.accumulate(*bias, bias_grad(dy));
    if (gr.requires_grad(x)) {
      std::vector<float> dxm(in.c * cols);
      MatMap(dxm.data(), in.c, cols).noalias() =
          ConstMatMap(gr.value(weight).data(), in.c, okk) * dcol_mat;
      Tensor dx(gr.value(x).shape());
      from_channel_major(dxm.data(), in, dx.data());
      gr.accumulate(x, dx);
    }
  };
  if (bias) return g.record(std::move(out), {x, weight, *bias}, std::move(fn));
  return g.record(std::move(out), {x, weight}, std::move(fn));
}

}  // namespace hfadapt
