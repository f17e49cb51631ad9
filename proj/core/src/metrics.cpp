#include "hfadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hfadapt/error.hpp"

namespace hfadapt {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) {
    throw ContractViolation("psnr shape mismatch: " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
  }
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::pair<std::size_t, std::size_t> plane_dims(const Tensor& t) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
  throw ContractViolation("ssim expects a single-channel image, got " + shape_str(t.shape()));
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Valid-mode separable filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& win) {
  const std::size_t k = win.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += win[j] * img[r * w + c + j];
      rows[r * ow + c] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += win[j] * rows[(r + j) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

Tensor sample(const Tensor& batch, std::size_t i) { return unstack(batch, i); }

void check_batch(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 4) {
    throw ContractViolation("metric batches must share an [N,C,H,W] shape");
  }
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimParams& p) {
  if (a.shape() != b.shape()) throw ContractViolation("ssim shape mismatch");
  const auto [h, w] = plane_dims(a);
  if (h < p.window || w < p.window) {
    throw ContractViolation("image " + shape_str(a.shape()) + " is smaller than the " +
                            std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
  }
  const auto win = gaussian_window(p.window, p.sigma);
  std::vector<double> va(a.numel()), vb(b.numel()), aa(a.numel()), bb(a.numel()), ab(a.numel());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    va[i] = a[i];
    vb[i] = b[i];
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, h, w, win);
  const auto mu_b = filter_valid(vb, h, w, win);
  const auto e_aa = filter_valid(aa, h, w, win);
  const auto e_bb = filter_valid(bb, h, w, win);
  const auto e_ab = filter_valid(ab, h, w, win);
  const double c1 = (p.k1 * p.range) * (p.k1 * p.range);
  const double c2 = (p.k2 * p.range) * (p.k2 * p.range);
  std::vector<double> local(mu_a.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    local[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  std::sort(local.begin(), local.end());
  return pairwise_sum(local) / static_cast<double>(local.size());
}

std::vector<double> psnr_batch(const Tensor& a, const Tensor& b) {
  check_batch(a, b);
  std::vector<double> out(a.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = psnr(sample(a, i), sample(b, i));
  return out;
}

std::vector<double> ssim_batch(const Tensor& a, const Tensor& b) {
  check_batch(a, b);
  std::vector<double> out(a.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ssim(sample(a, i), sample(b, i));
  return out;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

Stats describe(std::span<const double> values) {
  std::vector<double> finite;
  Stats s;
  for (double v : values) {
    if (std::isinf(v)) ++s.inf_count;
    else if (std::isnan(v)) throw ContractViolation("NaN metric value");
    else finite.push_back(v);
  }
  s.n = finite.size();
  if (s.n == 0) return s;
  std::sort(finite.begin(), finite.end());
  s.mean = pairwise_sum(finite) / static_cast<double>(s.n);
  if (s.n > 1) {
    std::vector<double> sq(finite.size());
    for (std::size_t i = 0; i < finite.size(); ++i) {
      const double d = finite[i] - s.mean;
      sq[i] = d * d;
    }
    std::sort(sq.begin(), sq.end());
    s.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace hfadapt
