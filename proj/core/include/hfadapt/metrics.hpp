#pragma once

#include <span>
#include <vector>

#include "hfadapt/tensor.hpp"

namespace hfadapt {

// 10 log10(peak^2 / MSE) in double precision; +infinity when MSE is 0.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

// Mean SSIM over every valid window position of a single-channel image
// ([H, W] or [1, H, W]). Exactly symmetric in its arguments.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});

// Per-sample metrics over [N, 1, H, W] batches.
std::vector<double> psnr_batch(const Tensor& a, const Tensor& b);
std::vector<double> ssim_batch(const Tensor& a, const Tensor& b);

struct Stats {
  std::size_t n = 0;          // finite values used
  double mean = 0.0;
  double stddev = 0.0;        // sample standard deviation (0 when n < 2)
  std::size_t inf_count = 0;  // +/-infinity values excluded
};

// Order-independent: values are sorted, then summed pairwise.
Stats describe(std::span<const double> values);
double pairwise_sum(std::span<const double> sorted_values);

}  // namespace hfadapt
