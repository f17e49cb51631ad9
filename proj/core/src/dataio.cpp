#include "hfadapt/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "hfadapt/checkpoint.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/rng.hpp"

namespace hfadapt {

RawDataset filter_class(const RawDataset& ds, int class_id) {
  if (class_id < 0 || class_id > 9) throw ConfigError("class id must be in 0..9");
  RawDataset out;
  out.source = ds.source;
  out.rows = ds.rows;
  out.cols = ds.cols;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    if (ds.labels[i] != class_id) continue;
    auto img = ds.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(ds.labels[i]);
    out.ids.push_back(ds.ids[i]);
  }
  if (out.count() == 0) {
    throw EmptyDatasetError("no samples of class " + std::to_string(class_id) + " in " + ds.source);
  }
  return out;
}

void NoiseSpec::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(density)) throw ConfigError("noise density must be in [0,1]");
  if (!unit(salt_fraction)) throw ConfigError("noise salt_fraction must be in [0,1]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be >= 0");
}

Tensor synthesize_noise(const Tensor& clean, const NoiseSpec& spec, std::uint64_t sample_id) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, sample_id));
  Tensor out = clean;
  // Impulse pass: one uniform per pixel, plus one more for the polarity of
  // each replaced pixel.
  for (float& v : out.values()) {
    if (rng.uniform() < spec.density) v = rng.uniform() < spec.salt_fraction ? 1.0f : 0.0f;
  }
  if (spec.sigma > 0.0) {
    for (float& v : out.values()) {
      const double noisy = static_cast<double>(v) + spec.sigma * rng.normal();
      v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
  }
  return out;
}

namespace {

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

// Per output coordinate: 4 source indices (edge-replicated) and weights.
struct Taps {
  std::vector<std::array<std::size_t, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

Taps make_taps(std::size_t in, std::size_t out) {
  Taps taps;
  taps.index.resize(out);
  taps.weight.resize(out);
  const double scale = out > 1 ? static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
  for (std::size_t o = 0; o < out; ++o) {
    const double src = static_cast<double>(o) * scale;
    const double base = std::floor(src);
    const double frac = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(base) + k - 1;
      taps.index[o][k] = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(in) - 1));
      taps.weight[o][k] = cubic_weight(frac - (k - 1));
    }
  }
  return taps;
}

}  // namespace

Tensor resize_bicubic(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  const bool has_channel = image.rank() == 3;
  if (!(image.rank() == 2 || (has_channel && image.dim(0) == 1))) {
    throw ContractViolation("resize expects [H, W] or [1, H, W], got " + shape_str(image.shape()));
  }
  const std::size_t in_h = image.dim(image.rank() - 2);
  const std::size_t in_w = image.dim(image.rank() - 1);
  if (out_h == 0 || out_w == 0) throw ContractViolation("resize to an empty image");
  if (in_h == out_h && in_w == out_w) return image;

  const Taps th = make_taps(in_h, out_h);
  const Taps tw = make_taps(in_w, out_w);
  // Separable: rows first into a double buffer, then columns.
  std::vector<double> tmp(in_h * out_w);
  for (std::size_t r = 0; r < in_h; ++r) {
    for (std::size_t c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += tw.weight[c][k] * image[r * in_w + tw.index[c][k]];
      tmp[r * out_w + c] = acc;
    }
  }
  Tensor out(has_channel ? Shape{1, out_h, out_w} : Shape{out_h, out_w});
  for (std::size_t r = 0; r < out_h; ++r) {
    for (std::size_t c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += th.weight[r][k] * tmp[th.index[r][k] * out_w + c];
      out[r * out_w + c] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

Tensor clean_image(const RawDataset& ds, std::size_t pos, std::size_t target_size) {
  if (target_size < ds.rows || target_size < ds.cols) {
    throw ConfigError("target size " + std::to_string(target_size) + " is below native " +
                      std::to_string(ds.rows) + "x" + std::to_string(ds.cols));
  }
  auto img = ds.image(pos);
  Tensor t({1, ds.rows, ds.cols});
  for (std::size_t i = 0; i < img.size(); ++i) t[i] = static_cast<float>(img[i]) / 255.0f;
  return resize_bicubic(t, target_size, target_size);
}

std::vector<PairedSample> make_pairs(const RawDataset& ds, const NoiseSpec& spec,
                                     std::size_t target_size, Domain domain,
                                     std::span<const std::uint64_t> ids) {
  spec.validate();
  std::vector<std::size_t> positions;
  if (ids.empty()) {
    positions.resize(ds.count());
    for (std::size_t i = 0; i < ds.count(); ++i) positions[i] = i;
  } else {
    std::unordered_map<std::uint64_t, std::size_t> where;
    for (std::size_t i = 0; i < ds.count(); ++i) where.emplace(ds.ids[i], i);
    for (auto id : ids) {
      auto it = where.find(id);
      if (it == where.end()) throw ContractViolation("sample id " + std::to_string(id) + " not in " + ds.source);
      positions.push_back(it->second);
    }
  }
  std::vector<PairedSample> out;
  out.reserve(positions.size());
  for (auto pos : positions) {
    PairedSample p;
    p.id = ds.ids[pos];
    p.x = clean_image(ds, pos, target_size);
    p.z = synthesize_noise(p.x, spec, p.id);
    p.domain = domain;
    p.class_id = ds.labels[pos];
    out.push_back(std::move(p));
  }
  return out;
}

DatasetSplit split(const RawDataset& ds, std::size_t train_n, std::size_t val_n, std::uint64_t seed) {
  if (train_n + val_n > ds.count()) {
    throw EmptyDatasetError("split needs " + std::to_string(train_n + val_n) + " samples, " +
                            ds.source + " has " + std::to_string(ds.count()));
  }
  const auto order = permutation(ds.count(), seed);
  DatasetSplit s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto id = ds.ids[order[i]];
    if (i < train_n) s.train.push_back(id);
    else if (i < train_n + val_n) s.val.push_back(id);
    else s.test.push_back(id);
  }
  return s;
}

namespace {
Tensor stack_field(std::span<const PairedSample> samples, std::span<const std::size_t> order,
                   bool noisy) {
  if (order.empty()) throw ContractViolation("empty batch");
  for (auto i : order) {
    if (i >= samples.size()) throw ContractViolation("batch index out of range");
  }
  const Tensor& first = noisy ? samples[order[0]].z : samples[order[0]].x;
  Shape shape{order.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const std::size_t per = first.numel();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Tensor& t = noisy ? samples[order[i]].z : samples[order[i]].x;
    if (t.numel() != per) throw ContractViolation("batch mixes image sizes");
    std::copy_n(t.data(), per, out.data() + i * per);
  }
  return out;
}
}  // namespace

Tensor stack_noisy(std::span<const PairedSample> samples, std::span<const std::size_t> order) {
  return stack_field(samples, order, true);
}

Tensor stack_clean(std::span<const PairedSample> samples, std::span<const std::size_t> order) {
  return stack_field(samples, order, false);
}

void save_pairs(const std::vector<PairedSample>& pairs, const std::filesystem::path& path) {
  ModelParameters store;
  for (const auto& p : pairs) {
    store.add("z/" + std::to_string(p.id), p.z);
    store.add("x/" + std::to_string(p.id), p.x);
  }
  save_checkpoint(store, path);
}

std::vector<PairedSample> load_pairs(const std::filesystem::path& path, Domain domain) {
  const ModelParameters store = load_checkpoint(path);
  std::vector<PairedSample> out;
  for (const auto& e : store.entries()) {
    if (!e.name.starts_with("z/")) continue;
    const std::string id = e.name.substr(2);
    if (!store.contains("x/" + id)) throw ValidationError("pair cache lacks x/" + id);
    PairedSample p;
    p.id = std::stoull(id);
    p.z = e.value;
    p.x = store.at("x/" + id);
    p.domain = domain;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hfadapt
