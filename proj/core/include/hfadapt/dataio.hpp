#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfadapt/tensor.hpp"

namespace hfadapt {

/// 8-bit grayscale images with class labels, as stored in IDX files.
/// `ids[i]` is the position of image i in the file it was loaded from and
/// survives filtering, so it identifies a sample stably.
struct RawDataset {
  std::string source;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
  std::vector<std::uint8_t> labels;
  std::vector<std::uint64_t> ids;

  std::size_t count() const noexcept { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const;
};

// Parses an IDX image/label file pair (big-endian headers). Throws ParseError
// with a byte offset on bad magic, truncation or count mismatch.
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::string source = {});
RawDataset parse_idx(std::span<const unsigned char> image_bytes,
                     std::span<const unsigned char> label_bytes, std::string source = {});
void save_idx(const RawDataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels);

// Keeps samples of one class in their original order. Throws
// EmptyDatasetError when nothing matches.
RawDataset filter_class(const RawDataset& ds, int class_id);

struct NoiseSpec {
  double density = 0.05;        // probability a pixel is replaced by 0 or 1
  double salt_fraction = 0.5;   // share of replacements set to 1
  double sigma = 0.05;          // additive Gaussian std
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError if out of range
};

// Impulse replacement, then additive Gaussian, then clamp to [0,1]. The draw
// sequence depends only on (spec.seed, sample_id).
Tensor synthesize_noise(const Tensor& clean, const NoiseSpec& spec, std::uint64_t sample_id);

// Catmull-Rom bicubic (a = -0.5) with aligned corners and edge replication;
// output clamped to [0,1]. `image` is [H, W] or [1, H, W]; result keeps rank.
Tensor resize_bicubic(const Tensor& image, std::size_t out_h, std::size_t out_w);

enum class Domain { Source, Target };
const char* domain_name(Domain d);

struct PairedSample {
  std::uint64_t id = 0;
  Tensor z;  // noisy, [1, S, S]
  Tensor x;  // clean, [1, S, S]
  Domain domain = Domain::Source;
  int class_id = -1;
};

// Clean image as [1, S, S] in [0,1], resized when S differs from native.
Tensor clean_image(const RawDataset& ds, std::size_t pos, std::size_t target_size);

// One pair per requested id (all samples when `ids` is empty).
std::vector<PairedSample> make_pairs(const RawDataset& ds, const NoiseSpec& spec,
                                     std::size_t target_size, Domain domain,
                                     std::span<const std::uint64_t> ids = {});

struct DatasetSplit {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> val;
  std::vector<std::uint64_t> test;  // the remainder
};

// Seeded shuffle of the dataset ids, then partition.
DatasetSplit split(const RawDataset& ds, std::size_t train_n, std::size_t val_n, std::uint64_t seed);

// [N, 1, S, S] from the z (or x) images of `samples[order[i]]`.
Tensor stack_noisy(std::span<const PairedSample> samples, std::span<const std::size_t> order);
Tensor stack_clean(std::span<const PairedSample> samples, std::span<const std::size_t> order);

// Pair cache in the checkpoint container ("z/<id>", "x/<id>").
void save_pairs(const std::vector<PairedSample>& pairs, const std::filesystem::path& path);
std::vector<PairedSample> load_pairs(const std::filesystem::path& path, Domain domain);

}  // namespace hfadapt
