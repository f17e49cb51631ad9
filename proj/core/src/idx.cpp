#include <fstream>

#include "hfadapt/checkpoint.hpp"
#include "hfadapt/dataio.hpp"
#include "hfadapt/error.hpp"

namespace hfadapt {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const unsigned char> b, std::size_t at, const char* what) {
  if (b.size() < at + 4) throw ParseError(std::string("truncated IDX header (") + what + ")", b.size());
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

}  // namespace

std::span<const std::uint8_t> RawDataset::image(std::size_t i) const {
  if (i >= count()) throw ContractViolation("image index out of range");
  return std::span<const std::uint8_t>(pixels).subspan(i * rows * cols, rows * cols);
}

RawDataset parse_idx(std::span<const unsigned char> img, std::span<const unsigned char> lab,
                     std::string source) {
  if (read_be32(img, 0, "image magic") != kImageMagic) {
    throw ParseError("image file magic is not 0x00000803", 0);
  }
  const std::uint32_t n = read_be32(img, 4, "image count");
  const std::uint32_t rows = read_be32(img, 8, "rows");
  const std::uint32_t cols = read_be32(img, 12, "cols");
  if (rows == 0 || cols == 0) throw ParseError("zero image dimension", rows == 0 ? 8 : 12);
  const std::size_t payload = std::size_t{n} * rows * cols;
  if (img.size() - 16 < payload) throw ParseError("truncated image payload", img.size());
  if (img.size() - 16 > payload) throw ParseError("trailing bytes after image payload", 16 + payload);

  if (read_be32(lab, 0, "label magic") != kLabelMagic) {
    throw ParseError("label file magic is not 0x00000801", 0);
  }
  const std::uint32_t nl = read_be32(lab, 4, "label count");
  if (nl != n) {
    throw ParseError("label count " + std::to_string(nl) + " does not match image count " +
                         std::to_string(n),
                     4);
  }
  if (lab.size() - 8 < nl) throw ParseError("truncated label payload", lab.size());
  if (lab.size() - 8 > nl) throw ParseError("trailing bytes after label payload", 8 + nl);

  RawDataset ds;
  ds.source = std::move(source);
  ds.rows = rows;
  ds.cols = cols;
  ds.pixels.assign(img.begin() + 16, img.end());
  ds.labels.assign(lab.begin() + 8, lab.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.labels[i] > 9) throw ParseError("label out of range 0..9", 8 + i);
  }
  ds.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.ids[i] = i;
  return ds;
}

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::string source) {
  if (source.empty()) source = images.stem().string();
  const auto img = read_file_bytes(images);
  const auto lab = read_file_bytes(labels);
  try {
    return parse_idx(img, lab, std::move(source));
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()) + " in " + images.filename().string() + "/" +
                         labels.filename().string(),
                     e.offset());
  }
}

void save_idx(const RawDataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  if (ds.pixels.size() != ds.count() * ds.rows * ds.cols) {
    throw ContractViolation("dataset pixel buffer does not match count x rows x cols");
  }
  std::vector<unsigned char> img;
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.count()));
  put_be32(img, static_cast<std::uint32_t>(ds.rows));
  put_be32(img, static_cast<std::uint32_t>(ds.cols));
  img.insert(img.end(), ds.pixels.begin(), ds.pixels.end());
  std::vector<unsigned char> lab;
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.count()));
  lab.insert(lab.end(), ds.labels.begin(), ds.labels.end());
  write_file_atomic(images, img);
  write_file_atomic(labels, lab);
}

}  // namespace hfadapt
