#include "hfadapt/image_codec.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>

#include "hfadapt/error.hpp"

namespace hfadapt {

std::vector<unsigned char> encode_png(const Tensor& image) {
  std::size_t h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && image.dim(0) == 1) {
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw ContractViolation("encode_png expects one channel, got " + shape_str(image.shape()));
  }
  std::vector<unsigned char> pixels(h * w);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("PNG sizing failed: ") + img.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("PNG encoding failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Tensor decode_png(std::span<const unsigned char> bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw ParseError(std::string("not a PNG: ") + img.message, 0);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ParseError(std::string("PNG decoding failed: ") + img.message, 0);
  }
  Tensor t({1, img.height, img.width});
  for (std::size_t i = 0; i < pixels.size(); ++i) t[i] = static_cast<float>(pixels[i]) / 255.0f;
  return t;
}

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4", text.size());
  std::vector<unsigned char> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64", 0);
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace hfadapt
