#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hfadapt/tensor.hpp"

namespace hfadapt {

// 8-bit grayscale PNG of an [H, W] or [1, H, W] image in [0,1]
// (values rounded to the nearest of 256 levels).
std::vector<unsigned char> encode_png(const Tensor& image);
// [1, H, W] in [0,1]; throws ParseError on malformed input.
Tensor decode_png(std::span<const unsigned char> bytes);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

}  // namespace hfadapt
