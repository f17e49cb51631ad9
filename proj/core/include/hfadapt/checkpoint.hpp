#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hfadapt/params.hpp"

namespace hfadapt {

// Container layout (all integers little-endian):
//   "FFRG" | u16 version | u32 record count |
//   per record: u32 name length | name bytes | u32 rank | u32 dims[rank] |
//               f32 values[product(dims)]
// Entries whose names mark them as state buffers load as non-trainable.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<unsigned char> serialize(const ModelParameters& model);
// Throws ParseError (with byte offset) on malformed input.
ModelParameters deserialize(std::span<const unsigned char> bytes);

// Writes to a sibling temp file, then renames over `path`.
void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);
// Also checks names and shapes against `expected` (ValidationError on mismatch).
ModelParameters load_checkpoint(const std::filesystem::path& path, const ModelParameters& expected);

void validate_layout(const ModelParameters& loaded, const ModelParameters& expected);

// Whole-file helpers shared with other binary formats.
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace hfadapt
