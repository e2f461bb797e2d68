#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scenefield/types.hpp"

namespace scenefield {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB PNG. Colors are clamped to [0,1] and rounded to the nearest 1/255.
[[nodiscard]] Bytes encode_png(const RgbImage& image);
[[nodiscard]] RgbImage decode_png(std::span<const std::uint8_t> data);
void write_png(const std::filesystem::path& path, const RgbImage& image);
[[nodiscard]] RgbImage read_png(const std::filesystem::path& path);

/// 1-bit grayscale PNG, white = set.
[[nodiscard]] Bytes encode_mask_png(const BoolArray& mask, int width, int height);
[[nodiscard]] BoolArray decode_mask_png(std::span<const std::uint8_t> data, int* width = nullptr,
                                        int* height = nullptr);
void write_mask_png(const std::filesystem::path& path, const BoolArray& mask, int width, int height);
[[nodiscard]] BoolArray read_mask_png(const std::filesystem::path& path, int* width = nullptr,
                                      int* height = nullptr);

/// Single-channel little-endian float PFM, rows stored bottom to top. Invalid pixels are written
/// as 0 and read back as invalid, so values round-trip exactly after rounding to float.
[[nodiscard]] Bytes encode_pfm(const DepthMap& depth);
[[nodiscard]] DepthMap decode_pfm(std::span<const std::uint8_t> data);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
[[nodiscard]] DepthMap read_pfm(const std::filesystem::path& path);

/// Rounds every valid depth to the nearest float, the precision depth files store.
[[nodiscard]] DepthMap round_to_float(const DepthMap& depth);

[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> data);
[[nodiscard]] Bytes base64_decode(std::string_view text);

[[nodiscard]] std::string sha256_hex(std::span<const std::uint8_t> data);

[[nodiscard]] Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void atomic_write(const std::filesystem::path& path, std::string_view text);

}  // namespace scenefield
