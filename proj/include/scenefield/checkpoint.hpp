#pragma once

#include <filesystem>
#include <string>

#include "scenefield/image_io.hpp"
#include "scenefield/radiance_grid.hpp"

namespace scenefield {

/// Unreadable, corrupted (hash mismatch) or unsupported checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all little-endian: magic "SFGRID\0\0", version, endianness tag 0x01020304,
/// scalar size in bytes, resolution (3 x i32), bbox min/max (6 x f64), density scale (f64),
/// parameter count (u64), raw parameters (f64, node-major [density, r, g, b]), then the SHA-256
/// of everything before it.
[[nodiscard]] Bytes encode_checkpoint(const RadianceGrid& grid);
[[nodiscard]] RadianceGrid decode_checkpoint(std::span<const std::uint8_t> data);

/// Hex SHA-256 stored in the checkpoint trailer; identical grids give identical hashes.
[[nodiscard]] std::string checkpoint_hash(const RadianceGrid& grid);

/// Writes atomically and returns the content hash.
std::string save_checkpoint(const std::filesystem::path& path, const RadianceGrid& grid);
[[nodiscard]] RadianceGrid load_checkpoint(const std::filesystem::path& path);

}  // namespace scenefield
