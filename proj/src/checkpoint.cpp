#include "scenefield/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace scenefield {

namespace {

constexpr char kMagic[8] = {'S', 'F', 'G', 'R', 'I', 'D', 0, 0};
constexpr std::uint32_t kEndianTag = 0x01020304;
constexpr std::size_t kDigestSize = 32;

void put_u32(Bytes& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t(v >> (8 * b)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(std::uint8_t(v >> (8 * b)));
}
void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  std::uint64_t take(int bytes) {
    if (pos + std::size_t(bytes) > data.size()) throw CheckpointError("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= std::uint64_t(data[pos + std::size_t(b)]) << (8 * b);
    pos += std::size_t(bytes);
    return v;
  }
  std::uint32_t u32() { return std::uint32_t(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }
};

Bytes digest_bytes(std::span<const std::uint8_t> data) {
  const std::string hex = sha256_hex(data);
  Bytes out(kDigestSize);
  for (std::size_t i = 0; i < kDigestSize; ++i) out[i] = std::uint8_t(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return out;
}

}  // namespace

Bytes encode_checkpoint(const RadianceGrid& grid) {
  Bytes out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_u32(out, kEndianTag);
  put_u32(out, sizeof(double));
  for (int a = 0; a < 3; ++a) put_u32(out, std::uint32_t(grid.resolution()[a]));
  for (int a = 0; a < 3; ++a) put_f64(out, grid.bbox().min()[a]);
  for (int a = 0; a < 3; ++a) put_f64(out, grid.bbox().max()[a]);
  put_f64(out, grid.density_scale());
  put_u64(out, std::uint64_t(grid.parameter_count()));
  out.reserve(out.size() + std::size_t(grid.parameter_count()) * 8 + kDigestSize);
  const double* raw = grid.raw().data();
  for (Eigen::Index k = 0; k < grid.parameter_count(); ++k) put_f64(out, raw[k]);
  const Bytes digest = digest_bytes(out);
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

RadianceGrid decode_checkpoint(std::span<const std::uint8_t> data) {
  if (data.size() < 8 + kDigestSize || std::memcmp(data.data(), kMagic, 8) != 0) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const auto body = data.first(data.size() - kDigestSize);
  const Bytes digest = digest_bytes(body);
  if (!std::equal(digest.begin(), digest.end(), data.end() - kDigestSize)) {
    throw CheckpointError("checkpoint: content hash mismatch");
  }
  Reader r{body, 8};
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  if (r.u32() != kEndianTag) throw CheckpointError("checkpoint: bad endianness tag");
  if (r.u32() != sizeof(double)) throw CheckpointError("checkpoint: unsupported scalar type");
  Vec3i res;
  for (int a = 0; a < 3; ++a) res[a] = int(r.u32());
  Vec3 lo;
  Vec3 hi;
  for (int a = 0; a < 3; ++a) lo[a] = r.f64();
  for (int a = 0; a < 3; ++a) hi[a] = r.f64();
  const double density_scale = r.f64();
  const std::uint64_t count = r.u64();
  if ((res.array() < 2).any() || count != 4ULL * std::uint64_t(res.x()) * res.y() * res.z()) {
    throw CheckpointError("checkpoint: resolution and payload size disagree");
  }
  NodeMatrix raw(4, Eigen::Index(count / 4));
  double* dst = raw.data();
  for (std::uint64_t k = 0; k < count; ++k) dst[k] = r.f64();
  if (r.pos != body.size()) throw CheckpointError("checkpoint: trailing bytes");
  return RadianceGrid(Box3(lo, hi), res, density_scale, std::move(raw));
}

std::string checkpoint_hash(const RadianceGrid& grid) {
  const Bytes data = encode_checkpoint(grid);
  std::string hex;
  static constexpr char kHex[] = "0123456789abcdef";
  for (std::size_t i = data.size() - kDigestSize; i < data.size(); ++i) {
    hex.push_back(kHex[data[i] >> 4]);
    hex.push_back(kHex[data[i] & 15]);
  }
  return hex;
}

std::string save_checkpoint(const std::filesystem::path& path, const RadianceGrid& grid) {
  const Bytes data = encode_checkpoint(grid);
  atomic_write(path, data);
  return sha256_hex(std::span<const std::uint8_t>(data).first(data.size() - kDigestSize));
}

RadianceGrid load_checkpoint(const std::filesystem::path& path) {
  Bytes data;
  try {
    data = read_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(data);
}

}  // namespace scenefield
