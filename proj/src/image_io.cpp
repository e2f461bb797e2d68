#include "scenefield/image_io.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace scenefield {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_fn(png_structp png, png_bytep bytes, png_size_t n) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), bytes, bytes + n);
}
void png_flush_fn(png_structp) {}

void png_read_fn(png_structp png, png_bytep bytes, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + n > cur->data.size()) png_error(png, "truncated PNG data");
  std::memcpy(bytes, cur->data.data() + cur->offset, n);
  cur->offset += n;
}

// Encodes `rows` (already packed for the given bit depth and color type).
Bytes write_png_rows(int width, int height, int bit_depth, int color_type,
                     const std::vector<Bytes>& rows) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  std::vector<png_bytep> ptrs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ptrs[i] = const_cast<png_bytep>(rows[i].data());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode: " + err);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0; // after expansion to 8-bit gray or RGB
  Bytes pixels;
};

DecodedPng read_png_rows(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw IoError("png decode: not a PNG");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{data, 0};
  DecodedPng out;
  std::vector<png_bytep> ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode: " + err);
  }
  png_set_read_fn(png, &cursor, png_read_fn);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.channels = int(png_get_channels(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * std::size_t(out.height));
  ptrs.resize(std::size_t(out.height));
  for (int y = 0; y < out.height; ++y) ptrs[std::size_t(y)] = out.pixels.data() + stride * std::size_t(y);
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::uint8_t to_byte(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Bytes encode_png(const RgbImage& image) {
  std::vector<Bytes> rows(std::size_t(image.height), Bytes(std::size_t(image.width) * 3));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) rows[std::size_t(y)][std::size_t(3 * x + c)] = to_byte(image.pixels(image.index(x, y), c));
    }
  }
  return write_png_rows(image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RgbImage decode_png(std::span<const std::uint8_t> data) {
  const DecodedPng d = read_png_rows(data);
  RgbImage img(d.width, d.height);
  for (Eigen::Index p = 0; p < img.size(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const int ch = d.channels >= 3 ? c : 0;
      img.pixels(p, c) = d.pixels[std::size_t(p * d.channels + ch)] / 255.0;
    }
  }
  return img;
}

Bytes encode_mask_png(const BoolArray& mask, int width, int height) {
  if (mask.size() != Eigen::Index(width) * height) throw std::invalid_argument("encode_mask_png: shape mismatch");
  std::vector<Bytes> rows(std::size_t(height), Bytes((std::size_t(width) + 7) / 8, 0));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[Eigen::Index(y) * width + x]) rows[std::size_t(y)][std::size_t(x / 8)] |= std::uint8_t(0x80 >> (x % 8));
    }
  }
  return write_png_rows(width, height, 1, PNG_COLOR_TYPE_GRAY, rows);
}

BoolArray decode_mask_png(std::span<const std::uint8_t> data, int* width, int* height) {
  const DecodedPng d = read_png_rows(data);
  BoolArray mask(Eigen::Index(d.width) * d.height);
  for (Eigen::Index p = 0; p < mask.size(); ++p) mask[p] = d.pixels[std::size_t(p * d.channels)] >= 128;
  if (width) *width = d.width;
  if (height) *height = d.height;
  return mask;
}

Bytes encode_pfm(const DepthMap& depth) {
  std::ostringstream header;
  header << "Pf\n" << depth.width << ' ' << depth.height << "\n-1.0\n";
  const std::string h = header.str();
  Bytes out(h.begin(), h.end());
  out.reserve(out.size() + std::size_t(depth.size()) * 4);
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const Eigen::Index p = depth.index(x, y);
      const float v = depth.valid[p] ? float(depth.values[p]) : 0.0f;
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t(bits >> (8 * b)));
    }
  }
  return out;
}

DepthMap decode_pfm(std::span<const std::uint8_t> data) {
  // Header: "Pf", width, height and scale as text, then one whitespace byte before the data.
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size() && std::isspace(data[pos])) ++pos;
    std::string t;
    while (pos < data.size() && !std::isspace(data[pos])) t.push_back(char(data[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "Pf") throw IoError("pfm: expected single-channel 'Pf' header");
  int w = 0;
  int h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw IoError("pfm: malformed header");
  }
  ++pos; // single whitespace byte after the scale
  if (w <= 0 || h <= 0 || scale == 0.0) throw IoError("pfm: bad dimensions or scale");
  if (data.size() < pos + std::size_t(w) * std::size_t(h) * 4) throw IoError("pfm: truncated data");
  const bool little = scale < 0.0;
  DepthMap depth(w, h);
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* b = data.data() + pos + (std::size_t(row) * std::size_t(w) + std::size_t(x)) * 4;
      const std::uint32_t bits = little ? (std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                                           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24)
                                        : (std::uint32_t(b[3]) | std::uint32_t(b[2]) << 8 |
                                           std::uint32_t(b[1]) << 16 | std::uint32_t(b[0]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (std::isfinite(v) && v > 0.0f) depth.set(depth.index(x, y), double(v));
    }
  }
  return depth;
}

DepthMap round_to_float(const DepthMap& depth) {
  DepthMap out = depth;
  for (Eigen::Index p = 0; p < out.size(); ++p) {
    if (!out.valid[p]) continue;
    const float f = float(out.values[p]);
    if (f > 0.0f) out.values[p] = double(f);
    else out.invalidate(p);
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), int(data.size()));
  out.resize(std::size_t(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw IoError("base64: length is not a multiple of 4");
  Bytes out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), int(text.size()));
  if (n < 0) throw IoError("base64: invalid input");
  std::size_t len = std::size_t(n);
  // EVP_DecodeBlock keeps the zero bytes produced by padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256: digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write(const std::filesystem::path& path, std::string_view text) {
  atomic_write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_png(const std::filesystem::path& path, const RgbImage& image) { atomic_write(path, encode_png(image)); }
RgbImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void write_mask_png(const std::filesystem::path& path, const BoolArray& mask, int width, int height) {
  atomic_write(path, encode_mask_png(mask, width, height));
}
BoolArray read_mask_png(const std::filesystem::path& path, int* width, int* height) {
  return decode_mask_png(read_file(path), width, height);
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) { atomic_write(path, encode_pfm(depth)); }
DepthMap read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

}  // namespace scenefield
