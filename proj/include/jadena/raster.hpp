// Copyright 2026 The Jadena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Raster types and lossless 8-bit image I/O (PNG and binary PPM). PNG and
// PPM are the only supported formats on purpose: both are lossless, so the
// bounded adversarial noise survives a save/load round trip.

#ifndef JADENA_RASTER_HPP_
#define JADENA_RASTER_HPP_

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jadena/error.hpp"

namespace jadena {

/// RGB image, channel-major (planar) layout, values in [0,1].
/// Index of (channel c, row y, column x) is (c*height + y)*width + x.
struct RasterImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static RasterImage zeros(int h, int w) {
    RasterImage img;
    img.height = h;
    img.width = w;
    img.data.assign(static_cast<size_t>(3) * h * w, 0.0);
    return img;
  }

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  bool same_shape(const RasterImage& o) const {
    return height == o.height && width == o.width;
  }
};

/// {0,1}-valued mask with the same spatial shape as its paired image.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major, values exactly 0 or 1

  static BinaryMask zeros(int h, int w) {
    BinaryMask m;
    m.height = h;
    m.width = w;
    m.data.assign(static_cast<size_t>(h) * w, 0);
    return m;
  }
  std::uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t area() const {
    size_t n = 0;
    for (auto v : data) n += v;
    return n;
  }
};

/// Continuous saliency map in [0,1], row-major.
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static SaliencyMap filled(int h, int w, double v) {
    SaliencyMap m;
    m.height = h;
    m.width = w;
    m.data.assign(static_cast<size_t>(h) * w, v);
    return m;
  }
  double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

inline void check_image(const RasterImage& img) {
  require(img.height > 0 && img.width > 0, Errc::zero_sized_image,
          "image has zero extent");
  require(img.data.size() == 3 * img.pixel_count(), Errc::shape_mismatch,
          "image buffer size does not match its dimensions");
  for (double v : img.data) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, Errc::bad_argument,
            "image values must be finite and in [0,1]");
  }
}

/// Quantize [0,1] to an 8-bit byte: round(v*255) with halves away from zero.
inline std::uint8_t quantize8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

/// Nearest-neighbour resize; used for squaring up rotated reference images.
inline RasterImage resize_nearest(const RasterImage& src, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, Errc::bad_argument, "resize target must be positive");
  RasterImage out = RasterImage::zeros(out_h, out_w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const int sy = static_cast<int>(static_cast<std::int64_t>(y) * src.height / out_h);
      for (int x = 0; x < out_w; ++x) {
        const int sx = static_cast<int>(static_cast<std::int64_t>(x) * src.width / out_w);
        out.at(c, y, x) = src.at(c, sy, sx);
      }
    }
  }
  return out;
}

namespace io_detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    fail(Errc::file_not_found, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  require(!in.bad(), Errc::io_error, "read failure: " + path.string());
  return bytes;
}

/// All file outputs go through temp-file + rename so partially written
/// artifacts are never observable.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), Errc::io_error, "cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(out.good(), Errc::io_error, "write failure: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, Errc::io_error, "rename failure: " + path.string());
}

// ---- 8-bit gray / RGB buffers shared by the codecs -------------------------

struct RawImage8 {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3, interleaved rows
  std::vector<std::uint8_t> bytes;
};

// ---- PPM (P6) ---------------------------------------------------------------

inline bool is_ppm(const std::vector<std::uint8_t>& b) {
  return b.size() >= 2 && b[0] == 'P' && b[1] == '6';
}

inline RawImage8 decode_ppm(const std::vector<std::uint8_t>& b,
                            const std::string& name) {
  size_t pos = 2;
  auto skip_space = [&] {
    while (pos < b.size()) {
      if (std::isspace(b[pos])) {
        ++pos;
      } else if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    require(pos < b.size() && std::isdigit(b[pos]), Errc::unsupported_format,
            "malformed PPM header: " + name);
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + (b[pos] - '0');
      require(v <= 1 << 24, Errc::unsupported_format, "absurd PPM dimension: " + name);
      ++pos;
    }
    return v;
  };
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  require(w > 0 && h > 0, Errc::zero_sized_image, "zero-sized PPM: " + name);
  require(maxval == 255, Errc::unsupported_format,
          "only 8-bit (maxval 255) PPM is supported: " + name);
  require(pos < b.size() && std::isspace(b[pos]), Errc::unsupported_format,
          "missing separator after PPM header: " + name);
  ++pos;  // exactly one whitespace byte before the raster
  const size_t need = static_cast<size_t>(w) * h * 3;
  require(b.size() - pos >= need, Errc::unsupported_format,
          "truncated PPM raster: " + name);
  RawImage8 raw;
  raw.height = static_cast<int>(h);
  raw.width = static_cast<int>(w);
  raw.channels = 3;
  raw.bytes.assign(b.begin() + pos, b.begin() + pos + need);
  return raw;
}

inline std::vector<std::uint8_t> encode_ppm(const RawImage8& raw) {
  std::string header = "P6\n" + std::to_string(raw.width) + " " +
                       std::to_string(raw.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), raw.bytes.begin(), raw.bytes.end());
  return out;
}

// ---- PNG --------------------------------------------------------------------
//
// Minimal PNG support: 8-bit depth, color types 0 (gray) and 2 (RGB), no
// interlacing. DEFLATE is delegated to zlib; chunk framing, filtering and CRC
// are handled here.

inline constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

inline bool is_png(const std::vector<std::uint8_t>& b) {
  return b.size() >= 8 && std::memcmp(b.data(), kPngSig, 8) == 0;
}

inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

inline std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

inline RawImage8 decode_png(const std::vector<std::uint8_t>& b,
                            const std::string& name) {
  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  std::uint32_t w = 0, h = 0;
  int channels = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= b.size() && !saw_iend) {
    const std::uint32_t len = be32(&b[pos]);
    require(pos + 12 + len <= b.size(), Errc::unsupported_format,
            "truncated PNG chunk: " + name);
    const std::uint8_t* type = &b[pos + 4];
    const std::uint8_t* payload = &b[pos + 8];
    const std::uint32_t crc_stored = be32(&b[pos + 8 + len]);
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(::crc32(0L, type, 4), payload, len));
    require(crc == crc_stored, Errc::unsupported_format,
            "PNG chunk CRC mismatch: " + name);
    const std::string t(reinterpret_cast<const char*>(type), 4);
    if (t == "IHDR") {
      require(len == 13, Errc::unsupported_format, "bad IHDR: " + name);
      w = be32(payload);
      h = be32(payload + 4);
      const int depth = payload[8], color = payload[9];
      const int comp = payload[10], filter = payload[11], interlace = payload[12];
      require(w > 0 && h > 0, Errc::zero_sized_image, "zero-sized PNG: " + name);
      require(depth == 8, Errc::unsupported_format, "only 8-bit PNG supported: " + name);
      require(color == 0 || color == 2, Errc::unsupported_format,
              "only gray/RGB PNG supported: " + name);
      require(comp == 0 && filter == 0 && interlace == 0, Errc::unsupported_format,
              "unsupported PNG encoding options: " + name);
      channels = (color == 0) ? 1 : 3;
      saw_ihdr = true;
    } else if (t == "IDAT") {
      require(saw_ihdr, Errc::unsupported_format, "IDAT before IHDR: " + name);
      idat.insert(idat.end(), payload, payload + len);
    } else if (t == "IEND") {
      saw_iend = true;
    }
    // Ancillary chunks are skipped.
    pos += 12 + len;
  }
  require(saw_ihdr && saw_iend && !idat.empty(), Errc::unsupported_format,
          "incomplete PNG stream: " + name);

  const size_t stride = static_cast<size_t>(w) * channels;
  std::vector<std::uint8_t> raw(static_cast<size_t>(h) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zrc = ::uncompress(raw.data(), &raw_len, idat.data(),
                               static_cast<uLong>(idat.size()));
  require(zrc == Z_OK && raw_len == raw.size(), Errc::unsupported_format,
          "PNG inflate failure: " + name);

  RawImage8 img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.channels = channels;
  img.bytes.assign(static_cast<size_t>(h) * stride, 0);
  const int bpp = channels;
  for (std::uint32_t y = 0; y < h; ++y) {
    const std::uint8_t ft = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* cur = &img.bytes[y * stride];
    const std::uint8_t* up = (y > 0) ? &img.bytes[(y - 1) * stride] : nullptr;
    require(ft <= 4, Errc::unsupported_format, "bad PNG filter type: " + name);
    for (size_t x = 0; x < stride; ++x) {
      const int a = (x >= static_cast<size_t>(bpp)) ? cur[x - bpp] : 0;
      const int bb = up ? up[x] : 0;
      const int c = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (ft) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += bb; break;
        case 3: v += (a + bb) / 2; break;
        case 4: v += paeth(a, bb, c); break;
      }
      cur[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return img;
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[5],
                         const std::vector<std::uint8_t>& payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const std::uint32_t crc = static_cast<std::uint32_t>(::crc32(
      0L, out.data() + type_at, static_cast<uInt>(4 + payload.size())));
  put_be32(out, crc);
}

inline std::vector<std::uint8_t> encode_png(const RawImage8& img) {
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> filtered(static_cast<size_t>(img.height) * (stride + 1));
  for (int y = 0; y < img.height; ++y) {
    filtered[y * (stride + 1)] = 0;  // filter type None
    std::memcpy(&filtered[y * (stride + 1) + 1], &img.bytes[y * stride], stride);
  }
  uLongf bound = ::compressBound(static_cast<uLong>(filtered.size()));
  std::vector<std::uint8_t> z(bound);
  const int zrc = ::compress2(z.data(), &bound, filtered.data(),
                              static_cast<uLong>(filtered.size()), 6);
  require(zrc == Z_OK, Errc::internal, "PNG deflate failure");
  z.resize(bound);

  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                      // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);              // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", z);
  append_chunk(out, "IEND", {});
  return out;
}

inline RawImage8 decode_any(const std::vector<std::uint8_t>& bytes,
                            const std::string& name) {
  if (is_png(bytes)) return decode_png(bytes, name);
  if (is_ppm(bytes)) return decode_ppm(bytes, name);
  fail(Errc::unsupported_format, "not a PNG or binary PPM file: " + name);
}

}  // namespace io_detail

/// Load an 8-bit PNG or binary PPM (P6) as an RGB image in [0,1]
/// (value/255). Gray inputs are replicated across the three channels.
inline RasterImage load_image(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  const auto raw = io_detail::decode_any(bytes, path.string());
  RasterImage img = RasterImage::zeros(raw.height, raw.width);
  const size_t n = img.pixel_count();
  for (size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const int src_c = (raw.channels == 3) ? c : 0;
      img.data[c * n + p] = raw.bytes[p * raw.channels + src_c] / 255.0;
    }
  }
  return img;
}

/// Save as 8-bit PNG (.png) or binary PPM (.ppm); bytes are round(v*255)
/// with halves away from zero.
inline void save_image(const RasterImage& img, const std::filesystem::path& path) {
  check_image(img);
  io_detail::RawImage8 raw;
  raw.height = img.height;
  raw.width = img.width;
  raw.channels = 3;
  const size_t n = img.pixel_count();
  raw.bytes.resize(n * 3);
  for (size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      raw.bytes[p * 3 + c] = quantize8(img.data[c * n + p]);
    }
  }
  const auto ext = path.extension().string();
  if (ext == ".png") {
    io_detail::write_file_atomic(path, io_detail::encode_png(raw));
  } else if (ext == ".ppm") {
    io_detail::write_file_atomic(path, io_detail::encode_ppm(raw));
  } else {
    fail(Errc::bad_argument, "unsupported output extension (use .png or .ppm): " +
                                 path.string());
  }
}

/// Load a grayscale image file as a binary mask: bytes above 127.5 map to 1,
/// everything else to 0. RGB inputs are averaged over channels first.
inline BinaryMask load_mask(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  const auto raw = io_detail::decode_any(bytes, path.string());
  BinaryMask m = BinaryMask::zeros(raw.height, raw.width);
  const size_t n = m.data.size();
  for (size_t p = 0; p < n; ++p) {
    double v = 0;
    for (int c = 0; c < raw.channels; ++c) v += raw.bytes[p * raw.channels + c];
    v /= raw.channels * 255.0;
    m.data[p] = (v > 0.5) ? 1 : 0;
  }
  return m;
}

/// Save a saliency map as 8-bit grayscale PNG using the standard rounding.
inline void save_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  io_detail::RawImage8 raw;
  raw.height = map.height;
  raw.width = map.width;
  raw.channels = 1;
  raw.bytes.resize(map.data.size());
  for (size_t i = 0; i < map.data.size(); ++i) raw.bytes[i] = quantize8(map.data[i]);
  io_detail::write_file_atomic(path, io_detail::encode_png(raw));
}

inline void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  io_detail::RawImage8 raw;
  raw.height = mask.height;
  raw.width = mask.width;
  raw.channels = 1;
  raw.bytes.resize(mask.data.size());
  for (size_t i = 0; i < mask.data.size(); ++i) raw.bytes[i] = mask.data[i] ? 255 : 0;
  io_detail::write_file_atomic(path, io_detail::encode_png(raw));
}

/// Load an 8-bit grayscale (or RGB, averaged) file as a saliency map.
inline SaliencyMap load_saliency(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  const auto raw = io_detail::decode_any(bytes, path.string());
  SaliencyMap m = SaliencyMap::filled(raw.height, raw.width, 0.0);
  const size_t n = m.data.size();
  for (size_t p = 0; p < n; ++p) {
    double v = 0;
    for (int c = 0; c < raw.channels; ++c) v += raw.bytes[p * raw.channels + c];
    m.data[p] = v / (raw.channels * 255.0);
  }
  return m;
}

/// Round-trip an image through the 8-bit quantizer in memory. Detection and
/// evaluation run on quantized pixels so results match what re-running the
/// detector on saved files would produce.
inline RasterImage quantize_image(const RasterImage& img) {
  RasterImage out = img;
  for (auto& v : out.data) v = quantize8(v) / 255.0;
  return out;
}

}  // namespace jadena

#endif  // JADENA_RASTER_HPP_
