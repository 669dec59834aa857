#pragma once

// Persistence for images (8-bit RGB PNG / binary PPM), depth maps (8/16-bit
// grayscale PNG / PGM), dataset manifests and atomic file writes.
//
// Manifest lines are tab-separated, UTF-8, one record per line:
//   input pairs:        cleanPath \t depthPath
//   synthesized pairs:  degradedPath \t gtPath \t waterType \t Br,Bg,Bb \t depthMax \t seed
// Paths are relative to the manifest's directory.

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

namespace fs = std::filesystem;

// 8-bit interleaved image, the unit of evaluation metrics and file output.
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  [[nodiscard]] std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image8&) const = default;
};

// Clamp to [0,1], then round half up.
inline std::uint8_t quantize(double v) {
  const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline double dequantize(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

inline Image8 to_image8(const Tensor& t) {
  Image8 img{t.height(), t.width(), t.channels(), std::vector<std::uint8_t>(t.size())};
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = quantize(v[i]);
  return img;
}

inline Tensor to_tensor(const Image8& img) {
  std::vector<double> v(img.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dequantize(img.data[i]);
  return Tensor(img.height, img.width, img.channels, std::move(v));
}

// ---------------------------------------------------------------------------
// Raw file access

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move temporary file onto " + path.string() + ": " + ec.message());
  }
}

inline void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// PNG via libpng

namespace detail {

struct RasterData {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 = gray, 3 = RGB
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

struct PngSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
  char message[256];
};

inline void png_read_callback(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->offset + n > src->size) {
    std::snprintf(src->message, sizeof src->message, "truncated PNG data at byte offset %zu (needed %zu more bytes)",
                  src->size, src->offset + n - src->size);
    png_longjmp(png, 1);
  }
  std::memcpy(out, src->data + src->offset, n);
  src->offset += n;
}

inline void png_error_callback(png_structp png, png_const_charp msg) {
  auto* src = static_cast<PngSource*>(png_get_error_ptr(png));
  std::snprintf(src->message, sizeof src->message, "PNG decode error near byte offset %zu: %s", src->offset, msg);
  png_longjmp(png, 1);
}

inline void png_warning_callback(png_structp, png_const_charp) {}

// Only trivially destructible locals live across setjmp here.
inline bool decode_png_raw(PngSource& src, RasterData& out, bool& was_gray) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &src, png_error_callback, png_warning_callback);
  if (png == nullptr) {
    std::snprintf(src.message, sizeof src.message, "libpng initialisation failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  png_bytep* rows = nullptr;
  png_bytep pixels = nullptr;
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    std::free(rows);
    std::free(pixels);
    png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
    return false;
  }
  png_set_read_fn(png, &src, png_read_callback);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  was_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  pixels = static_cast<png_bytep>(std::malloc(rowbytes * static_cast<std::size_t>(height)));
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * static_cast<std::size_t>(height)));
  if (pixels == nullptr || rows == nullptr) png_error(png, "out of memory");
  for (int y = 0; y < height; ++y) rows[y] = pixels + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);

  out.width = width;
  out.height = height;
  out.channels = channels;
  out.bit_depth = depth;
  out.samples.resize(static_cast<std::size_t>(width) * height * channels);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = depth == 16 ? static_cast<std::uint16_t>((pixels[2 * i] << 8) | pixels[2 * i + 1]) : pixels[i];
  }
  std::free(pixels);
  return true;
}

inline RasterData decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name, bool& was_gray) {
  PngSource src{bytes.data(), bytes.size(), 0, {0}};
  RasterData out;
  if (!decode_png_raw(src, out, was_gray)) throw FormatError(name + ": " + src.message);
  return out;
}

inline std::vector<std::uint8_t> encode_png(const RasterData& raster) {
  struct Sink {
    std::vector<std::uint8_t> bytes;
    char message[256];
  } sink{{}, {0}};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  const std::size_t bytes_per_sample = raster.bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(raster.width) * raster.channels * bytes_per_sample;
  std::vector<std::uint8_t> buffer(rowbytes * static_cast<std::size_t>(raster.height));
  for (std::size_t i = 0; i < raster.samples.size(); ++i) {
    if (bytes_per_sample == 2) {
      buffer[2 * i] = static_cast<std::uint8_t>(raster.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(raster.samples[i] & 0xFF);
    } else {
      buffer[i] = static_cast<std::uint8_t>(raster.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  for (int y = 0; y < raster.height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + rowbytes * y;

  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
    throw IoError("PNG encode failed");
  }
  png_set_write_fn(
      png, &sink,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* s = static_cast<Sink*>(png_get_io_ptr(p));
        s->bytes.insert(s->bytes.end(), data, data + n);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height),
               raster.bit_depth, raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(sink.bytes);
}

// ---------------------------------------------------------------------------
// Binary PNM (P5 / P6)

inline RasterData decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos]) != 0) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_number = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) != 0) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000L) break;
      ++pos;
    }
    if (pos == start || value <= 0 || value > 1'000'000'000L) {
      throw FormatError(name + ": invalid " + what + " at byte offset " + std::to_string(start));
    }
    return static_cast<int>(value);
  };
  RasterData out;
  out.channels = bytes[1] == '6' ? 3 : 1;
  out.width = read_number("width");
  out.height = read_number("height");
  const int maxval = read_number("maxval");
  if (maxval > 65535) throw FormatError(name + ": maxval " + std::to_string(maxval) + " exceeds 65535");
  if (pos >= bytes.size() || std::isspace(bytes[pos]) == 0) {
    throw FormatError(name + ": expected whitespace after header at byte offset " + std::to_string(pos));
  }
  ++pos;
  out.bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  if (bytes.size() - pos < count * bps) {
    throw FormatError(name + ": truncated pixel data at byte offset " + std::to_string(bytes.size()) + " (expected " +
                      std::to_string(pos + count * bps) + " bytes)");
  }
  out.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = bps == 2 ? static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1])
                               : bytes[pos + i];
    if (v > maxval) {
      throw FormatError(name + ": sample exceeds maxval at byte offset " + std::to_string(pos + bps * i));
    }
    out.samples[i] = v;
  }
  // Scale to the full range of the sample width.
  if (maxval != 255 && maxval != 65535) {
    const int full = bps == 2 ? 65535 : 255;
    for (auto& s : out.samples) s = static_cast<std::uint16_t>(std::lround(static_cast<double>(s) * full / maxval));
  }
  return out;
}

inline std::vector<std::uint8_t> encode_pnm(const RasterData& raster) {
  const std::string header = std::string(raster.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(raster.width) +
                             " " + std::to_string(raster.height) + "\n" +
                             (raster.bit_depth == 16 ? "65535" : "255") + "\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (std::uint16_t s : raster.samples) {
    if (raster.bit_depth == 16) bytes.push_back(static_cast<std::uint8_t>(s >> 8));
    bytes.push_back(static_cast<std::uint8_t>(s & 0xFF));
  }
  return bytes;
}

enum class RasterKind { Png, Pnm };

inline RasterData decode_raster(const fs::path& path, bool& was_gray) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(bytes, name, was_gray);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    was_gray = bytes[1] == '5';
    return decode_pnm(bytes, name);
  }
  throw FormatError(name + ": unsupported image format at byte offset 0 (expected PNG, P5 or P6)");
}

inline RasterKind kind_for(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return RasterKind::Png;
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return RasterKind::Pnm;
  throw ConfigError(path.string() + ": unsupported output extension (use .png, .ppm or .pgm)");
}

inline void write_raster(const RasterData& raster, const fs::path& path) {
  const auto bytes = kind_for(path) == RasterKind::Png ? encode_png(raster) : encode_pnm(raster);
  write_file_atomic(path, bytes);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public image API

inline Image8 read_image8(const fs::path& path) {
  bool gray = false;
  auto raster = detail::decode_raster(path, gray);
  if (raster.bit_depth != 8) {
    throw FormatError(path.string() + ": expected 8-bit samples, found " + std::to_string(raster.bit_depth) + "-bit");
  }
  Image8 img{raster.height, raster.width, 3, {}};
  img.data.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  for (std::size_t px = 0; px < static_cast<std::size_t>(img.height) * img.width; ++px) {
    for (int c = 0; c < 3; ++c) {
      img.data[px * 3 + c] =
          static_cast<std::uint8_t>(raster.channels == 1 ? raster.samples[px] : raster.samples[px * 3 + c]);
    }
  }
  return img;
}

// RGB image with channel values byte / 255.
inline Tensor read_image(const fs::path& path) { return to_tensor(read_image8(path)); }

inline void write_image8(const Image8& img, const fs::path& path) {
  if (img.channels != 3 && img.channels != 1) {
    throw DimensionError(path.string() + ": can only write 1- or 3-channel images");
  }
  detail::RasterData raster{img.width, img.height, img.channels, 8, {img.data.begin(), img.data.end()}};
  detail::write_raster(raster, path);
}

// Clamps to [0,1] and quantizes with round-half-up before encoding.
inline void write_image(const Tensor& image, const fs::path& path) { write_image8(to_image8(image), path); }

struct DepthMap {
  Tensor depth;           // normalized to [0,1] by the file's own min/max
  bool constant = false;  // the file held a single value; depth is all zeros
};

inline DepthMap read_depth(const fs::path& path) {
  bool gray = false;
  auto raster = detail::decode_raster(path, gray);
  if (!gray || raster.channels != 1) {
    throw FormatError(path.string() + ": depth maps must be single-channel grayscale");
  }
  const auto [lo_it, hi_it] = std::minmax_element(raster.samples.begin(), raster.samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  DepthMap out{Tensor(raster.height, raster.width, 1), hi == lo};
  if (!out.constant) {
    auto v = out.depth.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (raster.samples[i] - lo) / (hi - lo);
  }
  return out;
}

// Writes a [0,1] single-channel map as 16-bit grayscale.
inline void write_depth(const Tensor& depth, const fs::path& path) {
  if (depth.channels() != 1) throw DimensionError("write_depth: expected 1 channel, got " + depth.shape());
  detail::RasterData raster{depth.width(), depth.height(), 1, 16, {}};
  raster.samples.reserve(depth.size());
  for (double v : depth.values()) {
    raster.samples.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)));
  }
  detail::write_raster(raster, path);
}

// ---------------------------------------------------------------------------
// Manifests

struct SynthesisRecord {
  std::string water_type;
  std::array<double, 3> background{};
  double depth_max = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const SynthesisRecord&) const = default;
};

struct ManifestEntry {
  std::string first;   // clean or degraded image
  std::string second;  // depth map or ground truth
  std::optional<SynthesisRecord> synthesis;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  fs::path base_dir;
  std::vector<ManifestEntry> entries;

  [[nodiscard]] fs::path resolve(const std::string& relative) const { return base_dir / relative; }
};

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s, std::size_t line, const fs::path& path) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(path.string() + ": line " + std::to_string(line) + ": invalid number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace detail

inline std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    out += e.first;
    out += '\t';
    out += e.second;
    if (e.synthesis) {
      const auto& s = *e.synthesis;
      out += '\t' + s.water_type + '\t' + detail::format_double(s.background[0]) + ',' +
             detail::format_double(s.background[1]) + ',' + detail::format_double(s.background[2]) + '\t' +
             detail::format_double(s.depth_max) + '\t' + std::to_string(s.seed);
    }
    out += '\n';
  }
  return out;
}

inline DatasetManifest parse_manifest(std::string_view text, const fs::path& path) {
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto where = [&] { return path.string() + ": line " + std::to_string(line_no) + ": "; };
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2 && fields.size() != 6) {
      throw FormatError(where() + "expected 2 or 6 tab-separated fields, got " + std::to_string(fields.size()));
    }
    for (auto f : fields) {
      if (f.empty()) throw FormatError(where() + "empty field");
    }
    ManifestEntry entry{std::string(fields[0]), std::string(fields[1]), std::nullopt};
    if (fields.size() == 6) {
      SynthesisRecord rec;
      rec.water_type = std::string(fields[2]);
      const auto bg = detail::split(fields[3], ',');
      if (bg.size() != 3) throw FormatError(where() + "background light must be three comma-separated values");
      for (int c = 0; c < 3; ++c) rec.background[static_cast<std::size_t>(c)] = detail::parse_double(bg[c], line_no, path);
      rec.depth_max = detail::parse_double(fields[4], line_no, path);
      auto [p, ec] = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), rec.seed);
      if (ec != std::errc() || p != fields[5].data() + fields[5].size()) {
        throw FormatError(where() + "invalid seed '" + std::string(fields[5]) + "'");
      }
      entry.synthesis = rec;
    }
    if (!seen.insert(entry.first).second) {
      throw FormatError(where() + "duplicate image path '" + entry.first + "'");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path);
}

inline void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_file_atomic(path, format_manifest(manifest));
}

}  // namespace uwcnn
