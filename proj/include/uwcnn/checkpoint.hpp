#pragma once

// Checkpoint layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "UWCN"
//   4       4     u32 version (= 1)
//   8       4     u32 num_blocks
//   12      4     u32 convs_per_block
//   16      4     u32 feature_maps
//   20      1     u8 flags: bit 0 residual learning, bit 1 dense concatenation
//   21      8     u64 init seed
//   29      4     u32 water type tag length L
//   33      L     water type tag, UTF-8
//   33+L    4     u32 layer count N
//   ...     16*N  per layer: u32 kh, u32 kw, u32 in_channels, u32 out_channels
//   ...     8     u64 weight count W
//   ...     4*W   IEEE-754 binary32 weights; per layer the kernel in
//                 [ky][kx][in][out] order, then the bias
//
// The file must end exactly after the last weight.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "uwcnn/imageio.hpp"
#include "uwcnn/model.hpp"

namespace uwcnn {

inline constexpr char kCheckpointMagic[4] = {'U', 'W', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::string water_type;
};

namespace detail {

class ByteWriter {
public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const void* data, std::size_t n) { bytes_.append(static_cast<const char*>(data), n); }
  [[nodiscard]] const std::string& bytes() const noexcept { return bytes_; }

private:
  std::string bytes_;
};

class ByteReader {
public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  std::uint8_t u8() {
    need(1, "u8");
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  [[nodiscard]] std::size_t offset() const noexcept { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(name_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }

private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) fail(std::string("truncated checkpoint reading ") + what);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Model& model, const std::string& water_type) {
  const auto& cfg = model.config();
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.num_blocks));
  w.u32(static_cast<std::uint32_t>(cfg.convs_per_block));
  w.u32(static_cast<std::uint32_t>(cfg.feature_maps));
  w.u8(static_cast<std::uint8_t>((cfg.residual_learning ? 1 : 0) | (cfg.dense_concat ? 2 : 0)));
  w.u64(cfg.seed);
  w.u32(static_cast<std::uint32_t>(water_type.size()));
  w.raw(water_type.data(), water_type.size());
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  std::uint64_t count = 0;
  for (const auto& layer : model.layers()) {
    w.u32(ConvParams::kSize);
    w.u32(ConvParams::kSize);
    w.u32(static_cast<std::uint32_t>(layer.in_channels));
    w.u32(static_cast<std::uint32_t>(layer.out_channels));
    count += layer.parameter_count();
  }
  w.u64(count);
  for (const auto& layer : model.layers()) {
    for (double v : layer.kernel) w.f32(v);
    for (double v : layer.bias) w.f32(v);
  }
  return w.bytes();
}

inline void write_checkpoint(const Model& model, const fs::path& path, const std::string& water_type = {}) {
  write_file_atomic(path, encode_checkpoint(model, water_type));
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  detail::ByteReader r(bytes, name);
  if (r.remaining() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    r.fail("bad magic (expected \"UWCN\")");
  }
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(name + ": unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig cfg;
  cfg.num_blocks = static_cast<int>(r.u32());
  cfg.convs_per_block = static_cast<int>(r.u32());
  cfg.feature_maps = static_cast<int>(r.u32());
  const std::uint8_t flags = r.u8();
  if ((flags & ~3u) != 0) r.fail("unknown flag bits");
  cfg.residual_learning = (flags & 1u) != 0;
  cfg.dense_concat = (flags & 2u) != 0;
  cfg.seed = r.u64();
  if (cfg.num_blocks < 1 || cfg.convs_per_block < 1 || cfg.feature_maps < 1 || cfg.num_blocks > 1024 ||
      cfg.convs_per_block > 1024 || cfg.feature_maps > 65536) {
    r.fail("implausible architecture header");
  }
  const std::uint32_t tag_len = r.u32();
  if (tag_len > r.remaining()) r.fail("water type tag longer than file");
  std::string tag = r.str(tag_len);

  const auto shapes = cfg.layer_shapes();
  const std::uint32_t layer_count = r.u32();
  if (layer_count != shapes.size()) {
    r.fail("layer count " + std::to_string(layer_count) + " does not match the architecture (" +
           std::to_string(shapes.size()) + ")");
  }
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::uint32_t kh = r.u32();
    const std::uint32_t kw = r.u32();
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    if (kh != ConvParams::kSize || kw != ConvParams::kSize || in != static_cast<std::uint32_t>(shapes[i].first) ||
        out != static_cast<std::uint32_t>(shapes[i].second)) {
      r.fail("layer " + std::to_string(i) + " dims disagree with the architecture");
    }
    expected += static_cast<std::uint64_t>(kh) * kw * in * out + out;
  }
  const std::uint64_t count = r.u64();
  if (count != expected) {
    r.fail("weight count " + std::to_string(count) + " does not match layer dims (" + std::to_string(expected) + ")");
  }
  if (r.remaining() != count * 4) {
    r.fail("expected " + std::to_string(count * 4) + " bytes of weights, found " + std::to_string(r.remaining()));
  }
  std::vector<ConvParams> layers;
  for (const auto& [in, out] : shapes) {
    ConvParams p(in, out);
    for (double& v : p.kernel) v = r.f32();
    for (double& v : p.bias) v = r.f32();
    const bool finite = std::all_of(p.kernel.begin(), p.kernel.end(), [](double v) { return std::isfinite(v); }) &&
                        std::all_of(p.bias.begin(), p.bias.end(), [](double v) { return std::isfinite(v); });
    if (!finite) r.fail("non-finite weight");
    layers.push_back(std::move(p));
  }
  return {Model(cfg, std::move(layers)), std::move(tag)};
}

inline Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path), path.string()); }

inline void save(const Model& model, const fs::path& path) { write_checkpoint(model, path); }
inline Model load(const fs::path& path) { return read_checkpoint(path).model; }

}  // namespace uwcnn
