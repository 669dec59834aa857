#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "uwcnn/imageio.hpp"

using namespace uwcnn;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("uwcnn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

Image8 random8(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Image8 img{h, w, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
  for (auto& b : img.data) b = static_cast<std::uint8_t>(d(rng));
  return img;
}

}  // namespace

TEST(Quantize, Rules) {
  EXPECT_EQ(quantize(0.5), 128);
  EXPECT_EQ(quantize(1.7), 255);
  EXPECT_EQ(quantize(-0.2), 0);
  EXPECT_EQ(quantize(0.0039), 1);
  EXPECT_EQ(quantize(0.0019), 0);
  EXPECT_EQ(quantize(0.5 / 255.0), 1);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(quantize(dequantize(static_cast<std::uint8_t>(b))), b);
}

TEST(ImageIo, WhitePixel) {
  const auto dir = temp_dir("io_white");
  write_image(Tensor(1, 1, 3, 1.0), dir / "w.png");
  const Tensor t = read_image(dir / "w.png");
  EXPECT_EQ(t.shape(), "1x1x3");
  for (double v : t.values()) EXPECT_EQ(v, 1.0);
}

TEST(ImageIo, RoundTripIsByteExact) {
  const auto dir = temp_dir("io_rt");
  const Image8 img = random8(13, 7, 1);
  write_image8(img, dir / "a.png");
  write_image8(img, dir / "a.ppm");
  EXPECT_EQ(read_image8(dir / "a.png"), img);
  EXPECT_EQ(read_image8(dir / "a.ppm"), img);
  EXPECT_EQ(read_image(dir / "a.png"), read_image(dir / "a.ppm"));
  EXPECT_FALSE(fs::exists(dir / "a.png.tmp"));
}

TEST(ImageIo, GrayscaleExpandsToRgb) {
  const auto dir = temp_dir("io_gray");
  Image8 g{2, 2, 1, {0, 64, 128, 255}};
  write_image8(g, dir / "g.png");
  const Image8 rgb = read_image8(dir / "g.png");
  EXPECT_EQ(rgb.channels, 3);
  EXPECT_EQ(rgb.at(1, 0, 2), 128);
  write_bytes(dir / "g.pgm", std::string("P5\n2 1\n255\n") + '\x10' + '\x20');
  EXPECT_EQ(read_image8(dir / "g.pgm").at(0, 1, 1), 0x20);
}

TEST(ImageIo, PnmHeaderVariants) {
  const auto dir = temp_dir("io_pnm");
  // Comment in the header and a non-255 maxval that is rescaled to 8 bits.
  write_bytes(dir / "c.ppm", std::string("P6\n# note\n1 1\n15\n") + '\x0f' + '\x00' + '\x05');
  const Image8 img = read_image8(dir / "c.ppm");
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{255, 0, 85}));
}

TEST(ImageIo, Errors) {
  const auto dir = temp_dir("io_err");
  EXPECT_THROW(read_image(dir / "missing.png"), IoError);
  write_bytes(dir / "junk.png", "not an image");
  EXPECT_THROW(read_image(dir / "junk.png"), FormatError);
  write_image8(random8(8, 8, 2), dir / "t.png");
  auto bytes = read_file(dir / "t.png");
  write_bytes(dir / "trunc.png", std::string(bytes.begin(), bytes.begin() + 40));
  EXPECT_THROW(read_image(dir / "trunc.png"), FormatError);
  write_bytes(dir / "trunc.ppm", "P6\n4 4\n255\nabc");
  EXPECT_THROW(read_image(dir / "trunc.ppm"), FormatError);
  EXPECT_THROW(write_image(Tensor(2, 2, 3), dir / "x.bmp"), ConfigError);
}

TEST(Depth, RampAndArithmetic) {
  const auto dir = temp_dir("io_depth");
  detail::RasterData ramp{4, 1, 1, 16, {0, 21845, 43690, 65535}};
  detail::write_raster(ramp, dir / "ramp.png");
  const auto d = read_depth(dir / "ramp.png");
  EXPECT_FALSE(d.constant);
  EXPECT_NEAR(d.depth[0], 0.0, 1e-15);
  EXPECT_NEAR(d.depth[1], 1.0 / 3, 1e-15);
  EXPECT_NEAR(d.depth[3], 1.0, 1e-15);

  detail::RasterData nyu{3, 1, 1, 16, {500, 2000, 8000}};
  detail::write_raster(nyu, dir / "nyu.pgm");
  const auto n = read_depth(dir / "nyu.pgm");
  EXPECT_NEAR(n.depth[1], (2000.0 - 500) / 7500, 1e-15);

  detail::RasterData flat{3, 2, 1, 16, std::vector<std::uint16_t>(6, 1234)};
  detail::write_raster(flat, dir / "flat.png");
  const auto f = read_depth(dir / "flat.png");
  EXPECT_TRUE(f.constant);
  for (double v : f.depth.values()) EXPECT_EQ(v, 0.0);

  write_image(Tensor(2, 2, 3, 0.5), dir / "rgb.png");
  EXPECT_THROW(read_depth(dir / "rgb.png"), FormatError);

  // 8-bit depth maps are accepted too.
  write_image8(Image8{1, 2, 1, {10, 20}}, dir / "d8.png");
  EXPECT_EQ(read_depth(dir / "d8.png").depth[1], 1.0);

  Tensor t = oracle::random(3, 5, 1, 3);
  t[0] = 0.0;
  t[1] = 1.0;
  write_depth(t, dir / "w.png");
  const auto back = read_depth(dir / "w.png").depth;
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(back[i], t[i], 1.0 / 65535);
}

TEST(Manifest, RoundTripAndResolution) {
  const auto dir = temp_dir("manifest");
  DatasetManifest m{dir, {}};
  m.entries.push_back({"a/x.png", "d/x.png", std::nullopt});
  m.entries.push_back({"degraded/y_v0.png", "gt/y.png", SynthesisRecord{"IB", {0.81, 0.9, 0.999999}, 3.25, 42}});
  write_manifest(m, dir / "m.tsv");
  const auto text = read_file(dir / "m.tsv");
  const auto back = read_manifest(dir / "m.tsv");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.base_dir, dir);
  EXPECT_EQ(back.resolve("a/x.png"), dir / "a/x.png");
  write_manifest(back, dir / "m2.tsv");
  EXPECT_EQ(read_file(dir / "m2.tsv"), text);
}

TEST(Manifest, EmptyAndErrors) {
  const auto dir = temp_dir("manifest_err");
  write_bytes(dir / "empty.tsv", "");
  EXPECT_TRUE(read_manifest(dir / "empty.tsv").entries.empty());

  write_bytes(dir / "one.tsv", "onlyonefield\n");
  try {
    read_manifest(dir / "one.tsv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  write_bytes(dir / "dup.tsv", "a.png\tb.png\na.png\tc.png\n");
  EXPECT_THROW(read_manifest(dir / "dup.tsv"), FormatError);
  write_bytes(dir / "num.tsv", "a.png\tb.png\t1\t0.9,0.9,x\t3\t1\n");
  EXPECT_THROW(read_manifest(dir / "num.tsv"), FormatError);
  write_bytes(dir / "crlf.tsv", "a.png\tb.png\r\n");
  EXPECT_EQ(read_manifest(dir / "crlf.tsv").entries.at(0).second, "b.png");
  EXPECT_THROW(read_manifest(dir / "absent.tsv"), IoError);
}
