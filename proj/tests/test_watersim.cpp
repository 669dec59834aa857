#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"
#include "uwcnn/dataset.hpp"
#include "uwcnn/watersim.hpp"

using namespace uwcnn;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("uwcnn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Writes `count` small clean/depth pairs and their input manifest.
fs::path write_inputs(const fs::path& dir, int count, int h = 9, int w = 11) {
  DatasetManifest m{dir, {}};
  for (int i = 0; i < count; ++i) {
    const std::string rgb = "img" + std::to_string(i) + ".png";
    const std::string depth = "d" + std::to_string(i) + ".png";
    write_image(oracle::random(h, w, 3, 100 + i), dir / rgb);
    Tensor d = oracle::random(h, w, 1, 200 + i);
    d[0] = 0.0;
    d[1] = 1.0;
    write_depth(d, dir / depth);
    m.entries.push_back({rgb, depth, std::nullopt});
  }
  write_manifest(m, dir / "inputs.tsv");
  return dir / "inputs.tsv";
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return files;
}

}  // namespace

TEST(WaterTypes, TableValues) {
  const std::vector<std::tuple<std::string, double, double, double>> expected{
      {"I", 0.805, 0.961, 0.982}, {"IA", 0.804, 0.955, 0.975}, {"IB", 0.83, 0.95, 0.968}, {"II", 0.8, 0.925, 0.94},
      {"III", 0.75, 0.885, 0.89}, {"1", 0.75, 0.885, 0.875},   {"3", 0.71, 0.82, 0.8},    {"5", 0.67, 0.73, 0.67},
      {"7", 0.62, 0.61, 0.5},     {"9", 0.55, 0.46, 0.29}};
  ASSERT_EQ(kWaterTypes.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, r, g, b] = expected[i];
    EXPECT_EQ(kWaterTypes[i].name, name);
    EXPECT_EQ(kWaterTypes[i].n_red, r);
    EXPECT_EQ(kWaterTypes[i].n_green, g);
    EXPECT_EQ(kWaterTypes[i].n_blue, b);
    EXPECT_EQ(&water_type(name), &kWaterTypes[i]);
  }
}

TEST(WaterTypes, UnknownNameListsValidOnes) {
  try {
    water_type("X");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& t : kWaterTypes) EXPECT_NE(msg.find(std::string(t.name)), std::string::npos);
  }
}

TEST(Transmission, Examples) {
  const auto& t1 = water_type("1");
  const Tensor zero = transmission(t1, Tensor(2, 3, 1, 0.0));
  for (double v : zero.values()) EXPECT_EQ(v, 1.0);
  const Tensor one = transmission(t1, Tensor(1, 1, 1, 1.0));
  EXPECT_EQ(one[0], 0.75);
  EXPECT_EQ(one[1], 0.885);
  EXPECT_EQ(one[2], 0.875);
  EXPECT_EQ(transmission(t1, Tensor(1, 1, 1, 2.0))[0], 0.5625);
  EXPECT_THROW(transmission(t1, Tensor(1, 1, 1, -1.0)), DomainError);
  EXPECT_THROW(transmission(t1, Tensor(1, 1, 3)), DimensionError);
}

TEST(Transmission, MonotoneAndOrdered) {
  Tensor depth(1, 6, 1, std::vector<double>{0.5, 1, 2, 4, 8, 15});
  for (const auto& w : kWaterTypes) {
    const Tensor t = transmission(w, depth);
    for (int x = 1; x < 6; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_LT(t(0, x, c), t(0, x - 1, c)) << w.name;
  }
  const Tensor d(1, 1, 1, 7.0);
  double prev = 2.0;
  for (const char* name : {"I", "IA", "IB", "II", "III"}) {
    const double blue = transmission(water_type(name), d)[2];
    EXPECT_LE(blue, prev) << name;
    prev = blue;
  }
}

TEST(Synthesize, Examples) {
  SynthesisParams p;
  p.background = {0.9, 0.9, 0.9};
  const Tensor clean = oracle::random(4, 4, 3, 1);
  EXPECT_EQ(synthesize(clean, Tensor(4, 4, 1, 0.0), p), clean);
  const Tensor far = synthesize(clean, Tensor(4, 4, 1, 5000.0), p);
  for (double v : far.values()) EXPECT_NEAR(v, 0.9, 1e-12);
  const Tensor white(1, 1, 3, 1.0);
  EXPECT_NEAR(synthesize(white, Tensor(1, 1, 1, 1.0), p)[0], 0.975, 1e-15);
}

TEST(Synthesize, MatchesScalarOracleAndIsConvex) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor clean = oracle::random(6, 7, 3, 300 + trial);
    SynthesisParams p = sample_params(rng, kWaterTypes[static_cast<std::size_t>(trial) % 10]);
    const Tensor depth = scale_depth(oracle::random(6, 7, 1, 400 + trial), p);
    const Tensor u = synthesize(clean, depth, p);
    const Tensor ref = oracle::synthesize(clean, depth, p.water.ratios(), p.background);
    for (std::size_t i = 0; i < u.size(); ++i) {
      EXPECT_NEAR(u[i], ref[i], 1e-12);
      const double b = p.background[i % 3];
      EXPECT_GE(u[i], std::min(clean[i], b) - 1e-15);
      EXPECT_LE(u[i], std::max(clean[i], b) + 1e-15);
    }
  }
}

TEST(ScaleDepth, Examples) {
  SynthesisParams p;
  EXPECT_EQ(scale_depth(Tensor(1, 1, 1, 0.0), p)[0], 0.5);
  EXPECT_EQ(scale_depth(Tensor(1, 1, 1, 1.0), p)[0], 15.0);
  p.depth_max = 10.5;
  EXPECT_EQ(scale_depth(Tensor(1, 1, 1, 0.5), p)[0], 5.5);
  EXPECT_THROW(scale_depth(Tensor(1, 1, 1, 1.5), p), DomainError);
}

TEST(SampleParams, RangesAndMean) {
  std::mt19937_64 rng(11);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_params(rng, water_type("3"));
    for (double b : p.background) {
      ASSERT_GT(b, 0.8);
      ASSERT_LT(b, 1.0);
    }
    ASSERT_GE(p.depth_max, 3.0);
    ASSERT_LE(p.depth_max, 15.0);
    EXPECT_NO_THROW(p.validate());
    sum += p.background[0];
  }
  EXPECT_NEAR(sum / n, 0.9, 0.002);

  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  const auto pa = sample_params(a, water_type("9"));
  const auto pb = sample_params(b, water_type("9"));
  EXPECT_EQ(pa.background, pb.background);
  EXPECT_EQ(pa.depth_max, pb.depth_max);
}

TEST(SynthesisParams, Validation) {
  SynthesisParams p;
  p.background = {0.8, 0.9, 0.9};
  EXPECT_THROW(p.validate(), DomainError);
  p.background = {0.9, 0.9, 0.9};
  p.depth_max = 0.4;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(Seeds, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 50; ++i)
    for (std::uint64_t v = 0; v < 5; ++v) seen.insert(derive_seed(0, i, v));
  EXPECT_EQ(seen.size(), 250u);
  EXPECT_NE(derive_seed(0, 1, 0), derive_seed(0, 0, 1));
}

TEST(Resize, BilinearBasics) {
  const Tensor c(4, 6, 3, 0.25);
  const Tensor resized = resize_bilinear(c, 7, 3);
  for (double v : resized.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const Tensor src = oracle::random(5, 5, 2, 9);
  EXPECT_EQ(resize_bilinear(src, 5, 5), src);
  const Tensor half = resize_bilinear(Tensor(2, 2, 1, std::vector<double>{0, 1, 0, 1}), 1, 1);
  EXPECT_DOUBLE_EQ(half[0], 0.5);
}

TEST(BuildDataset, CountsNamesAndManifest) {
  const auto dir = temp_dir("build");
  const auto inputs = read_manifest(write_inputs(dir / "in", 2));
  DatasetOptions opt;
  const auto out = build_dataset(inputs, water_type("1"), opt, dir / "out");
  ASSERT_EQ(out.entries.size(), 10u);
  EXPECT_EQ(out.entries[0].first, "degraded/0000_img0_v0.png");
  EXPECT_EQ(out.entries[0].second, "gt/0000_img0.png");
  EXPECT_EQ(out.entries[9].first, "degraded/0001_img1_v4.png");
  for (const auto& e : out.entries) {
    ASSERT_TRUE(e.synthesis.has_value());
    EXPECT_EQ(e.synthesis->water_type, "1");
    EXPECT_TRUE(fs::exists(out.resolve(e.first)));
    EXPECT_TRUE(fs::exists(out.resolve(e.second)));
  }
}

TEST(BuildDataset, ZeroVariantsWritesNothing) {
  const auto dir = temp_dir("build_zero");
  const auto inputs = read_manifest(write_inputs(dir / "in", 2));
  DatasetOptions opt;
  opt.variants_per_image = 0;
  EXPECT_TRUE(build_dataset(inputs, water_type("1"), opt, dir / "out").entries.empty());
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(BuildDataset, DeterministicAcrossRunsAndThreads) {
  const auto dir = temp_dir("build_det");
  const auto inputs = read_manifest(write_inputs(dir / "in", 3));
  DatasetOptions opt;
  opt.variants_per_image = 2;
  opt.seed = 77;
  opt.resize = ResizeTarget{8, 6};
  const auto a = build_dataset(inputs, water_type("5"), opt, dir / "a");
  opt.threads = 3;
  const auto b = build_dataset(inputs, water_type("5"), opt, dir / "b");
  EXPECT_EQ(a.entries, b.entries);
  EXPECT_EQ(snapshot(dir / "a"), snapshot(dir / "b"));
  EXPECT_EQ(read_image(dir / "a" / a.entries[0].first).shape(), "6x8x3");
}

TEST(BuildDataset, ReproducesRecordedParameters) {
  const auto dir = temp_dir("build_replay");
  const auto inputs = read_manifest(write_inputs(dir / "in", 1));
  DatasetOptions opt;
  opt.variants_per_image = 3;
  opt.resize.reset();
  const auto out = build_dataset(inputs, water_type("7"), opt, dir / "out");
  const Tensor clean = read_image(inputs.resolve(inputs.entries[0].first));
  const Tensor depth = read_depth(inputs.resolve(inputs.entries[0].second)).depth;
  for (const auto& e : out.entries) {
    SynthesisParams p;
    p.water = water_type("7");
    p.background = e.synthesis->background;
    p.depth_max = e.synthesis->depth_max;
    const Tensor expected = synthesize(clean, scale_depth(depth, p), p);
    EXPECT_EQ(to_image8(expected), read_image8(out.resolve(e.first)));
  }
}

TEST(BuildDataset, MismatchedDepthRejected) {
  const auto dir = temp_dir("build_mismatch");
  write_image(Tensor(4, 4, 3, 0.5), dir / "a.png");
  write_depth(oracle::random(5, 4, 1, 1), dir / "d.png");
  DatasetManifest m{dir, {{"a.png", "d.png", std::nullopt}}};
  DatasetOptions opt;
  opt.resize.reset();
  EXPECT_THROW(build_dataset(m, water_type("1"), opt, dir / "out"), DimensionError);
}
