#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "uwcnn/gradcheck_suite.hpp"
#include "uwcnn/tensor.hpp"

using namespace uwcnn;

namespace {

ConvParams random_params(int in, int out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  ConvParams p(in, out);
  for (double& v : p.kernel) v = n(rng);
  for (double& v : p.bias) v = n(rng);
  return p;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(0, 3, 3), DimensionError);
  EXPECT_THROW(Tensor(2, 2, 1, std::vector<double>(3)), DimensionError);
  Tensor t(2, 3, 4);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.index(1, 2, 3), 23u);
}

TEST(Conv2d, IdentityKernel) {
  ConvParams p(1, 1);
  p.weight(1, 1, 0, 0) = 1.0;
  const Tensor x = oracle::random(5, 7, 1, 1);
  EXPECT_EQ(conv2d_forward(x, p), x);
}

TEST(Conv2d, ZeroInputGivesBias) {
  ConvParams p(2, 3);
  p.bias = {0.5, -1.0, 2.0};
  const Tensor y = conv2d_forward(Tensor(4, 4, 2), p);
  for (int yy = 0; yy < 4; ++yy)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(y(yy, x, c), p.bias[static_cast<std::size_t>(c)]);
}

TEST(Conv2d, MatchesBruteForce) {
  const Tensor x = oracle::random(5, 5, 2, 2, -1, 1);
  const auto p = random_params(2, 3, 3);
  EXPECT_LT(max_abs_diff(conv2d_forward(x, p), oracle::conv(x, p)), 1e-12);
}

TEST(Conv2d, MatchesBruteForceAcrossSizes) {
  std::uint64_t seed = 10;
  for (int h = 1; h <= 16; h += 3) {
    for (int w = 1; w <= 16; w += 5) {
      for (int c = 1; c <= 4; c += 3) {
        const Tensor x = oracle::random(h, w, c, ++seed, -1, 1);
        const auto p = random_params(c, 2, ++seed);
        const Tensor y = conv2d_forward(x, p);
        ASSERT_EQ(y.height(), h);
        ASSERT_EQ(y.width(), w);
        EXPECT_LT(max_abs_diff(y, oracle::conv(x, p)), 1e-12) << h << "x" << w << "x" << c;
      }
    }
  }
}

TEST(Conv2d, ChannelMismatchThrows) {
  EXPECT_THROW(conv2d_forward(Tensor(3, 3, 2), ConvParams(3, 1)), DimensionError);
}

TEST(Conv2dBackward, ZeroCotangent) {
  const Tensor x = oracle::random(4, 5, 2, 4);
  const auto p = random_params(2, 3, 5);
  const auto back = conv2d_backward(Tensor(4, 5, 3), x, p);
  for (double v : back.grad_input.values()) EXPECT_EQ(v, 0.0);
  for (double v : back.grads.kernel) EXPECT_EQ(v, 0.0);
  for (double v : back.grads.bias) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dBackward, BiasGradientIsSpatialSum) {
  const Tensor x = oracle::random(4, 5, 2, 6);
  const Tensor g = oracle::random(4, 5, 3, 7, -1, 1);
  const auto back = conv2d_backward(g, x, random_params(2, 3, 8));
  for (int o = 0; o < 3; ++o) {
    double s = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 5; ++xx) s += g(y, xx, o);
    EXPECT_NEAR(back.grads.bias[static_cast<std::size_t>(o)], s, 1e-12);
  }
}

TEST(Conv2dBackward, FiniteDifferences) {
  Tensor x = oracle::random(5, 4, 2, 9, -1, 1);
  auto p = random_params(2, 3, 10);
  const Tensor r = oracle::random(5, 4, 3, 11, -1, 1);
  const auto project = [&] {
    const Tensor y = conv2d_forward(x, p);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  const auto back = conv2d_backward(r, x, p);
  const auto gi = check_coordinates(x.values(), back.grad_input.values(), project, 1e-6);
  const auto gk = check_coordinates(std::span<double>(p.kernel), back.grads.kernel, project, 1e-6);
  const auto gb = check_coordinates(std::span<double>(p.bias), back.grads.bias, project, 1e-6);
  // The projection is linear in every coordinate, so per-coordinate errors are tight too.
  EXPECT_LT(gi.max_coordinate_error, 1e-5);
  EXPECT_LT(gk.max_coordinate_error, 1e-5);
  EXPECT_LT(gb.max_coordinate_error, 1e-5);
}

TEST(Relu, Forward) {
  const Tensor x(1, 3, 1, std::vector<double>{-1.0, 0.0, 2.0});
  EXPECT_EQ(relu_forward(x), Tensor(1, 3, 1, std::vector<double>{0.0, 0.0, 2.0}));
  const Tensor neg = oracle::random(3, 3, 2, 12, -2, -0.1);
  const Tensor clipped = relu_forward(neg);
  for (double v : clipped.values()) EXPECT_EQ(v, 0.0);
  const Tensor pos = oracle::random(3, 3, 2, 13, 0.1, 2);
  EXPECT_EQ(relu_forward(pos), pos);
}

TEST(Relu, Backward) {
  const Tensor g = oracle::random(3, 3, 2, 14, -1, 1);
  EXPECT_EQ(relu_backward(g, oracle::random(3, 3, 2, 15, 0.1, 1)), g);
  Tensor nonpos = oracle::random(3, 3, 2, 16, -1, 0);
  nonpos[0] = 0.0;
  const Tensor blocked = relu_backward(g, nonpos);
  for (double v : blocked.values()) EXPECT_EQ(v, 0.0);
}

TEST(Relu, FiniteDifferencesAwayFromKink) {
  Tensor x = oracle::random(4, 4, 3, 17, -1, 1);
  for (double& v : x.values())
    if (std::abs(v) <= 1e-3) v = 0.25;
  const Tensor r = oracle::random(4, 4, 3, 18, -1, 1);
  const auto value = [&] {
    const Tensor y = relu_forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  EXPECT_LT(check_coordinates(x.values(), relu_backward(r, x).values(), value, 1e-6).max_coordinate_error, 1e-5);
}

TEST(Concat, DenseBlockWidth) {
  const Tensor z(4, 4, 16);
  const Tensor u(4, 4, 3);
  EXPECT_EQ(concat_channels({&z, &z, &z, &u}).channels(), 51);
}

TEST(Concat, SingleIsIdentity) {
  const Tensor a = oracle::random(3, 2, 4, 19);
  EXPECT_EQ(concat_channels({&a}), a);
  const std::vector<int> counts{4};
  EXPECT_EQ(concat_backward(a, counts).front(), a);
}

TEST(Concat, SplitRoundTripIsBitwise) {
  const Tensor a = oracle::random(3, 2, 2, 20);
  const Tensor b = oracle::random(3, 2, 5, 21);
  const Tensor c = oracle::random(3, 2, 1, 22);
  const std::vector<int> counts{2, 5, 1};
  const auto parts = concat_backward(concat_channels({&a, &b, &c}), counts);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0], a);
  EXPECT_EQ(parts[1], b);
  EXPECT_EQ(parts[2], c);
}

TEST(Concat, ZeroCotangentAndMismatch) {
  const std::vector<int> counts{1, 2};
  for (const auto& p : concat_backward(Tensor(2, 2, 3), counts))
    for (double v : p.values()) EXPECT_EQ(v, 0.0);
  const std::vector<int> wrong{1, 1};
  EXPECT_THROW(concat_backward(Tensor(2, 2, 3), wrong), DimensionError);
  const Tensor a(2, 2, 1);
  const Tensor b(3, 2, 1);
  EXPECT_THROW(concat_channels({&a, &b}), DimensionError);
}

TEST(Concat, FiniteDifferencesThroughSum) {
  Tensor a = oracle::random(3, 3, 2, 23);
  Tensor b = oracle::random(3, 3, 3, 24);
  const Tensor r = oracle::random(3, 3, 5, 25, -1, 1);
  const auto value = [&] {
    const Tensor y = concat_channels({&a, &b});
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  const std::vector<int> counts{2, 3};
  const auto parts = concat_backward(r, counts);
  EXPECT_LT(check_coordinates(a.values(), parts[0].values(), value, 1e-6).max_coordinate_error, 1e-5);
  EXPECT_LT(check_coordinates(b.values(), parts[1].values(), value, 1e-6).max_coordinate_error, 1e-5);
}

TEST(Add, Basics) {
  const Tensor a = oracle::random(3, 4, 3, 26);
  const Tensor b = oracle::random(3, 4, 3, 27);
  EXPECT_EQ(add(a, Tensor(3, 4, 3)), a);
  EXPECT_EQ(add(a, b), add(b, a));
  EXPECT_THROW(add(a, Tensor(3, 4, 2)), DimensionError);
}

TEST(Add, GradientFlowsToBothAddends) {
  Tensor a = oracle::random(3, 3, 3, 28);
  Tensor b = oracle::random(3, 3, 3, 29);
  const Tensor r = oracle::random(3, 3, 3, 30, -1, 1);
  const auto value = [&] {
    const Tensor y = add(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  EXPECT_LT(check_coordinates(a.values(), r.values(), value, 1e-6).max_coordinate_error, 1e-5);
  EXPECT_LT(check_coordinates(b.values(), r.values(), value, 1e-6).max_coordinate_error, 1e-5);
}

TEST(GradCheck, SumOfSquares) {
  const Tensor point(1, 3, 1, std::vector<double>{1.0, 2.0, 3.0});
  const auto fn = [](const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return s;
  };
  const auto grad = [](const Tensor& t) {
    Tensor g = t;
    for (double& v : g.values()) v *= 2.0;
    return g;
  };
  EXPECT_LT(finite_difference_check(fn, grad, point, 1e-6), 1e-8);
}

TEST(GradCheck, ConstantFunction) {
  const Tensor point = oracle::random(2, 2, 2, 31);
  EXPECT_EQ(finite_difference_check([](const Tensor&) { return 4.0; },
                                    [](const Tensor& t) { return Tensor(t.height(), t.width(), t.channels()); }, point,
                                    1e-6),
            0.0);
}

TEST(GradCheck, DetectsWrongGradientAndBadStep) {
  const Tensor point(1, 2, 1, std::vector<double>{1.0, -2.0});
  const auto fn = [](const Tensor& t) { return t[0] * t[0] + t[1] * t[1]; };
  const auto wrong = [](const Tensor& t) {
    Tensor g = t;
    for (double& v : g.values()) v *= 2.2;
    return g;
  };
  EXPECT_GT(finite_difference_check(fn, wrong, point, 1e-6), 0.05);
  EXPECT_THROW(finite_difference_check(fn, wrong, point, 0.0), DomainError);
  const auto nan_fn = [](const Tensor&) { return std::nan(""); };
  EXPECT_THROW(finite_difference_check(nan_fn, wrong, point, 1e-6), NumericError);
}

TEST(GradCheck, PrimitiveSuitePasses) {
  for (const auto& e : run_primitive_checks(3)) {
    EXPECT_TRUE(e.passed()) << e.name << " " << e.max_relative_error << " at " << e.worst;
    EXPECT_GT(e.checked, 0u);
  }
}
