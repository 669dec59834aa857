#pragma once

// Training objective: pixel MSE plus (1 - mean windowed SSIM) on luma, both
// with analytic gradients with respect to the prediction.

#include <cstddef>
#include <string>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

struct ScalarWithGrad {
  double value = 0.0;
  Tensor grad;
};

struct LossReport {
  double mse = 0.0;
  double ssim_loss = 0.0;
  double total = 0.0;
  Tensor grad_wrt_prediction;
};

// Uniform 13x13 window, population statistics, constants applied to [0,1] data.
struct SsimLossParams {
  int window = 13;
  double c1 = 0.02;
  double c2 = 0.03;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline ScalarWithGrad mse_loss(const Tensor& prediction, const Tensor& target) {
  detail::require_same_shape(prediction, target, "mse_loss");
  const auto p = prediction.values();
  const auto t = target.values();
  const double m = static_cast<double>(p.size());
  ScalarWithGrad out{0.0, Tensor(prediction.height(), prediction.width(), prediction.channels())};
  auto g = out.grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    out.value += d * d;
    g[i] = 2.0 * d / m;
  }
  out.value /= m;
  return out;
}

inline Tensor rgb_to_gray(const Tensor& image) {
  if (image.channels() != 3) {
    throw DimensionError("rgb_to_gray: expected 3 channels, got " + image.shape());
  }
  Tensor gray(image.height(), image.width(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      gray(y, x, 0) = kLumaR * image(y, x, 0) + kLumaG * image(y, x, 1) + kLumaB * image(y, x, 2);
    }
  }
  return gray;
}

inline Tensor rgb_to_gray_backward(const Tensor& grad_gray) {
  if (grad_gray.channels() != 1) {
    throw DimensionError("rgb_to_gray_backward: expected 1 channel, got " + grad_gray.shape());
  }
  Tensor grad(grad_gray.height(), grad_gray.width(), 3);
  for (int y = 0; y < grad.height(); ++y) {
    for (int x = 0; x < grad.width(); ++x) {
      const double g = grad_gray(y, x, 0);
      grad(y, x, 0) = kLumaR * g;
      grad(y, x, 1) = kLumaG * g;
      grad(y, x, 2) = kLumaB * g;
    }
  }
  return grad;
}

namespace detail {

// Sums over every k x k window that fits entirely; result is (h-k+1) x (w-k+1).
inline std::vector<double> box_sum_valid(const std::vector<double>& img, int h, int w, int k) {
  const int vh = h - k + 1;
  const int vw = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) s += img[static_cast<std::size_t>(y) * w + x + d];
      rows[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw, 0.0);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) s += rows[static_cast<std::size_t>(y + d) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  return out;
}

// Adjoint of box_sum_valid: out[q] = sum of coef[p] over windows p containing q.
inline std::vector<double> box_sum_adjoint(const std::vector<double>& coef, int h, int w, int k) {
  const int vh = h - k + 1;
  const int vw = w - k + 1;
  std::vector<double> cols(static_cast<std::size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - k + 1);
    const int hi = std::min(vh - 1, y);
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int p = lo; p <= hi; ++p) s += coef[static_cast<std::size_t>(p) * vw + x];
      cols[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - k + 1);
      const int hi = std::min(vw - 1, x);
      double s = 0.0;
      for (int p = lo; p <= hi; ++p) s += cols[static_cast<std::size_t>(y) * vw + p];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  return out;
}

}  // namespace detail

// Mean SSIM over all pixels whose full window fits, and its gradient with
// respect to `pred_gray`.
inline ScalarWithGrad ssim_map(const Tensor& pred_gray, const Tensor& target_gray, const SsimLossParams& params = {}) {
  detail::require_same_shape(pred_gray, target_gray, "ssim_map");
  if (pred_gray.channels() != 1) {
    throw DimensionError("ssim_map: expected single-channel images, got " + pred_gray.shape());
  }
  const int h = pred_gray.height();
  const int w = pred_gray.width();
  const int k = params.window;
  if (h < k || w < k) {
    throw DimensionError("ssim_map: image " + pred_gray.shape() + " is smaller than the " + std::to_string(k) + "x" +
                         std::to_string(k) + " window");
  }
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> x(pred_gray.values().begin(), pred_gray.values().end());
  std::vector<double> y(target_gray.values().begin(), target_gray.values().end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto sx = detail::box_sum_valid(x, h, w, k);
  const auto sy = detail::box_sum_valid(y, h, w, k);
  const auto sxx = detail::box_sum_valid(xx, h, w, k);
  const auto syy = detail::box_sum_valid(yy, h, w, k);
  const auto sxy = detail::box_sum_valid(xy, h, w, k);

  const double area = static_cast<double>(k) * k;
  const std::size_t valid = sx.size();
  std::vector<double> alpha(valid), beta(valid), gamma(valid);
  double total = 0.0;
  for (std::size_t p = 0; p < valid; ++p) {
    const double mx = sx[p] / area;
    const double my = sy[p] / area;
    const double vx = sxx[p] / area - mx * mx;
    const double vy = syy[p] / area - my * my;
    const double cxy = sxy[p] / area - mx * my;
    const double a = 2.0 * mx * my + params.c1;
    const double b = mx * mx + my * my + params.c1;
    const double c = 2.0 * cxy + params.c2;
    const double d = vx + vy + params.c2;
    const double lum = a / b;
    const double cs = c / d;
    total += lum * cs;

    const double dlum_dmx = (2.0 * my * b - 2.0 * mx * a) / (b * b);
    const double dcs_dmx = (-2.0 * my * d + 2.0 * mx * c) / (d * d);
    alpha[p] = dlum_dmx * cs + lum * dcs_dmx;  // d/d mean(x)
    beta[p] = -lum * c / (d * d);              // d/d mean(x^2)
    gamma[p] = lum * 2.0 / d;                  // d/d mean(xy)
  }

  const auto ga = detail::box_sum_adjoint(alpha, h, w, k);
  const auto gb = detail::box_sum_adjoint(beta, h, w, k);
  const auto gc = detail::box_sum_adjoint(gamma, h, w, k);
  ScalarWithGrad out{total / static_cast<double>(valid), Tensor(h, w, 1)};
  const double scale = 1.0 / (area * static_cast<double>(valid));
  auto g = out.grad.values();
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = scale * (ga[i] + 2.0 * x[i] * gb[i] + y[i] * gc[i]);
  }
  return out;
}

inline ScalarWithGrad ssim_loss(const Tensor& prediction, const Tensor& target, const SsimLossParams& params = {}) {
  detail::require_same_shape(prediction, target, "ssim_loss");
  auto s = ssim_map(rgb_to_gray(prediction), rgb_to_gray(target), params);
  for (double& v : s.grad.values()) v = -v;
  return {1.0 - s.value, rgb_to_gray_backward(s.grad)};
}

// MSE + SSIM loss with a 1:1 weighting. With use_ssim false the SSIM term is
// neither computed nor reported (ssim_loss stays 0).
inline LossReport total_loss(const Tensor& prediction, const Tensor& target, bool use_ssim = true,
                             const SsimLossParams& params = {}) {
  auto mse = mse_loss(prediction, target);
  LossReport report;
  report.mse = mse.value;
  report.grad_wrt_prediction = std::move(mse.grad);
  if (use_ssim) {
    auto s = ssim_loss(prediction, target, params);
    report.ssim_loss = s.value;
    add_into(report.grad_wrt_prediction, s.grad);
  }
  report.total = report.mse + report.ssim_loss;
  return report;
}

}  // namespace uwcnn
