#pragma once

// Full-reference metrics on the 8-bit scale: MSE, PSNR and single-scale SSIM
// (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255) computed on
// luma. Deliberately independent of the training loss, which uses a different
// window and constants.

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/imageio.hpp"
#include "uwcnn/parallel.hpp"

namespace uwcnn {

// PSNR reported for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

namespace detail {

inline void require_same_dims(const Image8& a, const Image8& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw DimensionError(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                         ")");
  }
}

inline std::vector<double> luma255(const Image8& img) {
  std::vector<double> g(static_cast<std::size_t>(img.height) * img.width);
  for (std::size_t px = 0; px < g.size(); ++px) {
    if (img.channels == 1) {
      g[px] = img.data[px];
    } else {
      g[px] = 0.299 * img.data[px * 3] + 0.587 * img.data[px * 3 + 1] + 0.114 * img.data[px * 3 + 2];
    }
  }
  return g;
}

inline std::array<double, 121> gaussian_window() {
  std::array<double, 121> w{};
  double sum = 0.0;
  for (int y = 0; y < 11; ++y) {
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5;
      const double dx = x - 5;
      w[static_cast<std::size_t>(y * 11 + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      sum += w[static_cast<std::size_t>(y * 11 + x)];
    }
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

inline double mse_metric(const Image8& a, const Image8& b) {
  detail::require_same_dims(a, b, "mse_metric");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline double psnr_metric(const Image8& a, const Image8& b) { return psnr_from_mse(mse_metric(a, b)); }

inline double ssim_metric(const Image8& a, const Image8& b) {
  detail::require_same_dims(a, b, "ssim_metric");
  constexpr int kWin = 11;
  if (a.height < kWin || a.width < kWin) {
    throw DimensionError("ssim_metric: images must be at least 11x11");
  }
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  static const auto window = detail::gaussian_window();
  const auto x = detail::luma255(a);
  const auto y = detail::luma255(b);
  const int w = a.width;
  double total = 0.0;
  std::size_t count = 0;
  for (int py = 0; py + kWin <= a.height; ++py) {
    for (int px = 0; px + kWin <= w; ++px) {
      double mx = 0.0;
      double my = 0.0;
      for (int dy = 0; dy < kWin; ++dy) {
        for (int dx = 0; dx < kWin; ++dx) {
          const double k = window[static_cast<std::size_t>(dy * kWin + dx)];
          const std::size_t i = static_cast<std::size_t>(py + dy) * w + (px + dx);
          mx += k * x[i];
          my += k * y[i];
        }
      }
      double vx = 0.0;
      double vy = 0.0;
      double cxy = 0.0;
      for (int dy = 0; dy < kWin; ++dy) {
        for (int dx = 0; dx < kWin; ++dx) {
          const double k = window[static_cast<std::size_t>(dy * kWin + dx)];
          const std::size_t i = static_cast<std::size_t>(py + dy) * w + (px + dx);
          const double ex = x[i] - mx;
          const double ey = y[i] - my;
          vx += k * ex * ex;
          vy += k * ey * ey;
          cxy += k * ex * ey;
        }
      }
      const double lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
      const double cs = (2.0 * cxy + c2) / (vx + vy + c2);
      total += lum * cs;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

struct PairMetrics {
  std::string path;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<PairMetrics> per_image;
};

inline PairMetrics evaluate_pair(const Image8& enhanced, const Image8& truth, std::string path = {}) {
  const double mse = mse_metric(enhanced, truth);
  return {std::move(path), mse, psnr_from_mse(mse), ssim_metric(enhanced, truth)};
}

// Arithmetic means of the per-image values, in input order.
inline MetricReport aggregate(std::vector<PairMetrics> pairs) {
  MetricReport r;
  r.per_image = std::move(pairs);
  if (r.per_image.empty()) return r;
  for (const auto& p : r.per_image) {
    r.mse += p.mse;
    r.psnr += p.psnr;
    r.ssim += p.ssim;
  }
  const auto n = static_cast<double>(r.per_image.size());
  r.mse /= n;
  r.psnr /= n;
  r.ssim /= n;
  return r;
}

// The enhanced output of entry e is expected at enhanced_dir / filename(e.first).
inline MetricReport evaluate_pairs(const DatasetManifest& manifest, const fs::path& enhanced_dir, int threads = 1) {
  std::string missing;
  for (const auto& e : manifest.entries) {
    for (const fs::path& p : {enhanced_dir / fs::path(e.first).filename(), manifest.resolve(e.second)}) {
      if (!fs::exists(p)) missing += "\n  " + p.string();
    }
  }
  if (!missing.empty()) throw IoError("missing files:" + missing);

  std::vector<PairMetrics> pairs(manifest.entries.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    pairs[i] = evaluate_pair(read_image8(enhanced_dir / fs::path(e.first).filename()),
                             read_image8(manifest.resolve(e.second)), e.first);
  });
  return aggregate(std::move(pairs));
}

inline std::string format_report(const MetricReport& report) {
  std::string out;
  char line[512];
  for (const auto& p : report.per_image) {
    std::snprintf(line, sizeof line, "%s\t%.6f\t%.6f\t%.6f\n", p.path.c_str(), p.mse, p.psnr, p.ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "MEAN\t%.6f\t%.6f\t%.6f\n", report.mse, report.psnr, report.ssim);
  out += line;
  return out;
}

}  // namespace uwcnn
