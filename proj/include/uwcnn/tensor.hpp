#pragma once

// Dense H x W x C tensor and the differentiable primitives the network is
// built from: 3x3 same-size convolution, ReLU, channel concatenation and
// elementwise addition. Every primitive has a matching backward pass.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uwcnn/error.hpp"

namespace uwcnn {

class Tensor {
public:
  Tensor() = default;

  Tensor(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
      throw DimensionError("tensor dimensions must be positive, got " + shape_string(height, width, channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Tensor(int height, int width, int channels, std::vector<double> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 1 || width < 1 || channels < 1) {
      throw DimensionError("tensor dimensions must be positive, got " + shape_string(height, width, channels));
    }
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(height, width, channels));
    }
  }

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  double& operator()(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }

  [[nodiscard]] bool same_shape(const Tensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  [[nodiscard]] std::string shape() const { return shape_string(height_, width_, channels_); }

  bool operator==(const Tensor& other) const = default;

  static std::string shape_string(int h, int w, int c) {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }

private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// 3x3 convolution parameters. Kernel layout is [ky][kx][in][out] so that each
// (ky, kx) tap is a contiguous in x out matrix.
struct ConvParams {
  static constexpr int kSize = 3;

  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> kernel;
  std::vector<double> bias;

  ConvParams() = default;
  ConvParams(int in, int out)
      : in_channels(in),
        out_channels(out),
        kernel(static_cast<std::size_t>(kSize) * kSize * in * out, 0.0),
        bias(static_cast<std::size_t>(out), 0.0) {
    if (in < 1 || out < 1) {
      throw DimensionError("conv channel counts must be positive");
    }
  }

  [[nodiscard]] std::size_t kernel_index(int ky, int kx, int ci, int co) const noexcept {
    return ((static_cast<std::size_t>(ky) * kSize + kx) * in_channels + ci) * out_channels + co;
  }
  double& weight(int ky, int kx, int ci, int co) noexcept { return kernel[kernel_index(ky, kx, ci, co)]; }
  double weight(int ky, int kx, int ci, int co) const noexcept { return kernel[kernel_index(ky, kx, ci, co)]; }

  [[nodiscard]] std::size_t parameter_count() const noexcept { return kernel.size() + bias.size(); }

  bool operator==(const ConvParams& other) const = default;
};

// Gradients of one conv layer; same layout as ConvParams.
using ConvGrads = ConvParams;

struct ConvBackward {
  Tensor grad_input;
  ConvGrads grads;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

// Range of output columns x for which input column x + kx - 1 is inside the image.
inline std::pair<int, int> valid_columns(int width, int kx) noexcept {
  return {std::max(0, 1 - kx), std::min(width, width + 1 - kx)};
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

}  // namespace detail

// Same-size cross-correlation with one pixel of zero padding on every border.
inline Tensor conv2d_forward(const Tensor& input, const ConvParams& params) {
  if (input.channels() != params.in_channels) {
    throw DimensionError("conv2d_forward: input has " + std::to_string(input.channels()) +
                         " channels, layer expects " + std::to_string(params.in_channels));
  }
  const int h = input.height();
  const int w = input.width();
  const int cin = params.in_channels;
  const int cout = params.out_channels;
  Tensor out(h, w, cout);

  for (int y = 0; y < h; ++y) {
    detail::RowMap out_row(out.data() + out.index(y, 0, 0), w, cout);
    out_row.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(params.bias.data(), cout);
    for (int ky = 0; ky < 3; ++ky) {
      const int yy = y + ky - 1;
      if (yy < 0 || yy >= h) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const auto [x0, x1] = detail::valid_columns(w, kx);
        if (x1 <= x0) continue;
        detail::ConstRowMap in_rows(input.data() + input.index(yy, x0 + kx - 1, 0), x1 - x0, cin);
        detail::ConstRowMap tap(params.kernel.data() + params.kernel_index(ky, kx, 0, 0), cin, cout);
        out_row.middleRows(x0, x1 - x0).noalias() += in_rows * tap;
      }
    }
  }
  return out;
}

inline ConvBackward conv2d_backward(const Tensor& grad_out, const Tensor& cached_input, const ConvParams& params) {
  if (cached_input.channels() != params.in_channels || grad_out.channels() != params.out_channels ||
      grad_out.height() != cached_input.height() || grad_out.width() != cached_input.width()) {
    throw DimensionError("conv2d_backward: gradient " + grad_out.shape() + " does not match input " +
                         cached_input.shape() + " for a " + std::to_string(params.in_channels) + "->" +
                         std::to_string(params.out_channels) + " layer");
  }
  const int h = cached_input.height();
  const int w = cached_input.width();
  const int cin = params.in_channels;
  const int cout = params.out_channels;

  ConvBackward result{Tensor(h, w, cin), ConvGrads(cin, cout)};
  auto& grads = result.grads;

  // Plain loop: Eigen's vectorised column sum peels by address, which would make
  // the result depend on heap alignment.
  const double* go_data = grad_out.data();
  for (std::size_t i = 0; i < grad_out.size(); ++i) grads.bias[i % static_cast<std::size_t>(cout)] += go_data[i];
  for (int y = 0; y < h; ++y) {
    detail::ConstRowMap go_row(grad_out.data() + grad_out.index(y, 0, 0), w, cout);
    for (int ky = 0; ky < 3; ++ky) {
      const int yy = y + ky - 1;
      if (yy < 0 || yy >= h) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const auto [x0, x1] = detail::valid_columns(w, kx);
        if (x1 <= x0) continue;
        const int n = x1 - x0;
        const std::size_t in_offset = cached_input.index(yy, x0 + kx - 1, 0);
        detail::ConstRowMap in_rows(cached_input.data() + in_offset, n, cin);
        detail::ConstRowMap tap(params.kernel.data() + params.kernel_index(ky, kx, 0, 0), cin, cout);
        detail::RowMap grad_tap(grads.kernel.data() + grads.kernel_index(ky, kx, 0, 0), cin, cout);
        detail::RowMap grad_in_rows(result.grad_input.data() + in_offset, n, cin);
        const auto go = go_row.middleRows(x0, n);
        grad_tap.noalias() += in_rows.transpose() * go;
        grad_in_rows.noalias() += go * tap.transpose();
      }
    }
  }
  return result;
}

inline Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

// Subgradient at exactly zero is zero.
inline Tensor relu_backward(const Tensor& grad_out, const Tensor& cached_input) {
  detail::require_same_shape(grad_out, cached_input, "relu_backward");
  Tensor grad = grad_out;
  auto in = cached_input.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(in[i] > 0.0)) g[i] = 0.0;
  }
  return grad;
}

inline Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) {
    throw DimensionError("concat_channels: no parts");
  }
  const int h = parts.front()->height();
  const int w = parts.front()->width();
  int total = 0;
  for (const Tensor* p : parts) {
    if (p->height() != h || p->width() != w) {
      throw DimensionError("concat_channels: spatial mismatch " + p->shape() + " vs " + parts.front()->shape());
    }
    total += p->channels();
  }
  Tensor out(h, w, total);
  double* dst = out.data();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  for (std::size_t px = 0; px < pixels; ++px) {
    for (const Tensor* p : parts) {
      const auto c = static_cast<std::size_t>(p->channels());
      dst = std::copy_n(p->data() + px * c, c, dst);
    }
  }
  return out;
}

inline Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
  return concat_channels(std::span<const Tensor* const>(parts.begin(), parts.size()));
}

inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat_channels(std::span<const Tensor* const>(ptrs));
}

// Splits a tensor along channels; the inverse of concat_channels.
inline std::vector<Tensor> concat_backward(const Tensor& grad_out, std::span<const int> part_channels) {
  const int total = std::accumulate(part_channels.begin(), part_channels.end(), 0);
  if (total != grad_out.channels() || part_channels.empty()) {
    throw DimensionError("concat_backward: part channels sum to " + std::to_string(total) + ", gradient has " +
                         std::to_string(grad_out.channels()));
  }
  std::vector<Tensor> parts;
  parts.reserve(part_channels.size());
  for (int c : part_channels) {
    if (c < 1) throw DimensionError("concat_backward: part channel counts must be positive");
    parts.emplace_back(grad_out.height(), grad_out.width(), c);
  }
  const double* src = grad_out.data();
  const std::size_t pixels = static_cast<std::size_t>(grad_out.height()) * grad_out.width();
  for (std::size_t px = 0; px < pixels; ++px) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto c = static_cast<std::size_t>(part_channels[i]);
      std::copy_n(src, c, parts[i].data() + px * c);
      src += c;
    }
  }
  return parts;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

// In-place accumulation used by the backward passes.
inline void add_into(Tensor& acc, const Tensor& b) {
  detail::require_same_shape(acc, b, "add_into");
  auto a = acc.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += bv[i];
}

}  // namespace uwcnn
