#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

// `relative_error` is ||analytic - numeric|| / max(||analytic||, ||numeric||)
// over the probed coordinates. Per-coordinate ratios are kept for diagnostics
// only: on components many orders below the largest one the central
// difference is dominated by rounding in the function value (~u*|f|/eps).
struct GradCheckResult {
  double relative_error = 0.0;
  double max_coordinate_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Accumulates the squared norms behind GradCheckResult::relative_error.
struct NormAccumulator {
  double diff = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;

  void add(double a, double n) {
    diff += (a - n) * (a - n);
    analytic += a * a;
    numeric += n * n;
  }
  [[nodiscard]] double relative() const {
    const double scale = std::max({analytic, numeric, 1e-24});
    return std::sqrt(diff / scale);
  }
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / scale;
}

// Compares analytic[i] against the central difference of value() in the
// coordinate values[i], for every i in `indices`. The coordinate is restored
// after each probe. value() must read `values` through whatever it closes over.
template <class ValueFn>
GradCheckResult check_coordinates(std::span<double> values, std::span<const double> analytic,
                                  std::span<const std::size_t> indices, ValueFn&& value, double eps) {
  if (!(eps > 0.0)) {
    throw DomainError("finite difference step must be positive");
  }
  if (analytic.size() != values.size()) {
    throw DimensionError("analytic gradient length does not match the probed values");
  }
  GradCheckResult result;
  NormAccumulator norms;
  for (std::size_t i : indices) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double plus = value();
    values[i] = saved - eps;
    const double minus = value();
    values[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("non-finite function value while probing coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    norms.add(analytic[i], numeric);
    const double err = relative_error(analytic[i], numeric);
    if (result.checked == 0 || err > result.max_coordinate_error) {
      result.max_coordinate_error = err;
      result.worst_index = i;
    }
    ++result.checked;
  }
  result.relative_error = norms.relative();
  return result;
}

template <class ValueFn>
GradCheckResult check_coordinates(std::span<double> values, std::span<const double> analytic, ValueFn&& value,
                                  double eps) {
  std::vector<std::size_t> all(values.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return check_coordinates(values, analytic, all, std::forward<ValueFn>(value), eps);
}

// `fn(point)` returns the scalar value; `grad(point)` its analytic gradient.
// Returns the norm-wise relative error over all components of `point`.
template <class ValueFn, class GradFn>
double finite_difference_check(ValueFn&& fn, GradFn&& grad, const Tensor& point, double eps) {
  Tensor probe = point;
  const Tensor analytic = grad(probe);
  if (!analytic.same_shape(point)) {
    throw DimensionError("analytic gradient shape " + analytic.shape() + " differs from point " + point.shape());
  }
  return check_coordinates(probe.values(), analytic.values(), [&] { return fn(probe); }, eps).relative_error;
}

}  // namespace uwcnn
