#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "etcsim/errors.hpp"

namespace etcsim {

/// A class-K comparison function with optional inverse and local Lipschitz
/// data.
struct ClassKFunction {
  std::function<double(double)> forward;
  std::function<double(double)> inverse;       // empty when not available
  std::function<double(double)> lipschitz_on;  // s_bar -> Lipschitz constant on [0, s_bar]
  bool inverse_lipschitz_at_zero = false;

  double operator()(double s) const { return forward(s); }

  /// s -> c * s.
  static ClassKFunction linear(double c) {
    if (!(c > 0.0)) throw ContractError("linear class-K function needs a positive slope");
    return {[c](double s) { return c * s; }, [c](double v) { return v / c; },
            [c](double) { return c; }, true};
  }

  /// s -> c * s^2. Its inverse sqrt(v / c) is not Lipschitz at zero.
  static ClassKFunction quadratic(double c) {
    if (!(c > 0.0)) throw ContractError("quadratic class-K function needs a positive factor");
    return {[c](double s) { return c * s * s; }, [c](double v) { return std::sqrt(v / c); },
            [c](double s_bar) { return 2.0 * c * s_bar; }, false};
  }

  /// User function. The Lipschitz constant on [0, s_bar] is estimated as the
  /// largest slope over a 10,000-point grid, inflated by 10%.
  static ClassKFunction custom(std::function<double(double)> f,
                               std::function<double(double)> inverse = {},
                               bool inverse_lipschitz_at_zero = false) {
    auto slope = [f](double s_bar) {
      constexpr int kGrid = 10000;
      if (!(s_bar > 0.0)) return 0.0;
      double best = 0.0;
      double prev = f(0.0);
      for (int i = 1; i <= kGrid; ++i) {
        const double s = s_bar * i / kGrid;
        const double cur = f(s);
        best = std::max(best, std::abs(cur - prev) / (s_bar / kGrid));
        prev = cur;
      }
      return 1.1 * best;
    };
    return {std::move(f), std::move(inverse), slope, inverse_lipschitz_at_zero};
  }
};

/// Sampled class-K check on [0, s_max]: f(0) = 0 and strictly increasing.
inline std::string check_class_k(const ClassKFunction& fn, double s_max, int samples = 1000) {
  if (fn(0.0) != 0.0) return "f(0) != 0";
  double prev = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double s = s_max * i / samples;
    const double v = fn(s);
    if (!(v > prev)) return "not strictly increasing near s=" + std::to_string(s);
    prev = v;
  }
  return {};
}

}  // namespace etcsim
