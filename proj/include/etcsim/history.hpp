#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "etcsim/errors.hpp"

namespace etcsim {

using StateVector = Eigen::VectorXd;
using InputVector = Eigen::VectorXd;

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

namespace detail {

inline std::string window_text(double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << "[" << lo << ", " << hi << "]";
  return os.str();
}

// Cubic Hermite basis on the unit interval, scaled by segment width `h`.
inline StateVector hermite(const StateVector& x0, const StateVector& d0,
                           const StateVector& x1, const StateVector& d1,
                           double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * x0 + (h10 * h) * d0 + h01 * x1 + (h11 * h) * d1;
}

}  // namespace detail

/// Initial function on [-tau, 0].
struct InitialFunction {
  std::function<StateVector(double)> evaluator;
  double tau = 0.0;

  StateVector operator()(double s) const { return evaluator(s); }
  Eigen::Index dimension() const { return evaluator(0.0).size(); }

  static InitialFunction constant(StateVector value, double tau) {
    return {[v = std::move(value)](double) { return v; }, tau};
  }
  static InitialFunction constant(double value, double tau) {
    return constant(StateVector::Constant(1, value), tau);
  }

  /// Sampled sup norm over [-tau, 0].
  double sup_norm(int samples = 10001) const {
    double best = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double s = -tau + tau * static_cast<double>(i) / (samples - 1);
      best = std::max(best, evaluator(s).norm());
    }
    return best;
  }

  /// Sampled continuity check: consecutive grid values may not jump by more
  /// than `jump_tol`.
  bool looks_continuous(int samples = 10001, double jump_tol = 1e-3) const {
    StateVector prev = evaluator(-tau);
    for (int i = 1; i < samples; ++i) {
      const double s = -tau + tau * static_cast<double>(i) / (samples - 1);
      StateVector cur = evaluator(s);
      if (!all_finite(cur) || (cur - prev).norm() > jump_tol) return false;
      prev = std::move(cur);
    }
    return true;
  }
};

/// Dense record of x(t) on [t0 - tau, t_last].
///
/// Each node stores the state and two derivatives: `dx_in` is the slope at
/// the right end of the segment ending at the node, `dx_out` the slope at the
/// left end of the segment starting there. They differ only where the held
/// input jumps (event times).
class SolutionHistory {
 public:
  struct Node {
    double t;
    StateVector x;
    StateVector dx_in;
    StateVector dx_out;
  };

  SolutionHistory(double t0, InitialFunction initial, const StateVector& dx0)
      : initial_(std::move(initial)) {
    if (!(initial_.tau > 0.0)) throw ContractError("initial function needs tau > 0");
    StateVector x0 = initial_(0.0);
    if (x0.size() != dx0.size())
      throw ContractError("initial state and derivative dimensions differ");
    if (!all_finite(x0) || !all_finite(dx0))
      throw ContractError("initial state must be finite");
    nodes_.push_back({t0, std::move(x0), dx0, dx0});
  }

  double t0() const { return nodes_.front().t; }
  double t_last() const { return nodes_.back().t; }
  double tau() const { return initial_.tau; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& back() const { return nodes_.back(); }
  const InitialFunction& initial() const { return initial_; }

  void append(double t, StateVector x, StateVector dx) {
    if (!(t > t_last()))
      throw ContractError("history node times must be strictly increasing");
    if (x.size() != nodes_.back().x.size() || dx.size() != x.size())
      throw ContractError("history node dimension mismatch");
    if (!all_finite(x) || !all_finite(dx))
      throw NumericalBlowup("non-finite state appended to history", t);
    StateVector out = dx;
    nodes_.push_back({t, std::move(x), std::move(dx), std::move(out)});
  }

  /// Replace the outgoing slope of the last node (held input changed there).
  void set_outgoing_derivative(StateVector dx) {
    if (dx.size() != nodes_.back().x.size())
      throw ContractError("derivative dimension mismatch");
    nodes_.back().dx_out = std::move(dx);
  }

  /// x(t) for t in [t0 - tau, t_last].
  StateVector query(double t) const {
    const double lo = t0() - tau();
    if (!(t >= lo && t <= t_last())) {
      throw RangeError("history query at t=" + std::to_string(t) +
                       " outside valid window " + detail::window_text(lo, t_last()));
    }
    return eval_inside(t);
  }

  /// Like query(), but times past t_last are served by extrapolating the
  /// final Hermite segment (or the outgoing slope when the last node carries
  /// an input jump).
  StateVector query_extrapolated(double t) const {
    if (t <= t_last()) return query(t);
    const Node& last = nodes_.back();
    if (nodes_.size() < 2 || last.dx_in != last.dx_out)
      return last.x + (t - last.t) * last.dx_out;
    const Node& prev = nodes_[nodes_.size() - 2];
    const double h = last.t - prev.t;
    return detail::hermite(prev.x, prev.dx_out, last.x, last.dx_in, h, (t - prev.t) / h);
  }

  /// Index k of the segment [t_k, t_{k+1}] containing t (t0 <= t <= t_last).
  std::size_t segment_index(double t) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](double v, const Node& n) { return v < n.t; });
    std::size_t k = static_cast<std::size_t>(it - nodes_.begin());
    return k == 0 ? 0 : k - 1;
  }

  /// Hermite interpolant of segment k evaluated at t.
  StateVector segment_eval(std::size_t k, double t) const {
    const Node& a = nodes_[k];
    if (t == a.t) return a.x;
    const Node& b = nodes_[k + 1];
    if (t == b.t) return b.x;
    const double h = b.t - a.t;
    return detail::hermite(a.x, a.dx_out, b.x, b.dx_in, h, (t - a.t) / h);
  }

  /// sup over s in [-tau, 0] of ||x(t + s)||, sampled at nodes and at the
  /// initial function on a grid.
  double window_sup_norm(double t, int initial_samples = 1001) const {
    double best = 0.0;
    const double lo = t - tau();
    if (lo < t0()) {
      const double hi = std::min(t, t0());
      for (int i = 0; i < initial_samples; ++i) {
        const double s = lo + (hi - lo) * i / (initial_samples - 1);
        best = std::max(best, initial_(s - t0()).norm());
      }
    }
    for (const Node& n : nodes_) {
      if (n.t >= lo && n.t <= t) best = std::max(best, n.x.norm());
    }
    return best;
  }

 private:
  StateVector eval_inside(double t) const {
    if (t < t0()) return initial_(t - t0());
    const std::size_t k = segment_index(t);
    if (k + 1 >= nodes_.size()) return nodes_.back().x;
    return segment_eval(k, t);
  }

  InitialFunction initial_;
  std::vector<Node> nodes_;
};

/// The segment x_t handed to a right-hand side: `at(s)` is x(t + s) for
/// s in [-tau, 0], with `at(0)` the current (possibly intermediate-stage)
/// state.
class HistoryWindow {
 public:
  HistoryWindow(const SolutionHistory& history, double t, const StateVector& current)
      : history_(&history), t_(t), current_(&current) {}

  double t() const { return t_; }
  const StateVector& now() const { return *current_; }

  StateVector at(double s) const {
    if (s == 0.0) return *current_;
    if (s > 0.0 || s < -history_->tau() * (1.0 + 1e-12))
      throw RangeError("window lookup s=" + std::to_string(s) + " outside [-tau, 0]");
    return history_->query_extrapolated(t_ + s);
  }

 private:
  const SolutionHistory* history_;
  double t_;
  const StateVector* current_;
};

}  // namespace etcsim
