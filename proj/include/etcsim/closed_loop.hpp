#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "etcsim/model.hpp"
#include "etcsim/trigger.hpp"

namespace etcsim {

struct ZenoGuard {
  std::size_t max_events = 100;
  double window = 0.01;
};

struct SimConfig {
  double h = 0.01;
  double horizon = 100.0;
  double event_tol = 1e-9;
  ZenoGuard zeno_guard;
  std::size_t record_every = 10;
  // Test-only fault injection: events are logged but the measurement error
  // is not reset and the control is not updated.
  bool fault_skip_reset = false;

  void validate(double t0, double tau) const {
    if (!(h > 0.0)) throw ContractError("sim config needs h > 0");
    if (!(horizon > t0)) throw ContractError("sim config needs horizon > t0");
    if (!(h < tau)) throw ContractError("sim config needs h < tau");
    if (!(event_tol > 0.0)) throw ContractError("sim config needs event_tol > 0");
    if (!(zeno_guard.window > 0.0)) throw ContractError("zeno guard needs window > 0");
    if (zeno_guard.max_events < 2) throw ContractError("zeno guard needs max_events >= 2");
    if (record_every < 1) throw ContractError("sim config needs record_every >= 1");
  }
};

struct EventLog {
  std::vector<double> times;
  std::vector<InputVector> held_inputs;

  std::vector<double> inter_event() const {
    std::vector<double> d;
    for (std::size_t i = 1; i < times.size(); ++i) d.push_back(times[i] - times[i - 1]);
    return d;
  }
};

struct TrajectorySample {
  double t;
  StateVector x;
  InputVector u;
  double err_norm;
  double threshold;
  bool is_event;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  SolutionHistory history;
  double step = 0.0;
};

enum class Termination { completed, zeno_suspected };

inline const char* to_string(Termination t) {
  return t == Termination::completed ? "completed" : "zeno-suspected";
}

struct SimulationResult {
  Trajectory trajectory;
  EventLog events;
  Termination termination = Termination::completed;
  // Offending window when termination == zeno_suspected.
  double zeno_window_start = 0.0;
  double zeno_window_end = 0.0;
};

/// Event-triggered closed loop: the control k(x(t_i)) is held between events,
/// an event fires when the trigger margin reaches zero, and the measurement
/// error resets at every event. The first event is t0.
inline SimulationResult simulate(const SystemModel& model, const TriggerRule& rule,
                                 const InitialFunction& phi, const SimConfig& cfg) {
  rule.validate();
  cfg.validate(rule.t0, model.tau);
  if (phi.dimension() != model.n) throw ContractError("initial function dimension != model.n");
  if (!(phi.tau >= model.tau)) throw ContractError("initial function must cover the model delay");

  const double t0 = rule.t0;
  StateVector x = phi(0.0);
  StateVector x_ref = x;  // state at the last event
  InputVector u = model.feedback(x_ref);
  if (u.size() != model.m) throw ContractError("feedback output dimension != model.m");

  auto slope = [&](const SolutionHistory& hist, double t, const StateVector& xs,
                   const InputVector& us) {
    HistoryWindow w(hist, t, xs);
    StateVector d = model.rhs(t, w, us);
    if (!all_finite(d)) throw NumericalBlowup("non-finite dynamics output", t);
    return d;
  };

  SimulationResult out{
      Trajectory{{}, SolutionHistory(t0, phi, StateVector::Zero(model.n)), cfg.h}, {}};
  SolutionHistory& hist = out.trajectory.history;
  hist.set_outgoing_derivative(slope(hist, t0, x, u));
  auto& samples = out.trajectory.samples;
  EventLog& log = out.events;

  auto record = [&](double t, bool is_event) {
    const StateVector eps = x_ref - x;
    samples.push_back({t, x, u, eps.norm(), threshold(rule, t, x), is_event});
  };
  auto margin = [&](double t, const StateVector& xs) {
    return trigger_margin(rule, t, xs, measurement_error(x_ref, xs));
  };

  double t = t0;
  log.times.push_back(t0);
  log.held_inputs.push_back(u);
  record(t0, true);

  // A reset that leaves the margin at zero (a = 0 and x = 0) would fire again
  // at the same instant; report it as an accumulation point.
  auto degenerate_after_reset = [&]() {
    if (margin(t, x) >= 0.0) {
      out.termination = Termination::zeno_suspected;
      out.zeno_window_start = t;
      out.zeno_window_end = t;
      return true;
    }
    return false;
  };
  if (!cfg.fault_skip_reset && degenerate_after_reset()) return out;

  bool armed = true;
  std::size_t steps = 0;
  const double end_slack = 1e-12 * std::max(1.0, std::abs(cfg.horizon));

  while (cfg.horizon - t > end_slack) {
    double hh = std::min(cfg.h, cfg.horizon - t);
    StepResult step = rk4_step(model, hist, u, t, hh);
    const double m_end = margin(t + hh, step.x);

    if (armed && m_end >= 0.0) {
      const auto& last = hist.back();
      const double t_start = t;
      auto margin_at = [&](double s) {
        if (s == t_start) return margin(s, last.x);
        if (s == t_start + hh) return m_end;
        const StateVector xs =
            detail::hermite(last.x, last.dx_out, step.x, step.dx, hh, (s - t_start) / hh);
        return margin(s, xs);
      };
      const std::optional<double> hit = locate_event(margin_at, t, t + hh, cfg.event_tol);
      const double t_event = hit.value_or(t + hh);
      if (t_event < t + hh) step = rk4_step(model, hist, u, t, t_event - t);
      hist.append(t_event, step.x, step.dx);
      t = t_event;
      x = step.x;

      if (cfg.fault_skip_reset) {
        armed = false;
      } else {
        x_ref = x;
        u = model.feedback(x_ref);
        hist.set_outgoing_derivative(slope(hist, t, x, u));
      }
      log.times.push_back(t);
      log.held_inputs.push_back(u);
      record(t, true);

      const std::size_t n = log.times.size();
      const std::size_t k = cfg.zeno_guard.max_events;
      if (n >= k && log.times[n - 1] - log.times[n - k] <= cfg.zeno_guard.window) {
        out.termination = Termination::zeno_suspected;
        out.zeno_window_start = log.times[n - k];
        out.zeno_window_end = log.times[n - 1];
        return out;
      }
      if (!cfg.fault_skip_reset && degenerate_after_reset()) return out;
      continue;
    }

    if (m_end < 0.0) armed = true;
    hist.append(t + hh, step.x, step.dx);
    t += hh;
    x = std::move(step.x);
    ++steps;
    if (steps % cfg.record_every == 0 || cfg.horizon - t <= end_slack) record(t, false);
  }
  return out;
}

struct InterEventStats {
  std::size_t count = 0;
  std::optional<double> min;
  std::optional<double> mean;
  std::optional<double> max;
};

inline InterEventStats inter_event_stats(const EventLog& log) {
  if (log.times.empty()) throw ContractError("inter_event_stats needs a nonempty log");
  InterEventStats s;
  const std::vector<double> d = log.inter_event();
  s.count = d.size();
  if (d.empty()) return s;
  double sum = 0.0;
  for (double v : d) sum += v;
  s.min = *std::min_element(d.begin(), d.end());
  s.max = *std::max_element(d.begin(), d.end());
  s.mean = sum / static_cast<double>(d.size());
  return s;
}

/// True iff sup ||x(t)|| over the final `tail_fraction` of the simulated span
/// is below `bound`. Uses every history node in the tail.
inline bool attractivity_check(const Trajectory& traj, double tail_fraction, double bound) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw ContractError("tail_fraction must lie in (0, 1]");
  const auto& nodes = traj.history.nodes();
  const double t_start = traj.history.t0();
  const double t_end = traj.history.t_last();
  const double cut = t_end - tail_fraction * (t_end - t_start);
  double sup = 0.0;
  for (const auto& n : nodes)
    if (n.t >= cut) sup = std::max(sup, n.x.norm());
  for (const auto& s : traj.samples)
    if (s.t >= cut) sup = std::max(sup, s.x.norm());
  return sup < bound;
}

}  // namespace etcsim
