#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "etcsim/harness/config.hpp"
#include "etcsim/harness/output.hpp"
#include "etcsim/zeno.hpp"

namespace etcsim::harness {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int error = 1;
inline constexpr int zeno_suspected = 2;
inline constexpr int assumption = 3;
inline constexpr int audit_failed = 4;
}  // namespace exit_code

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned workers = 1;
  std::uint64_t seed = 1;
  bool fault_skip_reset = false;
};

/// Output directory: ETCSIM_OUT, then --out, then [output] dir, then ".".
inline std::filesystem::path resolve_out_dir(const std::string& cli_out, const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("ETCSIM_OUT"); env && *env) return env;
  if (!cli_out.empty()) return cli_out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return ".";
}

struct SimulationReport {
  KeyValueReport kv;
  int exit_status = exit_code::ok;
};

namespace detail {

inline SimConfig sim_config(const ExperimentConfig& cfg, const RunOptions& opt) {
  SimConfig s = cfg.sim;
  s.fault_skip_reset = opt.fault_skip_reset;
  return s;
}

inline std::optional<DecayEnvelope> try_envelope(const Experiment& ex, const ExperimentConfig& cfg) {
  if (!(ex.rule.sigma < ex.candidate.mu)) return std::nullopt;
  return decay_envelope(ex.candidate, ex.rule, ex.phi, cfg.xi);
}

}  // namespace detail

/// Runs one simulation and writes trajectory.csv, events.csv and report.txt
/// into `out`. Returns the report (also used by tests for round-trip checks).
inline SimulationReport run_simulation(const ExperimentConfig& cfg, const RunOptions& opt,
                                       const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  const Experiment ex = build_experiment(cfg);
  const SimulationResult res = simulate(ex.model, ex.rule, ex.phi, detail::sim_config(cfg, opt));
  const auto env = detail::try_envelope(ex, cfg);
  const double t0 = ex.rule.t0;

  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < ex.model.n; ++i) header.push_back("x_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < ex.model.m; ++i) header.push_back("u_" + std::to_string(i + 1));
  for (const char* h : {"err_norm", "threshold", "v", "envelope"}) header.emplace_back(h);
  {
    CsvWriter csv(out / "trajectory.csv", header);
    for (const auto& s : res.trajectory.samples) {
      std::vector<std::string> row{fmt17(s.t)};
      for (Eigen::Index i = 0; i < s.x.size(); ++i) row.push_back(fmt17(s.x[i]));
      for (Eigen::Index i = 0; i < s.u.size(); ++i) row.push_back(fmt17(s.u[i]));
      row.push_back(fmt17(s.err_norm));
      row.push_back(fmt17(s.threshold));
      row.push_back(fmt17(eval_candidate(ex.candidate, s.t, res.trajectory.history)));
      row.push_back(env ? fmt17(env->M * std::exp(-env->eta * (s.t - t0))) : std::string());
      csv.row(row);
    }
  }
  {
    CsvWriter csv(out / "events.csv", {"index", "t_i", "inter_event"});
    const auto& times = res.events.times;
    for (std::size_t i = 0; i < times.size(); ++i)
      csv.row({std::to_string(i), fmt17(times[i]), i ? fmt17(times[i] - times[i - 1]) : std::string()});
  }

  SimulationReport rep;
  auto& kv = rep.kv;
  const InterEventStats st = inter_event_stats(res.events);
  kv.add("system", cfg.system);
  kv.add("sigma", ex.rule.sigma);
  kv.add("a", ex.rule.a);
  kv.add("b", ex.rule.b);
  kv.add("mu", ex.candidate.mu);
  if (env) {
    kv.add("c", env->c);
    kv.add("eta", env->eta);
    kv.add("M", env->M);
  } else {
    kv.add("envelope", std::string("unavailable (sigma >= mu)"));
  }
  kv.add("termination", std::string(to_string(res.termination)));
  if (res.termination == Termination::zeno_suspected) {
    kv.add("zeno_window_start", res.zeno_window_start);
    kv.add("zeno_window_end", res.zeno_window_end);
  }
  kv.add("end_time", res.trajectory.history.t_last());
  kv.add("event_count", st.count);
  if (st.min) kv.add("min_inter_event", *st.min);
  if (st.mean) kv.add("mean_inter_event", *st.mean);
  if (st.max) kv.add("max_inter_event", *st.max);
  kv.write(out / "report.txt");
  rep.exit_status =
      res.termination == Termination::completed ? exit_code::ok : exit_code::zeno_suspected;
  return rep;
}

inline int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  try {
    const SimulationReport rep = run_simulation(cfg, opt, opt.out_dir);
    for (const auto& [k, v] : rep.kv.lines()) log << k << " = " << v << '\n';
    return rep.exit_status;
  } catch (const AssumptionViolation& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  } catch (const ConfigurationRejected& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  }
}

struct TableRow {
  double sigma = 0.0;
  double a = 0.0;
  double b = 0.0;
  double horizon = 0.0;
  std::size_t event_count = 0;
  std::string status;
};

/// Runs every (sigma, a, b) cell of the sweep, up to `workers` at a time.
/// Rows come back sorted by (sigma, a, b) regardless of completion order.
inline std::vector<TableRow> run_table(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (!cfg.sweep || cfg.sweep->empty()) throw ConfigError("sweep grid is empty");
  const Experiment ex = build_experiment(cfg);
  std::vector<TableRow> rows;
  for (double s : cfg.sweep->sigma)
    for (double a : cfg.sweep->a)
      for (double b : cfg.sweep->b) rows.push_back({s, a, b, cfg.sim.horizon, 0, {}});

  const SimConfig sim = detail::sim_config(cfg, opt);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      TableRow& r = rows[i];
      try {
        const TriggerRule rule = ex.make_rule(r.sigma, r.a, r.b);
        const SimulationResult res = simulate(ex.model, rule, ex.phi, sim);
        r.event_count = res.events.times.size() - 1;
        r.status = to_string(res.termination);
      } catch (const std::exception& e) {
        r.status = std::string("error: ") + e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(rows.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(rows.begin(), rows.end(), [](const TableRow& x, const TableRow& y) {
    return std::tie(x.sigma, x.a, x.b) < std::tie(y.sigma, y.a, y.b);
  });
  return rows;
}

inline int cmd_table(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  std::vector<TableRow> rows;
  try {
    rows = run_table(cfg, opt);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::error;
  } catch (const AssumptionViolation& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  } catch (const ConfigurationRejected& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  }
  std::filesystem::create_directories(opt.out_dir);
  CsvWriter csv(opt.out_dir / "table.csv", {"sigma", "a", "b", "horizon", "event_count", "status"});
  bool failed = false;
  for (const auto& r : rows) {
    csv.row({fmt17(r.sigma), fmt17(r.a), fmt17(r.b), fmt17(r.horizon), std::to_string(r.event_count), r.status});
    log << "sigma=" << r.sigma << " a=" << r.a << " b=" << r.b << " events=" << r.event_count << " "
        << r.status << '\n';
    failed = failed || r.status.rfind("error", 0) == 0;
  }
  return failed ? exit_code::error : exit_code::ok;
}

struct CertificateOutcome {
  std::optional<ZenoCertificate> certificate;
  std::string failure;  // failed inequality or flag, empty when valid
  KeyValueReport kv;
};

inline CertificateOutcome run_zeno_bound(const ExperimentConfig& cfg) {
  CertificateOutcome out;
  auto& kv = out.kv;
  const Experiment ex = [&] {
    if (cfg.system != "example2") return build_experiment(cfg);
    // The certificate question is structural for example 2; build the model
    // even when mu <= 0 so the report can state why no bound exists.
    ExperimentConfig c = cfg;
    c.example2.allow_nonpositive_mu = true;
    return build_experiment(c);
  }();
  kv.add("system", cfg.system);
  kv.add("sigma", ex.rule.sigma);
  kv.add("a", ex.rule.a);
  kv.add("b", ex.rule.b);
  kv.add("mu", ex.candidate.mu);
  try {
    ZenoCertificate cert = build_certificate(ex.model, ex.candidate, ex.rule, ex.phi, ex.L1);
    kv.add("L1", cert.L1);
    kv.add("L2", cert.L2);
    kv.add("L3", cert.L3);
    if (cert.valid()) {
      kv.add("c", cert.envelope.c);
      kv.add("eta", cert.envelope.eta);
      kv.add("M", cert.envelope.M);
      kv.add("M_normalized", cert.envelope.M / ex.scale);
      kv.add("lambda1", *cert.lambda1);
      kv.add("lambda2", *cert.lambda2);
      kv.add("Tstar", *cert.Tstar);
    }
    const auto& h = cert.hypotheses;
    auto mark = [](bool ok) { return std::string(ok ? "pass" : "fail"); };
    kv.add("hypothesis sigma < mu", mark(h.sigma_lt_mu));
    kv.add("hypothesis a > 0", mark(h.a_positive));
    kv.add("hypothesis b < mu - sigma", mark(h.b_lt_mu_minus_sigma));
    kv.add("hypothesis alpha1^-1 Lipschitz at zero", mark(h.alpha1_inverse_lipschitz_at_zero));
    out.failure = cert.failure;
    out.certificate = std::move(cert);
  } catch (const AssumptionViolation& e) {
    out.failure = e.inequality();
  }
  kv.add("valid", std::string(out.failure.empty() ? "true" : "false"));
  if (!out.failure.empty()) kv.add("failure", out.failure);
  return out;
}

inline int cmd_zeno_bound(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  CertificateOutcome out;
  try {
    out = run_zeno_bound(cfg);
  } catch (const AssumptionViolation& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  }
  std::filesystem::create_directories(opt.out_dir);
  out.kv.write(opt.out_dir / "certificate.txt");
  for (const auto& [k, v] : out.kv.lines()) log << k << " = " << v << '\n';
  return out.failure.empty() ? exit_code::ok : exit_code::assumption;
}

struct VerifyOutcome {
  ViolationReport violations;
  Termination termination = Termination::completed;
  std::optional<double> Tstar;
};

/// Simulates, then audits dissipation, the decay envelope, the dwell-time
/// certificate (when its hypotheses hold) and the candidate sandwich bounds.
inline VerifyOutcome run_verify(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Experiment ex = build_experiment(cfg);
  if (!(ex.rule.sigma < ex.candidate.mu))
    throw AssumptionViolation("sigma < mu", "sigma=" + std::to_string(ex.rule.sigma) +
                                                ", mu=" + std::to_string(ex.candidate.mu));
  const DecayEnvelope env = decay_envelope(ex.candidate, ex.rule, ex.phi, cfg.xi);
  const SimulationResult res = simulate(ex.model, ex.rule, ex.phi, detail::sim_config(cfg, opt));

  VerifyOutcome out;
  out.termination = res.termination;
  auto& items = out.violations.items;
  if (res.termination == Termination::zeno_suspected)
    items.push_back({"zeno-guard", res.zeno_window_end, res.zeno_window_start, res.zeno_window_end});

  double vmax = 0.0;
  for (double v : candidate_along(ex.candidate, res.trajectory)) vmax = std::max(vmax, v);
  for (auto& v : verify_dissipation(ex.candidate, res.trajectory, cfg.verify.dissipation_rel_tol * vmax).items)
    items.push_back(v);
  for (auto& v : envelope_check(ex.candidate, env, res.trajectory, cfg.verify.envelope_tol).items)
    items.push_back(v);

  if (ex.rule.a > 0.0 && ex.rule.b < ex.candidate.mu - ex.rule.sigma) {
    const ZenoCertificate cert = build_certificate(ex.model, ex.candidate, ex.rule, ex.phi, ex.L1);
    if (cert.valid()) {
      out.Tstar = cert.Tstar;
      const auto& times = res.events.times;
      for (std::size_t i = 1; i < times.size(); ++i) {
        const double gap = times[i] - times[i - 1];
        if (gap < *cert.Tstar) items.push_back({"dwell-time", times[i], gap, *cert.Tstar});
      }
    }
  }

  const SandwichReport sw = check_sandwich(ex.candidate, ex.model.n, cfg.verify.sandwich_probes, opt.seed);
  if (sw.violations) items.push_back({"sandwich:" + sw.first_failure, 0.0, double(sw.violations), 0.0});
  return out;
}

inline int cmd_verify(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  VerifyOutcome out;
  try {
    out = run_verify(cfg, opt);
  } catch (const AssumptionViolation& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  } catch (const ConfigurationRejected& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::assumption;
  }
  std::filesystem::create_directories(opt.out_dir);
  CsvWriter csv(opt.out_dir / "violations.csv", {"audit", "t", "lhs", "rhs"});
  for (const auto& v : out.violations.items) csv.row({v.audit, fmt17(v.t), fmt17(v.lhs), fmt17(v.rhs)});
  log << "termination = " << to_string(out.termination) << '\n';
  if (out.Tstar) log << "Tstar = " << fmt17(*out.Tstar) << '\n';
  log << "violations = " << out.violations.size() << '\n';
  return out.violations.empty() ? exit_code::ok : exit_code::audit_failed;
}

}  // namespace etcsim::harness
