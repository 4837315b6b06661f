#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "etcsim/systems.hpp"

namespace etcsim::harness {

/// Malformed or incomplete experiment config. `line()` is 0 when the problem
/// is not tied to a line (e.g. a missing key).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Sectioned key = value text. '#' starts a comment anywhere; ';' only at
/// the start of a line, since matrix values use it as a row separator.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static IniDocument parse(std::istream& in) {
    IniDocument doc;
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = strip(raw.substr(0, raw.find('#')));
      if (line.empty() || line.front() == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header", line_no);
        section = strip(line.substr(1, line.size() - 2));
        if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name", line_no);
        doc.sections_.insert(section);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": key outside of any section", line_no);
      const std::string key = section + "." + strip(line.substr(0, eq));
      if (doc.entries_.count(key))
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'", line_no);
      doc.entries_[key] = {strip(line.substr(eq + 1)), line_no};
    }
    return doc;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::map<std::string, Entry> entries_;
  std::set<std::string> sections_;
};

struct SweepGrid {
  std::vector<double> sigma;
  std::vector<double> a;
  std::vector<double> b;
  bool empty() const { return sigma.empty() || a.empty() || b.empty(); }
};

struct VerifySettings {
  double envelope_tol = 0.05;
  double dissipation_rel_tol = 1e-3;
  std::size_t sandwich_probes = 1000;
};

struct ExperimentConfig {
  std::string system = "example1";
  Example1Preset example1;
  Example2Preset example2;
  std::string nonlinearity = "sin";
  StateVector phi;  // constant initial function
  double sigma = 0.0;
  double a = 0.0;
  double b = 1.0;
  double t0 = 0.0;
  std::optional<double> xi;
  SimConfig sim;
  std::optional<SweepGrid> sweep;
  std::string output_dir;
  VerifySettings verify;
};

namespace detail {

class Reader {
 public:
  explicit Reader(const IniDocument& doc) : doc_(doc) {}

  const IniDocument::Entry* get(const std::string& key) {
    used_.insert(key);
    return doc_.find(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const auto* e = get(key);
    if (!e) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    return parse_number(key, e->value, e->line);
  }

  std::optional<double> optional_number(const std::string& key) {
    const auto* e = get(key);
    if (!e) return std::nullopt;
    return parse_number(key, e->value, e->line);
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const auto* e = get(key);
    if (!e) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    return e->value;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto* e = get(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ConfigError(at(e->line) + "key '" + key + "' expects true/false", e->line);
  }

  std::vector<double> list(const std::string& key) {
    const auto* e = get(key);
    if (!e) return {};
    std::vector<double> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = IniDocument::strip(item);
      if (item.empty()) continue;
      out.push_back(parse_number(key, item, e->line));
    }
    return out;
  }

  /// Rows separated by ';', entries by ','.
  Eigen::MatrixXd matrix(const std::string& key) {
    const auto* e = get(key);
    if (!e) throw ConfigError("missing required key '" + key + "'");
    std::vector<std::vector<double>> rows;
    std::stringstream ss(e->value);
    std::string row;
    while (std::getline(ss, row, ';')) {
      std::vector<double> r;
      std::stringstream rs(row);
      std::string item;
      while (std::getline(rs, item, ',')) r.push_back(parse_number(key, IniDocument::strip(item), e->line));
      if (!r.empty()) rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ConfigError(at(e->line) + "key '" + key + "' has no entries", e->line);
    Eigen::MatrixXd M(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size())
        throw ConfigError(at(e->line) + "key '" + key + "' has ragged rows", e->line);
      for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
    }
    return M;
  }

  void reject_unknown() const {
    for (const auto& [key, entry] : doc_.entries()) {
      if (!used_.count(key))
        throw ConfigError(at(entry.line) + "unknown key '" + key + "'", entry.line);
    }
  }

  static std::string at(int line) { return "line " + std::to_string(line) + ": "; }

 private:
  static double parse_number(const std::string& key, const std::string& v, int line) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(at(line) + "key '" + key + "' expects a number, got '" + v + "'", line);
    }
  }

  const IniDocument& doc_;
  std::set<std::string> used_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail

/// Parses and validates an experiment config. Syntax errors, missing or
/// unknown keys and broken parameter contracts raise ConfigError; preset
/// assumptions (orderings, mu > 0) are checked when the experiment is built.
inline ExperimentConfig parse_config(std::istream& in) {
  const IniDocument doc = IniDocument::parse(in);
  detail::Reader rd(doc);
  ExperimentConfig cfg;

  cfg.system = rd.text("system.type");
  if (cfg.system == "example1") {
    auto& e = cfg.example1;
    e.B = rd.number("system.B", e.B);
    e.r = rd.number("system.r", e.r);
    e.k = rd.number("system.k", e.k);
    e.p = rd.number("lyapunov.p", e.p);
    e.q2 = rd.number("lyapunov.q2", e.q2);
    e.q1 = rd.number("lyapunov.q1", e.p * std::abs(e.B));
    const auto phi = rd.list("system.phi");
    cfg.phi = StateVector::Constant(1, phi.empty() ? 1.0 : phi.front());
    detail::require(phi.size() <= 1, "system.phi: example1 is scalar");
  } else if (cfg.system == "example2") {
    auto& e = cfg.example2;
    e = Example2Preset::default_instance();
    if (doc.find("system.A")) e.A = rd.matrix("system.A");
    if (doc.find("system.B")) e.B = rd.matrix("system.B");
    if (doc.find("system.K")) e.K = rd.matrix("system.K");
    e.L = rd.number("system.L", e.L);
    e.d = rd.number("system.d", e.d);
    e.q = rd.number("lyapunov.q", e.q);
    e.eps2 = rd.number("lyapunov.eps2", e.eps2);
    e.allow_nonpositive_mu = rd.flag("system.allow_nonpositive_mu", false);
    cfg.nonlinearity = rd.text("system.nonlinearity", std::string("sin"));
    if (cfg.nonlinearity == "sin")
      e.g = Example2Preset::sine_nonlinearity(e.L);
    else if (cfg.nonlinearity == "zero")
      e.g = [](const StateVector& x) -> StateVector { return StateVector::Zero(x.size()); };
    else
      throw ConfigError("system.nonlinearity must be 'sin' or 'zero'");
    const auto phi = rd.list("system.phi");
    cfg.phi = StateVector::Ones(e.A.rows());
    if (!phi.empty()) {
      detail::require(static_cast<Eigen::Index>(phi.size()) == e.A.rows(),
                      "system.phi must have one entry per state");
      for (std::size_t i = 0; i < phi.size(); ++i) cfg.phi[i] = phi[i];
    }
  } else {
    throw ConfigError("system.type must be 'example1' or 'example2', got '" + cfg.system + "'");
  }
  cfg.xi = rd.optional_number("lyapunov.xi");

  cfg.sigma = rd.number("rule.sigma");
  cfg.a = rd.number("rule.a");
  cfg.b = rd.number("rule.b");
  cfg.t0 = rd.number("rule.t0", 0.0);
  detail::require(cfg.sigma >= 0.0, "rule.sigma must be >= 0");
  detail::require(cfg.a >= 0.0, "rule.a must be >= 0");
  detail::require(cfg.b > 0.0, "rule.b must be > 0");

  auto& s = cfg.sim;
  s.h = rd.number("sim.h", s.h);
  s.horizon = rd.number("sim.horizon", s.horizon);
  s.event_tol = rd.number("sim.event_tol", s.event_tol);
  s.zeno_guard.max_events =
      static_cast<std::size_t>(rd.number("sim.zeno_max_events", double(s.zeno_guard.max_events)));
  s.zeno_guard.window = rd.number("sim.zeno_window", s.zeno_guard.window);
  s.record_every = static_cast<std::size_t>(rd.number("sim.record_every", double(s.record_every)));
  const double tau = cfg.system == "example1" ? cfg.example1.r : cfg.example2.d;
  try {
    s.validate(cfg.t0, tau);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  if (doc.has_section("sweep")) {
    SweepGrid g{rd.list("sweep.sigma"), rd.list("sweep.a"), rd.list("sweep.b")};
    if (!doc.find("sweep.sigma")) g.sigma = {cfg.sigma};
    if (!doc.find("sweep.a")) g.a = {cfg.a};
    if (!doc.find("sweep.b")) g.b = {cfg.b};
    for (double v : g.sigma) detail::require(v >= 0.0, "sweep.sigma entries must be >= 0");
    for (double v : g.a) detail::require(v >= 0.0, "sweep.a entries must be >= 0");
    for (double v : g.b) detail::require(v > 0.0, "sweep.b entries must be > 0");
    cfg.sweep = g;
  }

  cfg.output_dir = rd.text("output.dir", std::string());
  cfg.verify.envelope_tol = rd.number("verify.envelope_tol", cfg.verify.envelope_tol);
  cfg.verify.dissipation_rel_tol = rd.number("verify.dissipation_rel_tol", cfg.verify.dissipation_rel_tol);
  cfg.verify.sandwich_probes =
      static_cast<std::size_t>(rd.number("verify.sandwich_probes", double(cfg.verify.sandwich_probes)));

  rd.reject_unknown();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

/// Model, candidate and rule constructor assembled from a config.
struct Experiment {
  SystemModel model;
  LyapunovCandidate candidate;
  std::optional<double> L1;
  InitialFunction phi;
  double scale = 1.0;  // p for example1 (certificate quantities are reported divided by it)
  std::function<TriggerRule(double sigma, double a, double b)> make_rule;
  TriggerRule rule;
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  if (cfg.system == "example1") {
    Example1System sys = example1_build(cfg.example1);
    ex.model = std::move(sys.model);
    ex.candidate = std::move(sys.candidate);
    ex.L1 = sys.L1;
    ex.scale = cfg.example1.p;
    const double k = cfg.example1.k;
    const double t0 = cfg.t0;
    ex.make_rule = [k, t0](double s, double a, double b) { return example1_rule(s, a, b, k, t0); };
  } else {
    Example2System sys = example2_build(cfg.example2);
    ex.model = std::move(sys.model);
    ex.candidate = std::move(sys.candidate);
    const double t0 = cfg.t0;
    auto factory = sys.rule_factory;
    ex.make_rule = [factory, t0](double s, double a, double b) { return factory(s, a, b, t0); };
  }
  ex.phi = InitialFunction::constant(cfg.phi, ex.model.tau);
  ex.rule = ex.make_rule(cfg.sigma, cfg.a, cfg.b);
  return ex;
}

}  // namespace etcsim::harness
