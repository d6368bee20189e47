#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hnoma/asymptotics.hpp"
#include "hnoma/closed_form.hpp"
#include "hnoma/core_model.hpp"
#include "hnoma/estimate.hpp"
#include "hnoma/monte_carlo.hpp"
#include "hnoma/quadrature.hpp"

namespace hnoma {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDisagreement = 1;
inline constexpr int kExitConfig = 2;

// Joint-limit values below this SNR are labelled as extrapolated.
inline constexpr double kAsymptoticValidityDb = 25.0;

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("HNOMA_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("HNOMA_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

// A scenario in the units of the figures: SNR = rho_n in dB and the ratio
// rho_n / rho_m.
struct Scenario {
  SystemConfig base;
  double snr_db = 20.0;
  double ratio = 5.0;

  SystemConfig resolve() const { return with_snr(base, snr_db, ratio); }
};

enum class SweepAxis { snr_db, beta, rate_m, rho_ratio };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::snr_db: return "snr_db";
    case SweepAxis::beta: return "beta";
    case SweepAxis::rate_m: return "R_m";
    case SweepAxis::rho_ratio: return "rho_ratio";
  }
  return "?";
}

inline SweepAxis parse_axis(std::string_view s) {
  if (s == "snr_db" || s == "snr") return SweepAxis::snr_db;
  if (s == "beta") return SweepAxis::beta;
  if (s == "R_m" || s == "rm" || s == "rate_m") return SweepAxis::rate_m;
  if (s == "rho_ratio" || s == "ratio") return SweepAxis::rho_ratio;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

inline Scenario with_axis(Scenario s, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::snr_db: s.snr_db = v; break;
    case SweepAxis::beta: s.base.beta = v; break;
    case SweepAxis::rate_m: s.base.rate_m = v; break;
    case SweepAxis::rho_ratio: s.ratio = v; break;
  }
  return s;
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::snr_db;
  double start = 0.0;
  double stop = 40.0;
  int steps = 41;
  Scenario fixed;
  std::vector<Method> methods{Method::closed_form};
  std::vector<Scheme> schemes{Scheme::hsic_hybrid};
  SamplerSpec sampler;

  void validate() const {
    if (steps < 2) throw ConfigError("sweep needs steps >= 2");
    if (!(start < stop)) throw ConfigError("sweep needs start < stop");
    if (methods.empty()) throw ConfigError("sweep needs at least one method");
    if (schemes.empty()) throw ConfigError("sweep needs at least one scheme");
    for (Scheme s : schemes) {
      if (s == Scheme::oma) throw ConfigError("OMA is the reference, not a sweep scheme");
    }
    sampler.validate();
    for (double v : grid()) with_axis(fixed, axis, v).resolve().validate();
  }

  std::vector<double> grid() const {
    std::vector<double> g(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) g[i] = start + (stop - start) * i / (steps - 1);
    g.back() = stop;
    return g;
  }
};

// One (scheme, method) result inside a row.
struct SweepCell {
  Scheme scheme = Scheme::hsic_hybrid;
  Method method = Method::closed_form;
  double probability = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = 0.0;
  std::vector<std::string> flags;
};

struct SweepRow {
  double axis_value = 0.0;
  std::optional<RegimeClass> regime;
  std::vector<SweepCell> cells;
};

namespace detail {

inline std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

inline std::string error_flag(const std::exception& e) {
  if (dynamic_cast<const SingularRegime*>(&e)) return "singular";
  if (dynamic_cast<const NonConvergence*>(&e)) return "error:nonconvergence";
  if (dynamic_cast<const DomainError*>(&e)) return "error:domain";
  return "error:compute";
}

}  // namespace detail

// Evaluates one method for one scheme. Closed form falls back to quadrature in
// singular regimes and says so in the flags.
inline SweepCell evaluate_cell(const Scenario& sc, Scheme scheme, Method method, const SamplerSpec& sampler) {
  const SystemConfig cfg = sc.resolve();
  SweepCell cell;
  cell.scheme = scheme;
  cell.method = method;
  if (method != Method::monte_carlo && scheme != Scheme::hsic_hybrid) {
    cell.flags.push_back("unsupported");
    return cell;
  }
  try {
    ProbabilityEstimate e;
    switch (method) {
      case Method::monte_carlo: e = mc_probability(cfg, scheme, sampler); break;
      case Method::quadrature: e = ptilde_quadrature(cfg); break;
      case Method::asymptotic:
        e = ptilde_joint_limit(cfg);
        if (sc.snr_db < kAsymptoticValidityDb) cell.flags.push_back("extrapolated");
        break;
      case Method::closed_form:
        try {
          e = ptilde_closed(cfg).estimate;
        } catch (const SingularRegime&) {
          cell.flags.push_back("singular");
          e = ptilde_quadrature(cfg);
        }
        break;
    }
    cell.probability = e.value;
    cell.stderr_ = e.std_error;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    cell.flags.push_back(detail::error_flag(ex));
  }
  return cell;
}

inline SweepRow evaluate_row(const SweepSpec& spec, double v) {
  const Scenario sc = with_axis(spec.fixed, spec.axis, v);
  SweepRow row;
  row.axis_value = v;
  row.regime = classify_regime(sc.resolve());
  for (Scheme s : spec.schemes) {
    for (Method m : spec.methods) {
      if (m != Method::monte_carlo && s != Scheme::hsic_hybrid) continue;
      row.cells.push_back(evaluate_cell(sc, s, m, spec.sampler));
    }
  }
  return row;
}

// Every row reuses the sampler seed, so MC columns share random numbers along
// the axis.
inline std::vector<SweepRow> run_sweep_rows(const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (double v : spec.grid()) rows.push_back(evaluate_row(spec, v));
  return rows;
}

// Flat record: one line of the CSV / one object of the JSON mirror.
struct SweepRecord {
  std::string axis;
  double axis_value = 0.0;
  std::string scheme;
  std::string method;
  double probability = 0.0;
  double stderr_ = 0.0;
  std::string regime_table;
  int regime_column = 0;
  std::string flags;

  bool operator==(const SweepRecord& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return axis == o.axis && same(axis_value, o.axis_value) && scheme == o.scheme && method == o.method &&
           same(probability, o.probability) && same(stderr_, o.stderr_) && regime_table == o.regime_table &&
           regime_column == o.regime_column && flags == o.flags;
  }
};

inline constexpr std::string_view kCsvHeader =
    "axis,axis_value,scheme,method,probability,stderr,regime_table,regime_column,flags";

inline std::vector<SweepRecord> flatten(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::vector<SweepRecord> out;
  for (const auto& row : rows) {
    for (const auto& c : row.cells) {
      SweepRecord r;
      r.axis = std::string(to_string(axis));
      r.axis_value = row.axis_value;
      r.scheme = std::string(to_string(c.scheme));
      r.method = std::string(to_string(c.method));
      r.probability = c.probability;
      r.stderr_ = c.stderr_;
      if (row.regime) {
        r.regime_table = std::string(to_string(row.regime->table));
        r.regime_column = row.regime->column;
      }
      r.flags = detail::join_flags(c.flags);
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<SweepRecord>& recs) {
  out << kCsvHeader << '\n';
  for (const auto& r : recs) {
    out << r.axis << ',' << detail::format_double(r.axis_value) << ',' << r.scheme << ',' << r.method << ','
        << detail::format_double(r.probability) << ',' << detail::format_double(r.stderr_) << ',' << r.regime_table
        << ',' << r.regime_column << ',' << r.flags << '\n';
  }
}

inline std::vector<SweepRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error("unexpected CSV header");
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 9) throw Error("CSV row has " + std::to_string(f.size()) + " fields");
    SweepRecord r;
    r.axis = f[0];
    r.axis_value = detail::parse_double(f[1]);
    r.scheme = f[2];
    r.method = f[3];
    r.probability = detail::parse_double(f[4]);
    r.stderr_ = detail::parse_double(f[5]);
    r.regime_table = f[6];
    r.regime_column = std::stoi(f[7]);
    r.flags = f[8];
    out.push_back(std::move(r));
  }
  return out;
}

// NaN probabilities (failed cells) are written as null.
inline nlohmann::json to_json(const std::vector<SweepRecord>& recs) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : recs) {
    arr.push_back({{"axis", r.axis},
                   {"axis_value", num(r.axis_value)},
                   {"scheme", r.scheme},
                   {"method", r.method},
                   {"probability", num(r.probability)},
                   {"stderr", num(r.stderr_)},
                   {"regime_table", r.regime_table},
                   {"regime_column", r.regime_column},
                   {"flags", r.flags}});
  }
  return arr;
}

inline std::vector<SweepRecord> from_json(const nlohmann::json& arr) {
  auto num = [](const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
  };
  std::vector<SweepRecord> out;
  for (const auto& o : arr) {
    SweepRecord r;
    r.axis = o.at("axis").get<std::string>();
    r.axis_value = num(o.at("axis_value"));
    r.scheme = o.at("scheme").get<std::string>();
    r.method = o.at("method").get<std::string>();
    r.probability = num(o.at("probability"));
    r.stderr_ = num(o.at("stderr"));
    r.regime_table = o.at("regime_table").get<std::string>();
    r.regime_column = o.at("regime_column").get<int>();
    r.flags = o.at("flags").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

enum class OutputFormat { csv, json };

inline OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("unknown format '" + std::string(s) + "'");
}

inline void write_records(std::ostream& out, const std::vector<SweepRecord>& recs, OutputFormat fmt) {
  if (fmt == OutputFormat::csv) {
    write_csv(out, recs);
  } else {
    out << to_json(recs).dump(2) << '\n';
  }
}

inline std::vector<SweepRecord> run_sweep(const SweepSpec& spec, const std::string& path,
                                          OutputFormat fmt = OutputFormat::csv) {
  const auto recs = flatten(spec.axis, run_sweep_rows(spec));
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_records(out, recs, fmt);
  if (!out) throw Error("write to '" + path + "' failed");
  return recs;
}

// ---- key = value scenario files ----

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string val = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  return parse_key_values(in);
}

namespace detail {

inline double kv_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' is not a number: '" + v + "'");
  }
}

inline int kv_int(const std::string& key, const std::string& v) {
  const double d = kv_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("'" + key + "' is not an integer: '" + v + "'");
  return static_cast<int>(d);
}

// Accepts "1/3" as well as decimals.
inline double kv_fraction(const std::string& key, const std::string& v) {
  if (const auto slash = v.find('/'); slash != std::string::npos) {
    return kv_double(key, trim(v.substr(0, slash))) / kv_double(key, trim(v.substr(slash + 1)));
  }
  return kv_double(key, v);
}

}  // namespace detail

// Keys: users, m, n, beta, rm, ratio, snr_db, samples, seed, axis, start, stop,
// steps, methods, schemes, series, series_values. Unknown keys are rejected.
struct ScenarioFile {
  SweepSpec sweep;
  std::string series_key;  // a scenario key varied across curves, or empty
  std::vector<double> series_values;
  std::string title;
};

inline void apply_key(ScenarioFile& f, const std::string& key, const std::string& v) {
  auto& s = f.sweep;
  auto& b = s.fixed.base;
  if (key == "users") b.users = detail::kv_int(key, v);
  else if (key == "m") b.m = detail::kv_int(key, v);
  else if (key == "n") b.n = detail::kv_int(key, v);
  else if (key == "beta") b.beta = detail::kv_fraction(key, v);
  else if (key == "rm") b.rate_m = detail::kv_double(key, v);
  else if (key == "ratio") s.fixed.ratio = detail::kv_double(key, v);
  else if (key == "snr_db") s.fixed.snr_db = detail::kv_double(key, v);
  else if (key == "samples") {
    const double d = detail::kv_double(key, v);
    if (!(d >= 1.0)) throw ConfigError("samples must be >= 1");
    s.sampler.n_samples = static_cast<std::uint64_t>(d);
  } else if (key == "seed") {
    try {
      s.sampler.seed = std::stoull(v);
    } catch (const std::exception&) {
      throw ConfigError("seed is not an unsigned integer: '" + v + "'");
    }
  } else if (key == "axis") s.axis = parse_axis(v);
  else if (key == "start") s.start = detail::kv_double(key, v);
  else if (key == "stop") s.stop = detail::kv_double(key, v);
  else if (key == "steps") s.steps = detail::kv_int(key, v);
  else if (key == "methods") {
    s.methods.clear();
    for (const auto& t : detail::split(v, ',')) s.methods.push_back(parse_method(detail::trim(t)));
  } else if (key == "schemes") {
    s.schemes.clear();
    for (const auto& t : detail::split(v, ',')) s.schemes.push_back(parse_scheme(detail::trim(t)));
  } else if (key == "series") f.series_key = v;
  else if (key == "series_values") {
    f.series_values.clear();
    for (const auto& t : detail::split(v, ',')) f.series_values.push_back(detail::kv_fraction(key, detail::trim(t)));
  } else if (key == "title") f.title = v;
  else throw ConfigError("unknown key '" + key + "'");
}

inline ScenarioFile scenario_from_key_values(const KeyValues& kv) {
  ScenarioFile f;
  f.sweep.sampler.seed = default_seed();
  for (const auto& [k, v] : kv) apply_key(f, k, v);
  if (!f.series_key.empty() && f.series_values.empty()) throw ConfigError("series given without series_values");
  return f;
}

// Curves of a figure: one sweep per series value.
inline std::vector<std::pair<std::string, SweepSpec>> expand_series(const ScenarioFile& f) {
  if (f.series_key.empty()) return {{"", f.sweep}};
  std::vector<std::pair<std::string, SweepSpec>> out;
  for (double v : f.series_values) {
    ScenarioFile copy = f;
    apply_key(copy, f.series_key, detail::format_double(v));
    out.emplace_back(f.series_key + detail::format_double(v), copy.sweep);
  }
  return out;
}

// ---- figure presets ----

struct Preset {
  std::string_view name;
  std::string_view text;  // key = value document, identical to presets/<name>.cfg
};

inline constexpr Preset kPresets[] = {
    {"fig1a",
     "title = P-tilde vs SNR, m < n\nusers = 5\nm = 1\nbeta = 1/3\nrm = 0.2\nratio = 5\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM,ASYMPTOTIC\n"
     "schemes = HSIC_HYBRID\nsamples = 1000000\nseries = n\nseries_values = 2,3,4,5\n"},
    {"fig1b",
     "title = P-tilde vs SNR, m > n\nusers = 5\nm = 5\nbeta = 1/3\nrm = 0.2\nratio = 5\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM,ASYMPTOTIC\n"
     "schemes = HSIC_HYBRID\nsamples = 1000000\nseries = n\nseries_values = 1,2,3,4\n"},
    {"fig2a",
     "title = P-tilde vs SNR for varying m, n = 5\nusers = 5\nn = 5\nbeta = 1/3\nrm = 1\nratio = 7\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID\nsamples = 1000000\nseries = m\nseries_values = 1,2,3,4\n"},
    {"fig2b",
     "title = P-tilde vs SNR for varying m, n = 1\nusers = 5\nn = 1\nbeta = 1/3\nrm = 0.2\nratio = 7\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID\nsamples = 1000000\nseries = m\nseries_values = 2,3,4,5\n"},
    {"fig3a",
     "title = HSIC vs FSIC for varying power ratio, m < n\nusers = 5\nm = 2\nn = 5\nbeta = 1/3\nrm = 0.2\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID,FSIC_HYBRID\nsamples = 1000000\nseries = ratio\nseries_values = 1,2,4,8\n"},
    {"fig3b",
     "title = HSIC vs FSIC for varying power ratio, m > n\nusers = 5\nm = 5\nn = 2\nbeta = 1/3\nrm = 1\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID,FSIC_HYBRID\nsamples = 1000000\nseries = ratio\nseries_values = 1,2,4,8\n"},
    {"fig4a",
     "title = HSIC vs FSIC for varying beta, m < n\nusers = 5\nm = 2\nn = 5\nrm = 0.2\nratio = 5\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID,FSIC_HYBRID\nsamples = 1000000\nseries = beta\nseries_values = 0.1,0.2,1/3,0.4\n"},
    {"fig4b",
     "title = HSIC vs FSIC for varying beta, m > n\nusers = 5\nm = 5\nn = 2\nrm = 0.2\nratio = 5\n"
     "axis = snr_db\nstart = 0\nstop = 40\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID,FSIC_HYBRID\nsamples = 1000000\nseries = beta\nseries_values = 0.1,0.2,1/3,0.4\n"},
    {"fig5",
     "title = P-tilde vs beta at 15 dB\nusers = 5\nn = 5\nrm = 1\nratio = 6\nsnr_db = 15\n"
     "axis = beta\nstart = 0.05\nstop = 0.45\nsteps = 41\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID\nsamples = 1000000\nseries = m\nseries_values = 1,2,3,4\n"},
    {"fig6",
     "title = Impact of R_m on HSIC and FSIC\nusers = 5\nm = 2\nn = 5\nbeta = 1/3\nratio = 5\n"
     "axis = R_m\nstart = 0.1\nstop = 2\nsteps = 20\nmethods = MONTE_CARLO,CLOSED_FORM\n"
     "schemes = HSIC_HYBRID,FSIC_HYBRID\nsamples = 1000000\nseries = snr_db\nseries_values = 10,20,30\n"},
};

inline const Preset* find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

inline ScenarioFile load_preset(std::string_view name) {
  const Preset* p = find_preset(name);
  if (!p) throw ConfigError("unknown preset '" + std::string(name) + "'");
  return scenario_from_key_values(parse_key_values(std::string(p->text)));
}

// ---- single-point evaluation ----

struct EvalDelta {
  Method a;
  Method b;
  double abs_diff = 0.0;
  double rel_diff = 0.0;
};

struct EvalReport {
  SystemConfig cfg;
  RegimeClass regime;
  std::vector<SweepCell> cells;
  std::vector<EvalDelta> deltas;  // between HSIC methods
};

inline EvalReport run_eval(const Scenario& sc, const std::vector<Method>& methods,
                           const std::vector<Scheme>& schemes, const SamplerSpec& sampler) {
  EvalReport rep;
  rep.cfg = sc.resolve();
  rep.cfg.validate();
  sampler.validate();
  rep.regime = classify_regime(rep.cfg);
  for (Scheme s : schemes) {
    for (Method m : methods) {
      if (m != Method::monte_carlo && s != Scheme::hsic_hybrid) continue;
      rep.cells.push_back(evaluate_cell(sc, s, m, sampler));
    }
  }
  for (std::size_t i = 0; i < rep.cells.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.cells.size(); ++j) {
      const auto& x = rep.cells[i];
      const auto& y = rep.cells[j];
      if (x.scheme != Scheme::hsic_hybrid || y.scheme != Scheme::hsic_hybrid) continue;
      if (std::isnan(x.probability) || std::isnan(y.probability)) continue;
      const double d = std::abs(x.probability - y.probability);
      const double scale = std::max(std::abs(x.probability), std::abs(y.probability));
      rep.deltas.push_back({x.method, y.method, d, scale > 0 ? d / scale : 0.0});
    }
  }
  return rep;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["config"] = {{"users", r.cfg.users}, {"m", r.cfg.m},         {"n", r.cfg.n},
                 {"beta", r.cfg.beta},   {"rho_n", r.cfg.rho_n}, {"rho_m", r.cfg.rho_m},
                 {"R_m", r.cfg.rate_m}};
  j["regime"] = {{"table", std::string(to_string(r.regime.table))}, {"column", r.regime.column}};
  for (const auto& c : r.cells) {
    j["results"].push_back({{"scheme", std::string(to_string(c.scheme))},
                            {"method", std::string(to_string(c.method))},
                            {"probability", std::isnan(c.probability) ? nlohmann::json(nullptr) : nlohmann::json(c.probability)},
                            {"stderr", c.stderr_},
                            {"flags", detail::join_flags(c.flags)}});
  }
  for (const auto& d : r.deltas) {
    j["deltas"].push_back({{"a", std::string(to_string(d.a))},
                           {"b", std::string(to_string(d.b))},
                           {"abs", d.abs_diff},
                           {"rel", d.rel_diff}});
  }
  return j;
}

// ---- cross-method validation ----

struct ValidateOptions {
  int n_configs = 100;
  std::uint64_t seed = 1;
  double quad_rel_tol = 1e-6;  // |closed - quadrature| / quadrature
  double mc_sigmas = 3.0;      // |closed - MC| <= mc_sigmas * stderr
  std::uint64_t mc_samples = 10'000'000;
};

struct ValidateEntry {
  SystemConfig cfg;
  double snr_db = 0.0;
  double ratio = 0.0;
  RegimeClass regime;
  double closed = 0.0;
  double quadrature = 0.0;
  ProbabilityEstimate mc;
  double quad_rel = 0.0;
  double mc_z = 0.0;
  bool quad_ok = false;
  bool mc_ok = false;
  std::string error;

  bool passed() const { return error.empty() && quad_ok && mc_ok; }
};

struct ValidateReport {
  ValidateOptions options;
  std::vector<ValidateEntry> entries;
  int skipped_singular = 0;

  int failures() const {
    int f = 0;
    for (const auto& e : entries) f += e.passed() ? 0 : 1;
    return f;
  }
  bool passed() const { return failures() == 0; }
};

// Draws a random valid scenario over the validation ranges.
template <class Rng>
Scenario random_scenario(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario s;
  auto& b = s.base;
  b.users = 3 + static_cast<int>(rng() % 4);
  b.m = 1 + static_cast<int>(rng() % b.users);
  do {
    b.n = 1 + static_cast<int>(rng() % b.users);
  } while (b.n == b.m);
  b.beta = 0.05 + 0.40 * u(rng);
  b.rate_m = 0.1 + 1.9 * u(rng);
  s.snr_db = 5.0 + 40.0 * u(rng);
  s.ratio = 0.5 + 11.5 * u(rng);
  return s;
}

inline ValidateReport run_validate(const ValidateOptions& opt) {
  if (opt.n_configs < 1) throw ConfigError("validate needs n_configs >= 1");
  if (!(opt.quad_rel_tol >= 0.0) || !(opt.mc_sigmas >= 0.0)) throw ConfigError("tolerances must be >= 0");
  ValidateReport rep;
  rep.options = opt;
  std::mt19937_64 rng(opt.seed);
  int k = 0;
  while (static_cast<int>(rep.entries.size()) < opt.n_configs) {
    const Scenario sc = random_scenario(rng);
    const SystemConfig cfg = sc.resolve();
    ValidateEntry e;
    e.cfg = cfg;
    e.snr_db = sc.snr_db;
    e.ratio = sc.ratio;
    try {
      const auto cf = ptilde_closed(cfg);
      e.regime = cf.regime;
      e.closed = cf.estimate.value;
    } catch (const SingularRegime&) {
      ++rep.skipped_singular;
      continue;
    }
    try {
      e.quadrature = ptilde_quadrature(cfg).value;
      SamplerSpec s;
      s.seed = detail::splitmix64(opt.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(++k)));
      s.n_samples = opt.mc_samples;
      e.mc = mc_probability(cfg, Scheme::hsic_hybrid, s);
      e.quad_rel = std::abs(e.closed - e.quadrature) / std::max(e.quadrature, 1e-300);
      e.mc_z = std::abs(e.closed - e.mc.value) / e.mc.std_error;
      e.quad_ok = e.quad_rel <= opt.quad_rel_tol;
      e.mc_ok = e.mc_z <= opt.mc_sigmas;
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

inline nlohmann::json to_json(const ValidateReport& r) {
  nlohmann::json j;
  j["n_configs"] = r.options.n_configs;
  j["seed"] = r.options.seed;
  j["quad_rel_tol"] = r.options.quad_rel_tol;
  j["mc_sigmas"] = r.options.mc_sigmas;
  j["mc_samples"] = r.options.mc_samples;
  j["skipped_singular"] = r.skipped_singular;
  j["failures"] = r.failures();
  j["passed"] = r.passed();
  j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries) {
    j["entries"].push_back({{"users", e.cfg.users},
                            {"m", e.cfg.m},
                            {"n", e.cfg.n},
                            {"beta", e.cfg.beta},
                            {"R_m", e.cfg.rate_m},
                            {"snr_db", e.snr_db},
                            {"ratio", e.ratio},
                            {"table", std::string(to_string(e.regime.table))},
                            {"column", e.regime.column},
                            {"closed", e.closed},
                            {"quadrature", e.quadrature},
                            {"mc", e.mc.value},
                            {"mc_stderr", e.mc.std_error},
                            {"quad_rel", e.quad_rel},
                            {"mc_z", e.mc_z},
                            {"passed", e.passed()},
                            {"error", e.error}});
  }
  return j;
}

}  // namespace hnoma
