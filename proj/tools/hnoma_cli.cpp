// Command-line front end: eval, sweep, validate, figure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "hnoma/hnoma.hpp"

namespace {

using namespace hnoma;

struct ScenarioFlags {
  std::string config;
  std::map<std::string, std::string> values;  // scenario key -> raw flag text

  void add(CLI::App* app) {
    app->add_option("--config", config, "key = value scenario file; flags override it");
    add_key(app, "--snr-db", "snr_db", "SNR = rho_n in dB");
    add_key(app, "--beta", "beta", "power-reducing coefficient, 0 < beta < 1/2");
    add_key(app, "--rm", "rm", "target rate R_m of the legacy user (BPCU)");
    add_key(app, "--ratio", "ratio", "rho_n / rho_m");
    add_key(app, "--m", "m", "order index of the legacy user");
    add_key(app, "--n", "n", "order index of the opportunistic user");
    add_key(app, "--users", "users", "number of users M");
    add_key(app, "--samples", "samples", "Monte Carlo draws");
    add_key(app, "--seed", "seed", "Monte Carlo seed (default: $HNOMA_SEED or 1)");
    add_key(app, "--methods", "methods", "comma list of MONTE_CARLO,CLOSED_FORM,QUADRATURE,ASYMPTOTIC");
    add_key(app, "--schemes", "schemes", "comma list of HSIC_HYBRID,FSIC_HYBRID");
  }

  void add_key(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  ScenarioFile load(const std::map<std::string, std::string>& extra = {}) const {
    KeyValues kv;
    if (!config.empty()) kv = load_key_values(config);
    for (const auto& [k, v] : values) kv[k] = v;
    for (const auto& [k, v] : extra) kv[k] = v;
    return scenario_from_key_values(kv);
  }
};

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error("cannot open '" + out + "' for writing");
  f << text;
}

std::string format_eval_text(const EvalReport& r) {
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof buf, "M=%d m=%d n=%d beta=%.6g R_m=%.6g rho_n=%.6g rho_m=%.6g  table %s column %d\n",
                r.cfg.users, r.cfg.m, r.cfg.n, r.cfg.beta, r.cfg.rate_m, r.cfg.rho_n, r.cfg.rho_m,
                std::string(to_string(r.regime.table)).c_str(), r.regime.column);
  o << buf;
  for (const auto& c : r.cells) {
    std::snprintf(buf, sizeof buf, "  %-12s %-12s %.12g  +/- %.3g  %s\n", std::string(to_string(c.scheme)).c_str(),
                  std::string(to_string(c.method)).c_str(), c.probability, c.stderr_,
                  detail::join_flags(c.flags).c_str());
    o << buf;
  }
  for (const auto& d : r.deltas) {
    std::snprintf(buf, sizeof buf, "  delta %s vs %s: abs %.3g rel %.3g\n", std::string(to_string(d.a)).c_str(),
                  std::string(to_string(d.b)).c_str(), d.abs_diff, d.rel_diff);
    o << buf;
  }
  return o.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid NOMA with hybrid SIC: probability that the hybrid scheme fails to beat OMA"};
  app.require_subcommand(1);
  std::string out;
  std::string format = "csv";

  auto* eval = app.add_subcommand("eval", "evaluate one configuration");
  ScenarioFlags eval_flags;
  eval_flags.add(eval);
  eval->add_option("--out", out, "output file (default stdout)");
  eval->add_option("--format", format, "text or json")->check(CLI::IsMember({"csv", "text", "json"}));

  auto* sweep = app.add_subcommand("sweep", "sweep one parameter");
  ScenarioFlags sweep_flags;
  sweep_flags.add(sweep);
  std::map<std::string, std::string> grid;
  for (const char* key : {"axis", "start", "stop", "steps"}) {
    sweep->add_option_function<std::string>(std::string("--") + key, [&grid, key](const std::string& v) { grid[key] = v; },
                                            std::string("sweep ") + key);
  }
  sweep->add_option("--out", out, "output file (default stdout)");
  sweep->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* validate = app.add_subcommand("validate", "closed form vs quadrature vs Monte Carlo on random configs");
  ValidateOptions vopt;
  vopt.seed = 1;
  bool seed_given = false;
  validate->add_option("--configs", vopt.n_configs, "number of random configurations");
  validate->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { vopt.seed = s; seed_given = true; },
                                                "configuration and sampling seed");
  validate->add_option("--samples", vopt.mc_samples, "Monte Carlo draws per configuration");
  validate->add_option("--quad-tol", vopt.quad_rel_tol, "relative closed-form vs quadrature tolerance");
  validate->add_option("--mc-sigmas", vopt.mc_sigmas, "closed-form vs Monte Carlo tolerance in standard errors");
  validate->add_option("--out", out, "JSON report file (default stdout)");

  auto* figure = app.add_subcommand("figure", "run a figure preset (name or .cfg path)");
  std::string preset;
  bool list = false;
  ScenarioFlags figure_flags;
  figure_flags.add(figure);
  figure->add_option("preset", preset, "preset name or key = value file");
  figure->add_flag("--list", list, "list built-in presets");
  figure->add_option("--out", out, "output directory (default .)");
  figure->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*eval) {
      const ScenarioFile f = eval_flags.load();
      const auto rep = run_eval(f.sweep.fixed, f.sweep.methods, f.sweep.schemes, f.sweep.sampler);
      emit(out, format == "json" ? to_json(rep).dump(2) + "\n" : format_eval_text(rep));
      for (const auto& c : rep.cells) {
        for (const auto& flag : c.flags) {
          if (flag.rfind("error:", 0) == 0) return kExitDisagreement;
        }
      }
      return kExitOk;
    }
    if (*sweep) {
      const ScenarioFile f = sweep_flags.load(grid);
      const auto fmt = parse_format(format);
      const auto recs = flatten(f.sweep.axis, run_sweep_rows(f.sweep));
      std::ostringstream o;
      write_records(o, recs, fmt);
      emit(out, o.str());
      return kExitOk;
    }
    if (*validate) {
      if (!seed_given) vopt.seed = default_seed();
      const auto rep = run_validate(vopt);
      emit(out, to_json(rep).dump(2) + "\n");
      std::fprintf(stderr, "validate: %d configs, %d failures, %d singular draws skipped\n",
                   static_cast<int>(rep.entries.size()), rep.failures(), rep.skipped_singular);
      return rep.passed() ? kExitOk : kExitDisagreement;
    }
    if (*figure) {
      if (list) {
        for (const auto& p : kPresets) std::cout << p.name << '\n';
        return kExitOk;
      }
      if (preset.empty()) throw ConfigError("figure needs a preset name or file");
      KeyValues kv;
      std::string name = preset;
      if (find_preset(preset)) {
        kv = parse_key_values(std::string(find_preset(preset)->text));
      } else {
        kv = load_key_values(preset);
        name = std::filesystem::path(preset).stem().string();
      }
      for (const auto& [k, v] : figure_flags.values) kv[k] = v;
      const ScenarioFile f = scenario_from_key_values(kv);
      const auto fmt = parse_format(format);
      const std::filesystem::path dir = out.empty() ? "." : out;
      std::filesystem::create_directories(dir);
      for (const auto& [label, spec] : expand_series(f)) {
        const auto file = dir / (name + (label.empty() ? "" : "_" + label) + (fmt == OutputFormat::csv ? ".csv" : ".json"));
        run_sweep(spec, file.string(), fmt);
        std::cerr << "wrote " << file.string() << '\n';
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDisagreement;
  }
  return kExitOk;
}
