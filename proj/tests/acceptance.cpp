// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hnoma/hnoma.hpp"

using namespace hnoma;

namespace {

struct Outcome {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SystemConfig fig(int m, int n, double rate_m, double snr_db, double ratio, double beta = 1.0 / 3.0) {
  SystemConfig c;
  c.users = 5;
  c.m = m;
  c.n = n;
  c.beta = beta;
  c.rate_m = rate_m;
  return with_snr(c, snr_db, ratio);
}

double closed_or_quadrature(const SystemConfig& c) {
  try {
    return ptilde_closed(c).estimate.value;
  } catch (const SingularRegime&) {
    return ptilde_quadrature(c).value;
  }
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

SamplerSpec sampler(std::uint64_t n, std::uint64_t seed = 1) {
  SamplerSpec s;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

// 1. Closed form vs quadrature vs Monte Carlo on the default validation run.
Outcome three_way_agreement() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_validate(ValidateOptions{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst_rel = 0, worst_z = 0;
  for (const auto& e : rep.entries) {
    worst_rel = std::max(worst_rel, e.quad_rel);
    worst_z = std::max(worst_z, e.mc_z);
    if (!e.passed()) {
      o.check(false, fmt("M=%d m=%d n=%d beta=%.4f R_m=%.4f snr=%.2f ratio=%.3f: closed %.10g quad %.10g mc %.6g "
                         "+/- %.2g %s",
                         e.cfg.users, e.cfg.m, e.cfg.n, e.cfg.beta, e.cfg.rate_m, e.snr_db, e.ratio, e.closed,
                         e.quadrature, e.mc.value, e.mc.std_error, e.error.c_str()));
    }
  }
  o.check(rep.entries.size() == 100, "expected 100 configurations");
  o.note(fmt("%zu configs, worst closed/quadrature rel %.2e, worst |z| %.2f, %d singular draws skipped, %.0f s",
             rep.entries.size(), worst_rel, worst_z, rep.skipped_singular, secs));
  return o;
}

// 2. Figure 1 curves: MC and closed form coincide, n = 5 lowest and steepest.
Outcome figure_one() {
  Outcome o;
  double worst_z = 0;
  int points = 0;
  std::vector<std::vector<double>> curves_m1;
  for (int m : {1, 5}) {
    for (int k = 0; k < 4; ++k) {
      const int n = m == 1 ? k + 2 : k + 1;
      std::vector<double> curve;
      for (int db = 0; db <= 40; ++db) {
        const auto c = fig(m, n, 0.2, db, 5);
        const double cf = ptilde_closed(c).estimate.value;
        const auto mc = mc_probability(c, Scheme::hsic_hybrid, sampler(1'000'000));
        const double z = std::abs(cf - mc.value) / mc.std_error;
        worst_z = std::max(worst_z, z);
        ++points;
        o.check(z <= 3.0, fmt("m=%d n=%d %d dB: closed %.6g mc %.6g +/- %.2g", m, n, db, cf, mc.value, mc.std_error));
        curve.push_back(cf);
      }
      if (m == 1) curves_m1.push_back(curve);
    }
  }
  for (int db = 0; db <= 40; ++db) {
    for (int k = 0; k < 3; ++k)
      o.check(curves_m1[3][db] <= curves_m1[k][db], fmt("m=1: n=5 not lowest at %d dB (n=%d)", db, k + 2));
  }
  std::vector<double> slopes;
  for (const auto& curve : curves_m1) {
    std::vector<std::pair<double, double>> pts;
    for (int db = 30; db <= 40; ++db) pts.emplace_back(db, curve[db]);
    slopes.push_back(decay_exponent_fit(pts));
  }
  for (int k = 0; k < 3; ++k) o.check(slopes[3] < slopes[k], fmt("m=1: n=5 slope not steepest vs n=%d", k + 2));
  o.note(fmt("%d points, worst |z| %.2f; m=1 slopes over 30-40 dB: %.2f %.2f %.2f %.2f", points, worst_z, slopes[0],
             slopes[1], slopes[2], slopes[3]));
  return o;
}

// 3. Decay exponent -n in vanishing regimes.
Outcome decay_exponents() {
  Outcome o;
  std::string summary;
  for (auto [m, n] : {std::pair{1, 2}, {1, 3}, {1, 4}, {1, 5}, {5, 2}, {5, 3}, {5, 4}}) {
    std::vector<std::pair<double, double>> pts;
    for (int db = 35; db <= 50; ++db) pts.emplace_back(db, ptilde_closed(fig(m, n, 0.2, db, 5)).estimate.value);
    const auto rc = classify_regime(fig(m, n, 0.2, 40, 5));
    const double s = decay_exponent_fit(pts);
    o.check(std::abs(s + n) <= 0.3, fmt("m=%d n=%d slope %.3f", m, n, s));
    summary += fmt(" (%d,%d) table %s col %d: %.3f;", m, n, std::string(to_string(rc.table)).c_str(), rc.column, s);
  }
  o.note("slopes over 35-50 dB:" + summary);
  return o;
}

// 4. Floors: rho_m -> inf limits and the prefactor-free joint-limit entries.
Outcome floors() {
  Outcome o;
  std::string summary;
  for (auto [m, n] : {std::pair{2, 5}, {1, 5}, {5, 2}, {5, 1}}) {
    SystemConfig c = fig(m, n, 1.0, 10, 1);
    c.rho_n = 10.0;
    c.rho_m = 1e6;
    const double fl = ptilde_floor_rho_m_inf(c).value;
    const double cf = ptilde_closed(c).estimate.value;
    o.check(rel(cf, fl) <= 0.02, fmt("rho_m limit m=%d n=%d: closed %.8g floor %.8g", m, n, cf, fl));
    summary += fmt(" rho_m-limit (%d,%d) rel %.1e;", m, n, rel(cf, fl));
  }
  struct Case {
    int m, n;
    double rate_m, ratio;
  };
  for (const auto& k : {Case{1, 5, 1.0, 1.0}, Case{2, 5, 1.0, 2.0}, Case{2, 5, 1.0, 4.0}, Case{5, 2, 1.0, 4.0},
                        Case{5, 2, 1.0, 8.0}}) {
    const auto coeff = joint_limit_coefficients(fig(k.m, k.n, k.rate_m, 60, k.ratio));
    const double cf = ptilde_closed(fig(k.m, k.n, k.rate_m, 60, k.ratio)).estimate.value;
    o.check(coeff.floor > 0, fmt("(%d,%d) ratio %g: no floor entry", k.m, k.n, k.ratio));
    o.check(rel(cf, coeff.floor) <= 0.02,
            fmt("(%d,%d) ratio %g at 60 dB: closed %.8g floor %.8g", k.m, k.n, k.ratio, cf, coeff.floor));
    std::vector<std::pair<double, double>> pts;
    for (int db = 35; db <= 50; ++db) pts.emplace_back(db, ptilde_closed(fig(k.m, k.n, k.rate_m, db, k.ratio)).estimate.value);
    const double s = decay_exponent_fit(pts);
    o.check(s > -0.2 && s <= 0.0, fmt("(%d,%d) ratio %g floor slope %.4f", k.m, k.n, k.ratio, s));
    summary += fmt(" table %s col %d (%d,%d) ratio %g: rel %.1e slope %.4f;",
                   std::string(to_string(coeff.regime.table)).c_str(), coeff.regime.column, k.m, k.n, k.ratio,
                   rel(cf, coeff.floor), s);
  }
  o.note(summary.substr(1));
  return o;
}

// 5. HSIC never worse than FSIC, and HSIC vanishing where FSIC floors.
Outcome dominance() {
  Outcome o;
  int points = 0;
  auto sweep = [&](int m, int n, double rate_m, double ratio, double beta) {
    for (int db = 0; db <= 40; ++db) {
      const auto c = fig(m, n, rate_m, db, ratio, beta);
      const auto s = sampler(200'000, 1);
      const auto h = mc_probability(c, Scheme::hsic_hybrid, s);
      const auto f = mc_probability(c, Scheme::fsic_hybrid, s);
      ++points;
      o.check(h.value <= f.value + 3 * f.std_error,
              fmt("(%d,%d) R_m=%g ratio=%g beta=%.3f %d dB: hsic %.6g fsic %.6g", m, n, rate_m, ratio, beta, db,
                  h.value, f.value));
    }
  };
  for (double ratio : {1.0, 2.0, 4.0, 8.0}) {
    sweep(2, 5, 0.2, ratio, 1.0 / 3.0);
    sweep(5, 2, 1.0, ratio, 1.0 / 3.0);
  }
  for (double beta : {0.1, 0.2, 1.0 / 3.0, 0.4}) {
    sweep(2, 5, 0.2, 5.0, beta);
    sweep(5, 2, 0.2, 5.0, beta);
  }
  // eps_m = 0.1487 <= beta/(1-beta) = 0.5.
  const auto c40 = fig(2, 5, 0.2, 40, 1);
  const double h40 = ptilde_closed(c40).estimate.value;
  const auto f30 = mc_probability(fig(2, 5, 0.2, 30, 1), Scheme::fsic_hybrid, sampler(1'000'000));
  const auto f40 = mc_probability(c40, Scheme::fsic_hybrid, sampler(1'000'000));
  o.check(h40 < 1e-3, fmt("HSIC at 40 dB is %.3g", h40));
  o.check(f40.value > 1e-2 && rel(f30.value, f40.value) < 0.1,
          fmt("FSIC does not floor: %.4g at 30 dB, %.4g at 40 dB", f30.value, f40.value));
  o.note(fmt("%d SNR points; m=2 n=5 R_m=0.2 ratio 1 at 40 dB: HSIC %.3g, FSIC %.4g (30 dB: %.4g)", points, h40,
             f40.value, f30.value));
  return o;
}

// 6. Monotonicity in beta and R_m.
Outcome monotonicity() {
  Outcome o;
  const auto grid = [](double a, double b, int steps) {
    std::vector<double> g;
    for (int i = 0; i < steps; ++i) g.push_back(a + (b - a) * i / (steps - 1));
    return g;
  };
  for (int m : {1, 2, 3}) {
    double prev = 2;
    for (double b : grid(0.05, 0.45, 41)) {
      const double v = closed_or_quadrature(fig(m, 5, 1.0, 15, 6, b));
      o.check(v <= prev, fmt("beta sweep m=%d: rises at beta=%.3f (%.6g > %.6g)", m, b, v, prev));
      prev = v;
    }
    for (double b : grid(0.1, 0.45, 8)) {
      const auto c = fig(m, 5, 1.0, 15, 6, b);
      const auto mc = mc_probability(c, Scheme::hsic_hybrid, sampler(1'000'000));
      const double cf = closed_or_quadrature(c);
      o.check(std::abs(mc.value - cf) <= 3 * mc.std_error, fmt("beta sweep m=%d beta=%.2f: mc %.6g closed %.6g", m, b, mc.value, cf));
    }
  }
  {
    double lo = 2, peak = 0, at = 0, prev = 2;
    bool rises = false;
    for (double b : grid(0.05, 0.45, 41)) {
      const double v = closed_or_quadrature(fig(4, 5, 1.0, 15, 6, b));
      if (v > prev) rises = true;
      if (rises && v > peak) {
        peak = v;
        at = b;
      }
      if (!rises) lo = v;
      prev = v;
    }
    if (rises) o.note(fmt("not part of the check: m=4 rises from %.4g to %.4g at beta=%.2f", lo, peak, at));
  }
  for (double snr : {10.0, 20.0, 30.0}) {
    double prev_cf = -1;
    std::uint64_t prev_hits = 0;
    double fsic0 = -1;
    for (double r : grid(0.1, 2.0, 20)) {
      const auto c = fig(2, 5, r, snr, 5);
      const double cf = closed_or_quadrature(c);
      const auto s = sampler(1'000'000, 1);
      const auto h = mc_probability(c, Scheme::hsic_hybrid, s);
      const auto f = mc_probability(c, Scheme::fsic_hybrid, s);
      const auto hits = static_cast<std::uint64_t>(std::llround(h.value * 1e6));
      o.check(cf >= prev_cf, fmt("R_m sweep %g dB: closed form falls at R_m=%.2f", snr, r));
      o.check(hits >= prev_hits, fmt("R_m sweep %g dB: MC falls at R_m=%.2f", snr, r));
      if (fsic0 < 0) fsic0 = f.value;
      o.check(std::abs(f.value - fsic0) <= 3 * f.std_error, fmt("R_m sweep %g dB: FSIC moves at R_m=%.2f", snr, r));
      prev_cf = cf;
      prev_hits = hits;
    }
  }
  o.note("beta sweeps at 15 dB (m=1,2,3) non-increasing; R_m sweeps at 10/20/30 dB: HSIC non-decreasing, FSIC flat");
  return o;
}

// 7. Structural invariants.
Outcome invariants() {
  Outcome o;
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Partition identity.
  for (int k = 0; k < 20; ++k) {
    const auto sc = random_scenario(g);
    const auto d = mc_region_decomposition(sc.resolve(), sampler(200'000, 7 + k));
    o.check(d.region_hits() == d.tally.hsic_hits, "partition identity");
  }
  // Joint density normalization.
  double worst_norm = 0;
  for (int users = 2; users <= 8; ++users)
    for (int i = 1; i < users; ++i)
      for (int j = i + 1; j <= users; ++j) worst_norm = std::max(worst_norm, std::abs(pdf_normalization(users, i, j).value - 1));
  o.check(worst_norm <= 1e-9, fmt("pdf normalization error %.2e", worst_norm));
  // Transparency on random realizations.
  int opaque = 0;
  const auto gains = sample_ordered_gains(6, sampler(1'000'000, 99));
  for (std::size_t k = 0; k < gains.size(); ++k) {
    auto sc = random_scenario(g);
    sc.base.users = 6;
    const auto c = sc.resolve();
    opaque += !legacy_transparency_check(c, gains[k].gains[c.m - 1], gains[k].gains[c.n - 1]);
  }
  o.check(opaque == 0, fmt("%d transparency violations", opaque));
  // kappa3 = kappa1 + 1/beta.
  double worst_kappa = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto c = random_scenario(g).resolve();
    const auto d = derive_constants<double>(c);
    worst_kappa = std::max(worst_kappa, std::abs(d.kappa3 - (d.kappa1 + 1 / d.beta)) / d.kappa3);
  }
  o.check(worst_kappa <= 4 * std::numeric_limits<double>::epsilon(), fmt("kappa identity error %.2e", worst_kappa));
  // Column-boundary continuity via one-sided extrapolation onto each breakpoint.
  double worst_gap = 0;
  int edges_checked = 0;
  constexpr double d = 1e-7;
  for (int k = 0; k < 30; ++k) {
    auto sc = random_scenario(g);
    const auto base = sc.resolve();
    const auto dc = derive_constants<double>(base);
    std::vector<double> edges{dc.kappa1, dc.kappa2};
    if (classify_regime(base).eps_branch) {
      edges.push_back(dc.inv_beta_eps);
      edges.push_back(dc.unit_slope_ratio);
    } else {
      edges.push_back(dc.kappa3);
    }
    for (double e : edges) {
      auto at = [&](double f) {
        SystemConfig c = base;
        c.rho_m = c.rho_n / (e * (1 + f * d));
        return ptilde_closed(c).raw;
      };
      const double left = 2 * at(-1) - at(-2);
      const double right = 2 * at(1) - at(2);
      if (std::max(std::abs(left), std::abs(right)) < 1e-290) continue;
      const double gap = rel(left, right);
      worst_gap = std::max(worst_gap, gap);
      ++edges_checked;
      o.check(gap <= 1e-8, fmt("continuity M=%d m=%d n=%d beta=%.4f R_m=%.4f at eta=%.6g: %.6g vs %.6g", base.users,
                               base.m, base.n, base.beta, base.rate_m, e, left, right));
    }
  }
  o.note(fmt("pdf normalization %.1e, transparency violations %d, kappa identity %.1e, continuity %.1e over %d edges",
             worst_norm, opaque, worst_kappa, worst_gap, edges_checked));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"three-way agreement", three_way_agreement},
      {"figure 1 reproduction", figure_one},
      {"decay exponents", decay_exponents},
      {"floors", floors},
      {"HSIC vs FSIC dominance", dominance},
      {"monotonicity", monotonicity},
      {"structural invariants", invariants},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu: %s  %s\n", i + 1, o.ok ? "PASS" : "FAIL", criteria[i].first.c_str());
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += o.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
