#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hnoma/config.hpp"
#include "hnoma/core_model.hpp"
#include "hnoma/estimate.hpp"

namespace hnoma {

// Density of the (i-th, j-th) order statistics of M iid unit exponentials at
// (u, u + gap). Taking the gap directly keeps F(y)-F(x) accurate next to the
// diagonal.
inline double joint_order_stat_pdf_gap(int users, int i, int j, double u, double gap) {
  if (!(1 <= i && i < j && j <= users)) throw DomainError("joint pdf needs 1 <= i < j <= M");
  if (!(u >= 0.0 && gap >= 0.0)) throw DomainError("joint pdf needs 0 <= x <= y");
  const double v = u + gap;
  double log_v = std::lgamma(users + 1.0) - std::lgamma(static_cast<double>(i)) -
                 std::lgamma(static_cast<double>(j - i)) - std::lgamma(users - j + 1.0) - u - v -
                 (users - j) * v;
  if (i > 1) {
    if (u == 0.0) return 0.0;
    log_v += (i - 1) * std::log(-std::expm1(-u));
  }
  if (j - i > 1) {
    if (gap == 0.0) return 0.0;
    log_v += (j - i - 1) * (-u + std::log(-std::expm1(-gap)));
  }
  return std::exp(log_v);
}

inline double joint_order_stat_pdf(int users, int i, int j, double x, double y) {
  if (!(x <= y)) throw DomainError("joint pdf needs 0 <= x <= y");
  return joint_order_stat_pdf_gap(users, i, j, x, y - x);
}

// Density of the j-th order statistic of M iid unit exponentials.
inline double order_stat_pdf(int users, int j, double y) {
  if (!(1 <= j && j <= users)) throw DomainError("order statistic index out of range");
  if (y < 0.0) return 0.0;
  double log_v = std::lgamma(users + 1.0) - std::lgamma(static_cast<double>(j)) - std::lgamma(users - j + 1.0) -
                 y - (users - j) * y;
  if (j > 1) {
    if (y == 0.0) return 0.0;
    log_v += (j - 1) * std::log(-std::expm1(-y));
  }
  return std::exp(log_v);
}

// Density of (|h_m|^2, |h_n|^2) = (x, y) for either ordering of m and n.
inline double pair_pdf(const SystemConfig& cfg, double x, double y) {
  if (cfg.m < cfg.n) return x <= y ? joint_order_stat_pdf(cfg.users, cfg.m, cfg.n, x, y) : 0.0;
  return y <= x ? joint_order_stat_pdf(cfg.users, cfg.n, cfg.m, y, x) : 0.0;
}

// A region of the (|h_m|^2, |h_n|^2) plane: x in (x_lo, x_hi), and for each x,
// y between the largest lower line and the smallest upper line.
struct RegionSpec {
  Region region = Region::none;
  double x_lo = 0.0;
  double x_hi = std::numeric_limits<double>::infinity();
  std::vector<Line> lower;
  std::vector<Line> upper;

  double y_lo(double x) const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& l : lower) v = std::max(v, l.at(x));
    return v;
  }
  double y_hi(double x) const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& l : upper) v = std::min(v, l.at(x));
    return v;
  }
};

inline RegionSpec region_spec(const SystemConfig& cfg, Region region) {
  cfg.validate();
  const auto c = region_curves(cfg);
  const double inf = std::numeric_limits<double>::infinity();
  RegionSpec s;
  s.region = region;
  s.lower.push_back({0.0, 0.0});
  // Order-statistic support.
  if (cfg.m < cfg.n) {
    s.lower.push_back({1.0, 0.0});
  } else {
    s.upper.push_back({1.0, 0.0});
  }
  switch (region) {
    case Region::p11:
      s.x_lo = c.alpha;
      s.x_hi = c.omega2;
      s.upper.push_back(c.phi);
      break;
    case Region::p12:
      s.x_lo = c.omega2;
      s.x_hi = inf;
      s.upper.push_back({0.0, c.omega3});
      break;
    case Region::p21:
      s.x_lo = c.alpha;
      s.x_hi = inf;
      s.lower.push_back(c.phi);
      s.upper.push_back(c.psi);
      break;
    case Region::p22:
      s.x_lo = 0.0;
      s.x_hi = c.alpha;
      s.upper.push_back(c.psi);
      break;
    case Region::none:
      throw DomainError("no region spec for NONE");
  }
  return s;
}

struct QuadratureOptions {
  double tol = 1e-9;         // relative tolerance of the outer integral
  double inner_tol = 1e-10;  // relative tolerance of each inner integral; the
                             // Kronrod-Gauss gap hits roundoff near 1e-12
  unsigned max_intervals = 400;  // subdivision budget per 1-D integral
};

namespace detail {

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Outer breakpoints: every pairwise intersection of the bounding lines inside
// (x_lo, x_hi), so lo(x) and hi(x) are linear on each panel.
inline std::vector<double> panel_edges(const RegionSpec& s) {
  std::vector<Line> all = s.lower;
  all.insert(all.end(), s.upper.begin(), s.upper.end());
  std::vector<double> edges{s.x_lo};
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double ds = all[i].slope - all[j].slope;
      if (ds == 0.0) continue;
      const double x = (all[j].intercept - all[i].intercept) / ds;
      if (x > s.x_lo && x < s.x_hi && std::isfinite(x)) edges.push_back(x);
    }
  }
  edges.push_back(s.x_hi);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

struct QuadratureTally {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
  bool converged = true;
};

// Globally adaptive 31-point Gauss-Kronrod: repeatedly bisects the interval
// with the largest error estimate. Stops once the summed error meets rel_tol,
// or falls to the roundoff floor of the rule.
template <class F>
QuadratureTally adaptive_gk(F&& f, double a, double b, double rel_tol, unsigned max_intervals, double scale = 1.0) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  struct Piece {
    double a, b, value, error, l1;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  auto rule = [&](double lo, double hi) {
    Piece p{lo, hi, 0.0, 0.0, 0.0};
    p.value = GK::integrate(f, lo, hi, 0, 0.0, &p.error, &p.l1);
    // The single-panel error comes back on the reference interval [-1, 1]
    // while value and L1 are already scaled.
    p.error *= 0.5 * (hi - lo);
    return p;
  };
  std::priority_queue<Piece> heap;
  QuadratureTally t;
  auto push = [&](const Piece& p) {
    heap.push(p);
    t.value += p.value;
    t.error += p.error;
    t.l1 += p.l1;
  };
  // The integrand varies on the given scale. A longer interval is seeded
  // with panels that widen geometrically away from both ends so mass near
  // either end is seen by the first pass.
  if (b - a > 16.0 * scale) {
    std::vector<double> cuts{a, b};
    for (double w = scale; 2.0 * w < b - a; w *= 2.0) {
      cuts.push_back(a + w);
      cuts.push_back(b - w);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (cuts[k + 1] > cuts[k]) push(rule(cuts[k], cuts[k + 1]));
    }
  } else {
    push(rule(a, b));
  }
  double frozen = 0.0;
  constexpr double roundoff = 50.0 * std::numeric_limits<double>::epsilon();
  while (t.error > rel_tol * t.l1 && t.error > roundoff * t.l1) {
    if (heap.size() >= max_intervals) {
      t.converged = false;
      break;
    }
    const Piece worst = heap.top();
    heap.pop();
    t.value -= worst.value;
    t.error -= worst.error;
    t.l1 -= worst.l1;
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Too narrow to bisect: its error is final.
      frozen += worst.error;
      t.value += worst.value;
      t.l1 += worst.l1;
      if (heap.empty()) break;
      continue;
    }
    push(rule(worst.a, mid));
    push(rule(mid, worst.b));
  }
  t.error = std::max(t.error, 0.0) + frozen;
  return t;
}

}  // namespace detail

// Integrates density(lower, gap) over a region, where lower is the smaller of
// the two gains and gap the distance between them. lower_first says whether
// x = |h_m|^2 is the smaller coordinate.
template <class Density>
ProbabilityEstimate integrate_density(const RegionSpec& spec, bool lower_first, Density&& density,
                                      const QuadratureOptions& opt = {}) {
  if (!(opt.tol >= 1e-12 && opt.tol <= 1e-3)) throw ConfigError("quadrature tolerance must lie in [1e-12, 1e-3]");
  // Inner errors are pooled as an L1-weighted relative error, so slivers near
  // a vanishing y-range do not dominate the bound.
  double inner_err_sum = 0.0;
  double inner_l1_sum = 0.0;
  bool inner_converged = true;
  auto inner = [&](double x) {
    const double lo = std::max(0.0, spec.y_lo(x));
    const double hi = spec.y_hi(x);
    if (!(hi > lo)) return 0.0;
    // Integrate over the offset t from the bound nearest the diagonal; the
    // distance of that bound from the diagonal is formed without cancellation.
    double start = 0.0;
    if (lower_first) {
      start = -x;  // y = 0
      for (const auto& l : spec.lower) start = std::max(start, (l.slope - 1.0) * x + l.intercept);
    } else {
      start = -std::numeric_limits<double>::infinity();
      for (const auto& l : spec.upper) start = std::max(start, (1.0 - l.slope) * x - l.intercept);
    }
    auto f = [&](double t) {
      if (lower_first) return density(x, std::max(0.0, start + t));
      const double gap = std::clamp(start + t, 0.0, x);
      return density(std::max(0.0, x - gap), gap);
    };
    const auto r = detail::adaptive_gk(f, 0.0, hi - lo, opt.inner_tol, opt.max_intervals);
    inner_err_sum += r.error;
    inner_l1_sum += r.l1;
    inner_converged = inner_converged && r.converged;
    return r.value;
  };

  // Steep bounding lines squeeze the x-profile onto a width of order 1/slope.
  double steepest = 1.0;
  for (const auto* side : {&spec.lower, &spec.upper}) {
    for (const auto& l : *side) steepest = std::max(steepest, std::abs(l.slope));
  }
  const double x_scale = 1.0 / steepest;

  detail::QuadratureTally total;
  const auto edges = detail::panel_edges(spec);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k];
    const double b = edges[k + 1];
    if (!(b > a)) continue;
    const double probe = std::isfinite(b) ? 0.5 * (a + b) : a + 1.0;
    if (!(spec.y_hi(probe) > std::max(0.0, spec.y_lo(probe)))) continue;
    detail::QuadratureTally part;
    if (std::isfinite(b)) {
      part = detail::adaptive_gk(inner, a, b, opt.tol, opt.max_intervals, x_scale);
    } else {
      // u = 1 - e^{-(x-a)} maps [a, inf) onto [0, 1).
      auto mapped = [&](double u) {
        if (u >= 1.0) return 0.0;
        return inner(a - std::log1p(-u)) / (1.0 - u);
      };
      part = detail::adaptive_gk(mapped, 0.0, 1.0, opt.tol, opt.max_intervals, x_scale);
    }
    total.value += part.value;
    total.error += part.error;
    total.l1 += part.l1;
    total.converged = total.converged && part.converged;
  }
  const double inner_rel = inner_l1_sum > 0.0 ? inner_err_sum / inner_l1_sum : 0.0;
  const double bound = total.error + inner_rel * total.l1;
  if (!total.converged || !inner_converged || bound > 100.0 * opt.tol * total.l1 + 1e-30) {
    throw NonConvergence("quadrature over " + std::string(to_string(spec.region)) +
                         " stopped with error bound " + detail::format_g(bound));
  }
  ProbabilityEstimate e;
  e.value = std::max(0.0, total.value);
  e.std_error = bound;
  e.method = Method::quadrature;
  return e;
}

inline ProbabilityEstimate integrate_region(const SystemConfig& cfg, const RegionSpec& spec,
                                            const QuadratureOptions& opt = {}) {
  cfg.validate();
  const int i = std::min(cfg.m, cfg.n);
  const int j = std::max(cfg.m, cfg.n);
  return integrate_density(
      spec, cfg.m < cfg.n, [&](double u, double gap) { return joint_order_stat_pdf_gap(cfg.users, i, j, u, gap); },
      opt);
}

struct QuadratureDecomposition {
  std::array<ProbabilityEstimate, 4> regions;  // P11, P12, P21, P22
  ProbabilityEstimate total;
};

inline QuadratureDecomposition quadrature_region_decomposition(const SystemConfig& cfg,
                                                               const QuadratureOptions& opt = {}) {
  QuadratureDecomposition out;
  out.total.method = Method::quadrature;
  for (int r = 0; r < 4; ++r) {
    out.regions[r] = integrate_region(cfg, region_spec(cfg, static_cast<Region>(r)), opt);
    out.total.value += out.regions[r].value;
    out.total.std_error += out.regions[r].std_error;
  }
  out.total.value = std::min(out.total.value, 1.0);
  return out;
}

inline ProbabilityEstimate ptilde_quadrature(const SystemConfig& cfg, const QuadratureOptions& opt = {}) {
  return quadrature_region_decomposition(cfg, opt).total;
}

// Integral of the joint density over 0 < x < y < inf, both axes mapped by
// u = 1 - e^{-t}.
inline ProbabilityEstimate pdf_normalization(int users, int i, int j, double tol = 1e-12) {
  double inner_err = 0.0;
  auto inner = [&](double x) {
    auto f = [&](double u) {
      if (u >= 1.0) return 0.0;
      return joint_order_stat_pdf_gap(users, i, j, x, -std::log1p(-u)) / (1.0 - u);
    };
    const auto r = detail::adaptive_gk(f, 0.0, 1.0, tol, 400);
    inner_err = std::max(inner_err, r.error);
    return r.value;
  };
  auto outer = [&](double u) {
    if (u >= 1.0) return 0.0;
    return inner(-std::log1p(-u)) / (1.0 - u);
  };
  const auto r = detail::adaptive_gk(outer, 0.0, 1.0, tol, 400);
  ProbabilityEstimate e;
  e.value = r.value;
  e.std_error = r.error + inner_err;
  e.method = Method::quadrature;
  return e;
}

}  // namespace hnoma
