#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hnoma/closed_form.hpp"
#include "hnoma/config.hpp"
#include "hnoma/estimate.hpp"
#include "hnoma/numeric.hpp"

namespace hnoma {

// Scaled thresholds of the joint high-SNR limit; each is rho_m times the
// matching omega-constant and depends on (beta, eta, eps_m) only.
template <class Real = Precise>
struct AsymptoticConstants {
  int users = 0;
  int m = 0;
  int n = 0;
  Real beta, eta, eps_m;
  Real varpi1, varpi2, varpi3, varpi4, varpi5, varpi6, varpi7;
  bool varpi1_singular = false;
  bool varpi4_singular = false;
  bool varpi5_singular = false;
  Real pair_coeff;    // c_mn or c-hat_mn
  Real single_coeff;  // c-hat_n
  Real s_tilde;       // c-hat_n varpi3^n / n
};

template <class Real = Precise>
AsymptoticConstants<Real> derive_asymptotic_constants(const SystemConfig& cfg) {
  const auto k = derive_constants<Real>(cfg);
  AsymptoticConstants<Real> a;
  a.users = k.users;
  a.m = k.m;
  a.n = k.n;
  a.beta = k.beta;
  a.eta = k.eta;
  a.eps_m = k.eps_m;
  const Real& b = a.beta;
  const Real& e = a.eps_m;
  const Real& eta = a.eta;
  std::tie(a.varpi1, a.varpi1_singular) = detail::guarded_ratio(Real(1), Real(1 / e), Real(b * eta));
  a.varpi2 = (1 - b) * e / b;
  a.varpi3 = (1 - 2 * b) / (b * b * eta);
  std::tie(a.varpi4, a.varpi4_singular) = detail::guarded_ratio(Real(1 - 2 * b), Real(b * b * eta), Real(1 - b));
  std::tie(a.varpi5, a.varpi5_singular) = detail::guarded_ratio(Real((1 - b) * e), b, Real((1 - b) * e));
  a.varpi6 = ((1 - b) * e + 1 - 2 * b) / (b * b * eta);
  a.varpi7 = (a.varpi5 / e - 1) / (b * eta);
  a.pair_coeff = k.pair_coeff;
  a.single_coeff = k.single_coeff;
  a.s_tilde = k.single_coeff * num::ipow(a.varpi3, k.n) / Real(k.n);
  return a;
}

namespace detail {

// sum_p C(K, p) (-1)^p / (lo + p) * body(p), K = |n-m| - 1, lo = min(m, n).
template <class Real, class Body>
Real outer_binomial_sum(const AsymptoticConstants<Real>& a, Body&& body) {
  const int lo = std::min(a.m, a.n);
  const int K = std::abs(a.n - a.m) - 1;
  Real total = 0;
  for (int p = 0; p <= K; ++p) {
    Real w = num::binomial<Real>(K, p) / Real(lo + p);
    if (p % 2) w = -w;
    total += w * body(p);
  }
  return a.pair_coeff * total;
}

// (x^k - y^k) / k
template <class Real>
Real power_gap(const Real& x, const Real& y, int k) {
  return (num::ipow(x, k) - num::ipow(y, k)) / Real(k);
}

template <class Real>
Real lower_first_limit(const AsymptoticConstants<Real>& a, Term term) {
  const int m = a.m;
  const int n = a.n;
  const Real& e = a.eps_m;
  const Real bh = a.beta * a.eta;
  const Real b2 = a.beta * a.beta * a.eta;
  const Real one_m2b = 1 - 2 * a.beta;
  const Real one_mb = 1 - a.beta;
  const Real &w1 = a.varpi1, &w3 = a.varpi3, &w4 = a.varpi4, &w6 = a.varpi6, &w7 = a.varpi7;
  // sum_q C(m+p, q) (-1)^q (1-2b)^q (b^2 eta)^{m+p-q} (x^{n-q} - y^{n-q}) / ((1-b)^{m+p} (n-q))
  auto psi_sum = [&](int p, const Real& x, const Real& y) {
    Real s = 0;
    for (int q = 0; q <= m + p; ++q) {
      Real t = num::binomial<Real>(m + p, q) * num::ipow(one_m2b, q) * num::ipow(b2, m + p - q) *
               power_gap(x, y, n - q);
      s += (q % 2) ? Real(-t) : t;
    }
    return s / num::ipow(one_mb, m + p);
  };
  // sum_q C(m+p, q) (b eta)^{m+p-q} (x^{n-q} - y^{n-q}) / (n-q)
  auto phi_sum = [&](int p, const Real& x, const Real& y) {
    Real s = 0;
    for (int q = 0; q <= m + p; ++q) s += num::binomial<Real>(m + p, q) * num::ipow(bh, m + p - q) * power_gap(x, y, n - q);
    return s;
  };
  auto strip = [&](int p) { return num::ipow(e, m + p) * power_gap(w6, e, n - m - p); };
  switch (term) {
    case Term::T1:
      return outer_binomial_sum(a, [&](int p) { return power_gap(w3, w1, n) - num::ipow(e, m + p) * phi_sum(p, w3, w1); });
    case Term::T4:
      return outer_binomial_sum(a, [&](int p) { return power_gap(w4, e, n) - strip(p) - psi_sum(p, w4, w6); });
    case Term::T5:
      return outer_binomial_sum(a, [&](int p) {
        return power_gap(w1, e, n) - strip(p) + num::ipow(e, m + p) * phi_sum(p, w7, w1) - psi_sum(p, w7, w6);
      });
    case Term::T6:
      return outer_binomial_sum(a, [&](int p) { return num::ipow(e, n) / Real(n) + strip(p) - psi_sum(p, w6, w3); });
    case Term::T7:
      return outer_binomial_sum(a, [&](int p) { return num::ipow(w4, n) / Real(n) - psi_sum(p, w4, w3); });
    default:
      throw DomainError("no rho_m^-n coefficient for " + std::string(to_string(term)));
  }
}

template <class Real>
Real upper_first_limit(const AsymptoticConstants<Real>& a, Term term) {
  const int m = a.m;
  const int n = a.n;
  const Real& e = a.eps_m;
  const Real bh = a.beta * a.eta;
  const Real b2 = a.beta * a.beta * a.eta;
  const Real one_m2b = 1 - 2 * a.beta;
  const Real one_mb = 1 - a.beta;
  const Real &w1 = a.varpi1, &w2 = a.varpi2, &w3 = a.varpi3, &w4 = a.varpi4, &w5 = a.varpi5;
  // sum_q C(n+p, q) (-1)^q (x^{m-q} - eps^{m-q}) / ((b eta)^{n+p} eps^{n+p-q} (m-q))
  auto phi_sum = [&](int p, const Real& x) {
    Real s = 0;
    for (int q = 0; q <= n + p; ++q) {
      Real t = num::binomial<Real>(n + p, q) * power_gap(x, e, m - q) / num::ipow(e, n + p - q);
      s += (q % 2) ? Real(-t) : t;
    }
    return s / num::ipow(bh, n + p);
  };
  // sum_q C(n+p, q) (1-2b)^q (1-b)^{n+p-q} (x^{m-q} - y^{m-q}) / ((b^2 eta)^{n+p} (m-q))
  auto psi_sum = [&](int p, const Real& x, const Real& y) {
    Real s = 0;
    for (int q = 0; q <= n + p; ++q)
      s += num::binomial<Real>(n + p, q) * num::ipow(one_m2b, q) * num::ipow(one_mb, n + p - q) * power_gap(x, y, m - q);
    return s / num::ipow(b2, n + p);
  };
  switch (term) {
    case Term::Q1:
      return outer_binomial_sum(a, [&](int p) {
        return phi_sum(p, w1) - num::ipow(w1, m) / Real(m);
      });
    case Term::Q2:
      return outer_binomial_sum(a, [&](int p) {
        // the strip xi < varpi3 is cut by the diagonal
        return phi_sum(p, w2) - num::ipow(w3, n + p) * num::ipow(w2, m - n - p) / Real(m - n - p) +
               num::ipow(w3, m) * (1 / Real(m - n - p) - 1 / Real(m));
      });
    case Term::Q3:
      return outer_binomial_sum(a, [&](int p) { return power_gap(w1, e, m) - phi_sum(p, w1); });
    case Term::Q7:
      return outer_binomial_sum(a, [&](int p) { return power_gap(w4, e, m) + psi_sum(p, w5, w4) - phi_sum(p, w5); });
    case Term::Q8:
      return outer_binomial_sum(a, [&](int p) { return psi_sum(p, w5, e) - phi_sum(p, w5); });
    case Term::Q9:
      return outer_binomial_sum(a, [&](int) { return num::ipow(e, m) / Real(m); });
    case Term::Q10:
      return outer_binomial_sum(a, [&](int p) { return num::ipow(w4, m) / Real(m) + psi_sum(p, e, w4); });
    default:
      throw DomainError("no rho_m^-m coefficient for " + std::string(to_string(term)));
  }
}

// Prefactor-free entries: the non-vanishing floors.
template <class Real>
Real floor_entry(const AsymptoticConstants<Real>& a, Term term) {
  const Real bh = a.beta * a.eta;
  const Real b2 = a.beta * a.beta * a.eta;
  const Real one_mb = 1 - a.beta;
  const int M = a.users;
  Real total = 0;
  const int K = std::abs(a.n - a.m);
  for (int p = 0; p < K; ++p) {
    const int kl = std::min(a.m, a.n) - 1;
    const int kp = K - 1;
    Real cp = num::binomial<Real>(kp, p);
    if ((kp - p) % 2) cp = -cp;
    for (int l = 0; l <= kl; ++l) {
      Real cl = num::binomial<Real>(kl, l);
      if (l % 2) cl = -cl;
      const Real A = l + p + 1;
      Real v;
      if (a.m < a.n) {
        const Real B = M - a.m - p;
        const Real G = M - a.m + l + 1;
        const Real r = A + B / (bh * a.eps_m);
        const Real aa = A + B * one_mb / b2;
        if (term == Term::T2) {
          v = (1 / r - 1 / aa) / B;
        } else if (term == Term::T3) {
          v = (1 / G - 1 / aa) / B;
        } else {
          throw DomainError("no floor entry for " + std::string(to_string(term)));
        }
      } else {
        const Real B = M - a.n - p;
        const Real G = M - a.n + l + 1;
        const Real t = B + A / (bh * a.eps_m);
        const Real s = B + A * one_mb / b2;
        if (term == Term::Q4) {
          v = (1 / t - 1 / G) / A;
        } else if (term == Term::Q5 || term == Term::Q6) {
          v = (1 / t - 1 / s) / A;
        } else {
          throw DomainError("no floor entry for " + std::string(to_string(term)));
        }
      }
      total += cp * cl * v;
    }
  }
  return a.pair_coeff * total;
}

}  // namespace detail

// Entry of a table's approximation row, split by SNR scaling.
struct LimitEntry {
  enum class Scale { none, constant, rho_m_n, rho_m_m };
  Scale scale = Scale::none;
  Term term = Term::zero;
};

struct LimitColumn {
  LimitEntry p1;
  LimitEntry p21;
  LimitEntry p22;
  bool p1_has_s_tilde = false;  // m>n: P1 also carries S-tilde / rho_m^n
};

inline LimitColumn limit_column(const RegimeClass& rc) {
  using S = LimitEntry::Scale;
  using enum Term;
  const auto t = column_terms(rc);
  LimitColumn out;
  auto entry = [](Term term, S s) { return term == zero ? LimitEntry{} : LimitEntry{s, term}; };
  switch (rc.table) {
    case Table::I:
      out.p1 = entry(t.p1, S::rho_m_n);
      out.p21 = entry(t.p21, (t.p21 == T2 || t.p21 == T3) ? S::constant : S::rho_m_n);
      out.p22 = entry(t.p22, S::rho_m_n);
      break;
    case Table::II:
      out.p1 = entry(t.p1, S::rho_m_n);
      out.p21 = entry(t.p21, S::rho_m_n);
      out.p22 = entry(t.p22, S::rho_m_n);
      break;
    case Table::III:
    case Table::IV:
      out.p1 = entry(t.p1, S::rho_m_m);
      out.p1_has_s_tilde = true;
      out.p21 = entry(t.p21, (t.p21 == Q4 || t.p21 == Q5 || t.p21 == Q6) ? S::constant : S::rho_m_m);
      out.p22 = entry(t.p22, S::rho_m_m);
      break;
  }
  return out;
}

// Coefficients of the joint high-SNR expansion
// P ~ floor + coeff_n / rho_m^n + coeff_m / rho_m^m; functions of
// (M, m, n, beta, eps_m, eta) only.
struct JointLimitCoefficients {
  RegimeClass regime;
  double floor = 0.0;
  double coeff_n = 0.0;
  double coeff_m = 0.0;
  int n = 0;
  int m = 0;

  double assemble(double rho_m) const {
    return floor + coeff_n / std::pow(rho_m, n) + coeff_m / std::pow(rho_m, m);
  }
};

template <class Real>
Real limit_entry_value(const AsymptoticConstants<Real>& a, Term term) {
  using enum Term;
  switch (term) {
    case T2: case T3: case Q4: case Q5: case Q6: return detail::floor_entry(a, term);
    case T1: case T4: case T5: case T6: case T7: return detail::lower_first_limit(a, term);
    default: return detail::upper_first_limit(a, term);
  }
}

template <class Real>
bool limit_entry_singular(const AsymptoticConstants<Real>& a, Term term) {
  using enum Term;
  switch (term) {
    case T1: case Q1: case Q3: return a.varpi1_singular;
    case T4: case T7: case Q10: return a.varpi4_singular;
    case T5: return a.varpi1_singular || a.varpi5_singular;
    case Q7: return a.varpi4_singular || a.varpi5_singular;
    case Q8: return a.varpi5_singular;
    default: return false;
  }
}

inline JointLimitCoefficients joint_limit_coefficients(const SystemConfig& cfg) {
  cfg.validate();
  const auto a = derive_asymptotic_constants<Precise>(cfg);
  JointLimitCoefficients out;
  out.regime = classify_regime(derive_constants<Precise>(cfg));
  out.n = cfg.n;
  out.m = cfg.m;
  const auto col = limit_column(out.regime);
  Precise floor = 0, cn = 0, cm = 0;
  for (const LimitEntry& e : {col.p1, col.p21, col.p22}) {
    if (e.scale == LimitEntry::Scale::none) continue;
    if (limit_entry_singular(a, e.term)) {
      throw SingularRegime("joint-limit entry " + std::string(to_string(e.term)) + " has a vanishing denominator");
    }
    const Precise v = limit_entry_value(a, e.term);
    switch (e.scale) {
      case LimitEntry::Scale::constant: floor += v; break;
      case LimitEntry::Scale::rho_m_n: cn += v; break;
      case LimitEntry::Scale::rho_m_m: cm += v; break;
      case LimitEntry::Scale::none: break;
    }
  }
  if (col.p1_has_s_tilde) cn += a.s_tilde;
  out.floor = static_cast<double>(floor);
  out.coeff_n = static_cast<double>(cn);
  out.coeff_m = static_cast<double>(cm);
  return out;
}

// Joint limit rho_n, rho_m -> inf at fixed eta, evaluated at the cfg's rho_m.
inline ProbabilityEstimate ptilde_joint_limit(const SystemConfig& cfg) {
  const auto c = joint_limit_coefficients(cfg);
  ProbabilityEstimate e;
  e.value = std::clamp(c.assemble(cfg.rho_m), 0.0, 1.0);
  e.method = Method::asymptotic;
  return e;
}

// rho_m -> inf with rho_n fixed: the probability settles to a constant.
inline ProbabilityEstimate ptilde_floor_rho_m_inf(const SystemConfig& cfg) {
  cfg.validate();
  using R = Precise;
  const int M = cfg.users;
  const int m = cfg.m;
  const int n = cfg.n;
  const R b = cfg.beta;
  const R rho_n = cfg.rho_n;
  const R w3 = (1 - 2 * b) / (b * b * rho_n);
  const int lo = std::min(m, n);
  const int hi = std::max(m, n);
  const R pair = num::factorial<R>(M) / (num::factorial<R>(lo - 1) * num::factorial<R>(hi - lo - 1) * num::factorial<R>(M - hi));
  R total = 0;
  for (int p = 0; p < hi - lo; ++p) {
    R cp = num::binomial<R>(hi - lo - 1, p);
    if ((hi - lo - 1 - p) % 2) cp = -cp;
    for (int l = 0; l < lo; ++l) {
      R cl = num::binomial<R>(lo - 1, l);
      if (l % 2) cl = -cl;
      R v;
      if (m < n) {
        const R B = M - m - p;
        v = (phi_kernel(R(0), w3, R(M - m + l + 1)) - num::exp(R(-B * w3)) * phi_kernel(R(0), w3, R(l + p + 1))) / B;
      } else {
        const R G = M - n + l + 1;
        v = (1 / R(M - n - p) - 1 / G) * (-num::expm1(R(-G * w3))) / R(l + p + 1);
      }
      total += cp * cl * v;
    }
  }
  ProbabilityEstimate e;
  e.value = std::clamp(static_cast<double>(pair * total), 0.0, 1.0);
  e.method = Method::asymptotic;
  return e;
}

// rho_n -> inf with rho_m fixed: decay as rho_n^-n.
inline ProbabilityEstimate ptilde_rho_n_inf(const SystemConfig& cfg) {
  cfg.validate();
  using R = Precise;
  const int M = cfg.users;
  const int m = cfg.m;
  const int n = cfg.n;
  const R b = cfg.beta;
  const R rho_n = cfg.rho_n;
  const R rho_m = cfg.rho_m;
  const R ratio = (1 - 2 * b) / (b * b);
  const R single = num::factorial<R>(M) / (num::factorial<R>(n - 1) * num::factorial<R>(M - n));
  const R lead = single * num::ipow(ratio, n) / R(n);
  R value = 0;
  if (m < n) {
    const R pair = num::factorial<R>(M) / (num::factorial<R>(m - 1) * num::factorial<R>(n - m - 1) * num::factorial<R>(M - n));
    R s = 0;
    for (int p = 0; p < n - m; ++p) {
      R t = num::binomial<R>(n - m - 1, p) / R(n - m - p) * (1 / R(m + p) - 1 / R(n));
      s += (p % 2) ? R(-t) : t;
    }
    value = pair * s * num::ipow(ratio, n);
  } else {
    value = lead;
    const R eps = num::expm1(R(R(cfg.rate_m) * boost::math::constants::ln_two<R>()));
    if (eps > b / (1 - b)) {
      const R alpha = eps / rho_m;
      const R pair =
          num::factorial<R>(M) / (num::factorial<R>(n - 1) * num::factorial<R>(m - n - 1) * num::factorial<R>(M - m));
      R outer = 0;
      for (int s = 0; s < m - n; ++s) {
        const R D = M - m + 1 + s;
        R inner = 0;
        for (int i = 1; i <= n; ++i) {
          const R lhs = num::ipow(R(1 - b), i) * num::ipow(rho_m, i) * num::ipow(R(1 - 2 * b), n - i) /
                            num::ipow(b, 2 * n) -
                        (((n - i) % 2) ? R(-1) : R(1)) * num::ipow(alpha, -i) / num::ipow(b, n);
          R moment = num::ipow(alpha, i) / D;
          for (int q = 1; q <= i; ++q) {
            moment += num::factorial<R>(i) * num::ipow(alpha, i - q) / (num::factorial<R>(i - q) * num::ipow(D, q + 1));
          }
          inner += num::binomial<R>(n, i) * lhs * moment;
        }
        inner += (num::ipow(ratio, n) - num::ipow(R(-1 / b), n)) / D;
        R t = num::binomial<R>(m - n - 1, s) / R(n) * num::exp(R(-D * alpha)) * inner;
        outer += (s % 2) ? R(-t) : t;
      }
      value += pair * outer;
    }
  }
  ProbabilityEstimate e;
  e.value = std::clamp(static_cast<double>(value / num::ipow(rho_n, n)), 0.0, 1.0);
  e.method = Method::asymptotic;
  return e;
}

// Least-squares slope of log10(P) against SNR/10 (i.e. log10 of the linear SNR).
inline double decay_exponent_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw DomainError("decay fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& [db, prob] : points) {
    if (!(prob > 0.0)) throw DomainError("decay fit needs positive probabilities");
    if (!(db > prev)) throw DomainError("decay fit needs strictly increasing SNR");
    prev = db;
    const double x = db / 10.0;
    const double y = std::log10(prob);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(points.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace hnoma
