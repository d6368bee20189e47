#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>
#include <utility>

#include <boost/math/constants/constants.hpp>

#include "hnoma/config.hpp"
#include "hnoma/estimate.hpp"
#include "hnoma/numeric.hpp"

namespace hnoma {

// Every symbol the exact and asymptotic expressions need, evaluated once per
// configuration. omega1/omega4/omega5 are set to +infinity and flagged when
// their denominators vanish (relative 1e-9).
template <class Real = Precise>
struct DerivedConstants {
  int users = 0;
  int m = 0;
  int n = 0;
  Real beta, rho_n, rho_m, eta;
  Real eps_m;    // 2^{R_m} - 1
  Real alpha_m;  // eps_m / rho_m
  Real omega1, omega2, omega3, omega4, omega5;
  bool omega1_singular = false;
  bool omega4_singular = false;
  bool omega5_singular = false;
  Real kappa1, kappa2, kappa3;
  Real inv_beta_eps;       // 1/(beta eps_m)
  Real unit_slope_ratio;   // (1-beta)/beta^2, where Psi has unit slope
  Real eps_threshold;      // beta/(1-beta)
  Real pair_coeff;         // c_mn for m<n, c-hat_mn for m>n
  Real single_coeff;       // c-hat_n

  bool legacy_weaker() const { return m < n; }
  int gap() const { return std::abs(n - m); }
  int lower_index() const { return std::min(m, n); }

  // (-1)^{gap-1-p} C(gap-1, p)
  Real coeff_p(int p) const {
    const int k = gap() - 1;
    const Real c = num::binomial<Real>(k, p);
    return ((k - p) % 2 == 0) ? c : Real(-c);
  }
  // (-1)^l C(min(m,n)-1, l)
  Real coeff_l(int l) const {
    const Real c = num::binomial<Real>(lower_index() - 1, l);
    return (l % 2 == 0) ? c : Real(-c);
  }

  // m<n composites
  Real r(int l, int p) const { return Real(l + p + 1) + Real(users - m - p) / (beta * rho_n * alpha_m); }
  Real a(int l, int p) const {
    return Real(l + p + 1) + Real(users - m - p) * (1 - beta) * rho_m / (beta * beta * rho_n);
  }
  // m>n composites
  Real t(int l, int p) const { return Real(users - n - p) + Real(l + p + 1) / (beta * rho_n * alpha_m); }
  Real s(int l, int p) const {
    return Real(users - n - p) + Real(l + p + 1) * (1 - beta) * rho_m / (beta * beta * rho_n);
  }
};

namespace detail {

// numerator / (lhs - rhs), or +infinity when lhs and rhs agree to 1e-9.
template <class Real>
std::pair<Real, bool> guarded_ratio(const Real& numerator, const Real& lhs, const Real& rhs) {
  using std::abs;
  const Real den = lhs - rhs;
  const Real scale = std::max(abs(lhs), abs(rhs));
  if (abs(den) <= Real(1e-9) * scale) return {num::infinity<Real>(), true};
  return {numerator / den, false};
}

}  // namespace detail

template <class Real = Precise>
DerivedConstants<Real> derive_constants(const SystemConfig& cfg) {
  cfg.validate();
  DerivedConstants<Real> k;
  k.users = cfg.users;
  k.m = cfg.m;
  k.n = cfg.n;
  k.beta = Real(cfg.beta);
  k.rho_n = Real(cfg.rho_n);
  k.rho_m = Real(cfg.rho_m);
  k.eta = k.rho_n / k.rho_m;
  const Real& b = k.beta;
  k.eps_m = num::expm1(Real(Real(cfg.rate_m) * boost::math::constants::ln_two<Real>()));
  k.alpha_m = k.eps_m / k.rho_m;

  std::tie(k.omega1, k.omega1_singular) = detail::guarded_ratio(Real(1), Real(1 / k.alpha_m), Real(b * k.rho_n));
  k.omega2 = (1 - b) * k.alpha_m / b;
  k.omega3 = (1 - 2 * b) / (b * b * k.rho_n);
  std::tie(k.omega4, k.omega4_singular) =
      detail::guarded_ratio(Real(1 - 2 * b), Real(b * b * k.rho_n), Real((1 - b) * k.rho_m));
  std::tie(k.omega5, k.omega5_singular) =
      detail::guarded_ratio(Real(1 - b), Real(b / k.alpha_m), Real((1 - b) * k.rho_m));

  k.kappa1 = (1 - 2 * b) / ((1 - b) * b * k.eps_m);
  k.kappa2 = (1 - 2 * b) / (b * b * k.eps_m) + (1 - b) / (b * b);
  k.kappa3 = k.kappa1 + 1 / b;
  k.inv_beta_eps = 1 / (b * k.eps_m);
  k.unit_slope_ratio = (1 - b) / (b * b);
  k.eps_threshold = b / (1 - b);

  const int M = cfg.users;
  const int lo = std::min(cfg.m, cfg.n);
  const int hi = std::max(cfg.m, cfg.n);
  k.pair_coeff = num::factorial<Real>(M) /
                 (num::factorial<Real>(lo - 1) * num::factorial<Real>(hi - lo - 1) * num::factorial<Real>(M - hi));
  k.single_coeff = num::factorial<Real>(M) / (num::factorial<Real>(cfg.n - 1) * num::factorial<Real>(M - cfg.n));
  return k;
}

enum class Table { I = 1, II = 2, III = 3, IV = 4 };

inline std::string_view to_string(Table t) {
  switch (t) {
    case Table::I: return "I";
    case Table::II: return "II";
    case Table::III: return "III";
    case Table::IV: return "IV";
  }
  return "?";
}

struct RegimeClass {
  Table table = Table::I;
  int column = 1;           // 1-based column of the table
  bool eps_branch = false;  // eps_m > beta/(1-beta)

  int column_count() const { return eps_branch ? 5 : 4; }
  bool operator==(const RegimeClass&) const = default;
};

template <class Real>
RegimeClass classify_regime(const DerivedConstants<Real>& k) {
  if (k.m == k.n) throw DomainError("regime needs m != n");
  RegimeClass rc;
  rc.eps_branch = k.eps_m > k.eps_threshold;
  if (k.m < k.n) {
    rc.table = rc.eps_branch ? Table::I : Table::II;
  } else {
    rc.table = rc.eps_branch ? Table::III : Table::IV;
  }
  // Column headers are "<=" on the right edge of each interval.
  rc.column = 1;
  auto step = [&](const Real& edge) {
    if (k.eta > edge) ++rc.column;
  };
  if (rc.eps_branch) {
    step(k.kappa1);
    step(k.inv_beta_eps);
    step(k.unit_slope_ratio);
    step(k.kappa2);
  } else {
    step(k.kappa1);
    step(k.kappa3);
    step(k.kappa2);
  }
  return rc;
}

inline RegimeClass classify_regime(const SystemConfig& cfg) {
  return classify_regime(derive_constants<Precise>(cfg));
}

// Named entries of the exact-result tables.
enum class Term { zero, T1, T2, T3, T4, T5, T6, T7, Q1, Q2, Q3, Q4, Q5, Q6, Q7, Q8, Q9, Q10 };

inline std::string_view to_string(Term t) {
  static constexpr std::string_view names[] = {"0",  "T1", "T2", "T3", "T4", "T5", "T6", "T7", "Q1",
                                               "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Q8", "Q9", "Q10"};
  return names[static_cast<int>(t)];
}

struct ColumnTerms {
  Term p1 = Term::zero;
  Term p21 = Term::zero;
  Term p22 = Term::zero;
};

inline ColumnTerms column_terms(const RegimeClass& rc) {
  using enum Term;
  const int c = rc.column - 1;
  switch (rc.table) {
    case Table::I: {
      static constexpr Term p1[] = {T1, zero, zero, zero, zero};
      static constexpr Term p21[] = {T2, T2, T3, T4, zero};
      static constexpr Term p22[] = {T6, T6, T6, T6, T7};
      return {p1[c], p21[c], p22[c]};
    }
    case Table::II: {
      static constexpr Term p1[] = {T1, zero, zero, zero};
      static constexpr Term p21[] = {T5, T5, T4, zero};
      static constexpr Term p22[] = {T6, T6, T6, T7};
      return {p1[c], p21[c], p22[c]};
    }
    case Table::III: {
      static constexpr Term p1[] = {Q1, Q2, Q2, Q2, Q2};
      static constexpr Term p21[] = {Q3, Q3, Q4, Q5, Q6};
      static constexpr Term p22[] = {Q9, Q9, Q9, Q9, Q10};
      return {p1[c], p21[c], p22[c]};
    }
    case Table::IV: {
      static constexpr Term p1[] = {Q1, Q2, Q2, Q2};
      static constexpr Term p21[] = {Q3, Q3, Q7, Q8};
      static constexpr Term p22[] = {Q9, Q9, Q9, Q10};
      return {p1[c], p21[c], p22[c]};
    }
  }
  return {};
}

// True if the term reads a threshold constant currently flagged singular.
template <class Real>
bool term_is_singular(const DerivedConstants<Real>& k, Term term) {
  using enum Term;
  const bool w1 = k.omega1_singular;
  const bool w4 = k.omega4_singular;
  const bool w5 = k.omega5_singular;
  switch (term) {
    case T1: case T2: case Q1: case Q3: return w1;
    case T4: case T7: case Q5: case Q10: return w4;
    case T5: return w1 || w5;
    case Q7: return w4 || w5;
    case Q8: return w5;
    default: return false;
  }
}

namespace detail {

// c_mn sum_p c_p sum_l c_l (1/(M-m-p)) * bracket(l, p), m < n.
template <class Real, class Bracket>
Real sum_lower_first(const DerivedConstants<Real>& k, Bracket&& bracket) {
  Real total = 0;
  for (int p = 0; p < k.gap(); ++p) {
    for (int l = 0; l < k.m; ++l) {
      total += k.coeff_p(p) * k.coeff_l(l) * bracket(l, p) / Real(k.users - k.m - p);
    }
  }
  return k.pair_coeff * total;
}

// c-hat_mn sum_p c-hat_p sum_l c-hat_l (1/(l+p+1)) * bracket(l, p), m > n.
template <class Real, class Bracket>
Real sum_upper_first(const DerivedConstants<Real>& k, Bracket&& bracket) {
  Real total = 0;
  for (int p = 0; p < k.gap(); ++p) {
    for (int l = 0; l < k.n; ++l) {
      total += k.coeff_p(p) * k.coeff_l(l) * bracket(l, p) / Real(l + p + 1);
    }
  }
  return k.pair_coeff * total;
}

template <class Real>
Real lower_first_term(const DerivedConstants<Real>& k, Term term) {
  const Real& al = k.alpha_m;
  const Real& w1 = k.omega1;
  const Real& w2 = k.omega2;
  const Real& w3 = k.omega3;
  const Real& w4 = k.omega4;
  const Real& w5 = k.omega5;
  const Real zero = 0;
  return sum_lower_first(k, [&](int l, int p) -> Real {
    const Real A = l + p + 1;
    const Real B = k.users - k.m - p;
    const Real G = k.users - k.m + l + 1;
    const Real lift = B / (k.beta * k.rho_n);  // e^{(M-m-p)/(beta rho_n)}
    const Real drop = -B * w3;                 // e^{-(M-m-p) omega3}
    switch (term) {
      case Term::T1:
        return phi_kernel(w1, w3, G) - shifted_phi(lift, w1, w2, k.r(l, p)) - shifted_phi(drop, w2, w3, A);
      case Term::T2:
        return phi_kernel(al, w1, G) - shifted_tail(drop, al, k.a(l, p)) +
               shifted_tail(lift, w1, k.r(l, p));
      case Term::T3:
        return shifted_tail(zero, al, G) - shifted_tail(drop, al, k.a(l, p));
      case Term::T4:
        return phi_kernel(al, w4, G) - shifted_phi(drop, al, w4, k.a(l, p));
      case Term::T5:
        return phi_kernel(al, w1, G) - shifted_phi(drop, al, w5, k.a(l, p)) + shifted_phi(lift, w1, w5, k.r(l, p));
      case Term::T6:
        return phi_kernel(zero, al, G) - shifted_phi(drop, zero, al, k.a(l, p));
      case Term::T7:
        return phi_kernel(zero, w4, G) - shifted_phi(drop, zero, w4, k.a(l, p));
      default:
        throw DomainError("term " + std::string(to_string(term)) + " requires m > n");
    }
  });
}

template <class Real>
Real upper_first_term(const DerivedConstants<Real>& k, Term term) {
  const Real& al = k.alpha_m;
  const Real& w1 = k.omega1;
  const Real& w2 = k.omega2;
  const Real& w3 = k.omega3;
  const Real& w4 = k.omega4;
  const Real& w5 = k.omega5;
  const Real zero = 0;
  return sum_upper_first(k, [&](int l, int p) -> Real {
    const Real A = l + p + 1;
    const Real B = k.users - k.n - p;
    const Real G = k.users - k.n + l + 1;
    const Real lift = A / (k.beta * k.rho_n);  // e^{(l+p+1)/(beta rho_n)}
    const Real drop = -A * w3;                 // e^{-(l+p+1) omega3}
    switch (term) {
      case Term::Q1:
        // Includes the |h_m|^2 > omega3 tail, where |h_n|^2 <= omega3 binds.
        return phi_kernel(al, w3, B) - shifted_phi(lift, al, w1, k.t(l, p)) - phi_kernel(w1, w3, G) -
               shifted_tail(zero, w3, B) * num::expm1(drop);
      case Term::Q2:
        return shifted_tail(zero, al, B) - shifted_tail(drop, w2, B) - shifted_phi(lift, al, w2, k.t(l, p));
      case Term::Q3:
        return shifted_phi(lift, al, w1, k.t(l, p)) - phi_kernel(al, w1, G);
      case Term::Q4:
        return shifted_tail(lift, al, k.t(l, p)) - shifted_tail(zero, al, G);
      case Term::Q5:
        return shifted_tail(lift, al, k.t(l, p)) - shifted_tail(drop, w4, k.s(l, p)) - phi_kernel(al, w4, G);
      case Term::Q6:
        return shifted_tail(lift, al, k.t(l, p)) - shifted_tail(drop, al, k.s(l, p));
      case Term::Q7:
        return shifted_phi(lift, al, w5, k.t(l, p)) - phi_kernel(al, w4, G) - shifted_phi(drop, w4, w5, k.s(l, p));
      case Term::Q8:
        return shifted_phi(lift, al, w5, k.t(l, p)) - shifted_phi(drop, al, w5, k.s(l, p));
      case Term::Q9:
        return phi_kernel(zero, al, B) - phi_kernel(zero, al, G);
      case Term::Q10:
        // Exponent sign taken so the |h_m|^2 in (omega4, alpha) strip stays a probability.
        return phi_kernel(zero, al, B) - phi_kernel(zero, w4, G) - shifted_phi(drop, w4, al, k.s(l, p));
      default:
        throw DomainError("term " + std::string(to_string(term)) + " requires m < n");
    }
  });
}

}  // namespace detail

// Value of one table entry. T-terms need m < n, Q-terms m > n.
template <class Real>
Real term_value(const DerivedConstants<Real>& k, Term term) {
  if (term == Term::zero) return Real(0);
  const bool is_t = term <= Term::T7;
  if (is_t != (k.m < k.n)) {
    throw DomainError("term " + std::string(to_string(term)) + " does not apply to this (m, n) ordering");
  }
  return is_t ? detail::lower_first_term(k, term) : detail::upper_first_term(k, term);
}

template <class Real>
struct ClosedFormTerms {
  Real p1 = 0;
  Real p21 = 0;
  Real p22 = 0;
  Real total() const { return p1 + p21 + p22; }
};

// Evaluates the entries of an explicitly chosen column. No singularity or range
// checks; used for boundary-continuity studies.
template <class Real>
ClosedFormTerms<Real> evaluate_column(const DerivedConstants<Real>& k, const RegimeClass& rc) {
  const auto terms = column_terms(rc);
  return {term_value(k, terms.p1), term_value(k, terms.p21), term_value(k, terms.p22)};
}

struct ClosedFormResult {
  ProbabilityEstimate estimate;
  RegimeClass regime;
  ColumnTerms terms;
  double p1 = 0.0;
  double p21 = 0.0;
  double p22 = 0.0;
  double raw = 0.0;  // unclipped sum
};

namespace detail {

template <class Real>
ClosedFormResult closed_form_checked(const SystemConfig& cfg) {
  const auto k = derive_constants<Real>(cfg);
  const auto rc = classify_regime(k);
  const auto terms = column_terms(rc);
  for (Term t : {terms.p1, terms.p21, terms.p22}) {
    if (term_is_singular(k, t)) {
      throw SingularRegime("closed form term " + std::string(to_string(t)) + " of table " +
                           std::string(to_string(rc.table)) + " column " + std::to_string(rc.column) +
                           " has a vanishing denominator; use quadrature");
    }
  }
  const auto parts = evaluate_column(k, rc);
  ClosedFormResult out;
  out.regime = rc;
  out.terms = terms;
  out.p1 = static_cast<double>(parts.p1);
  out.p21 = static_cast<double>(parts.p21);
  out.p22 = static_cast<double>(parts.p22);
  out.raw = static_cast<double>(parts.total());
  if (!(out.raw >= -1e-9 && out.raw <= 1.0 + 1e-9)) {
    throw Error("closed form produced " + std::to_string(out.raw) + ", outside [0, 1]");
  }
  out.estimate.value = std::clamp(out.raw, 0.0, 1.0);
  out.estimate.method = Method::closed_form;
  return out;
}

}  // namespace detail

template <class Real = Precise>
ClosedFormResult ptilde_closed_m_lt_n(const SystemConfig& cfg) {
  cfg.validate();
  if (cfg.m >= cfg.n) throw DomainError("ptilde_closed_m_lt_n requires m < n");
  return detail::closed_form_checked<Real>(cfg);
}

template <class Real = Precise>
ClosedFormResult ptilde_closed_m_gt_n(const SystemConfig& cfg) {
  cfg.validate();
  if (cfg.m <= cfg.n) throw DomainError("ptilde_closed_m_gt_n requires m > n");
  return detail::closed_form_checked<Real>(cfg);
}

template <class Real = Precise>
ClosedFormResult ptilde_closed(const SystemConfig& cfg) {
  cfg.validate();
  return cfg.m < cfg.n ? ptilde_closed_m_lt_n<Real>(cfg) : ptilde_closed_m_gt_n<Real>(cfg);
}

}  // namespace hnoma
