#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "hnoma/config.hpp"

namespace hnoma {

enum class Scheme { oma, fsic_hybrid, hsic_hybrid };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::oma: return "OMA";
    case Scheme::fsic_hybrid: return "FSIC_HYBRID";
    case Scheme::hsic_hybrid: return "HSIC_HYBRID";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "OMA") return Scheme::oma;
  if (up == "FSIC" || up == "FSIC_HYBRID") return Scheme::fsic_hybrid;
  if (up == "HSIC" || up == "HSIC_HYBRID") return Scheme::hsic_hybrid;
  throw ConfigError("unknown scheme '" + std::string(text) + "'");
}

enum class LogBase { natural, binary };

// Maximum interference power U_m tolerates while still meeting R_m.
inline double interference_threshold(double rho_m, double h_m_sq, double rate_m) {
  const double eps = std::expm1(rate_m * std::numbers::ln2);
  return std::max(0.0, rho_m * h_m_sq / eps - 1.0);
}

struct StageRate {
  double rate = 0.0;  // BPCU
  int sic_stage = 2;  // decode stage of U_n in the m-th slot
};

namespace detail {

inline double to_bits(double nats) { return nats * std::numbers::log2e; }

// Type I admission: U_n's received power fits under tau_m, so it is decoded last.
inline bool second_stage_admissible(const SystemConfig& cfg, double h_m_sq, double h_n_sq) {
  return cfg.beta * cfg.rho_n * h_n_sq <= interference_threshold(cfg.rho_m, h_m_sq, cfg.rate_m);
}

// Received SINR of U_n in the shared slot under the given decode stage.
inline double noma_sinr(const SystemConfig& cfg, double h_m_sq, double h_n_sq, int stage) {
  const double signal = cfg.beta * cfg.rho_n * h_n_sq;
  return stage == 2 ? signal : signal / (cfg.rho_m * h_m_sq + 1.0);
}

}  // namespace detail

inline StageRate hsic_noma_rate(const SystemConfig& cfg, double h_m_sq, double h_n_sq) {
  const int stage = detail::second_stage_admissible(cfg, h_m_sq, h_n_sq) ? 2 : 1;
  return {detail::to_bits(std::log1p(detail::noma_sinr(cfg, h_m_sq, h_n_sq, stage))), stage};
}

inline double fsic_noma_rate(const SystemConfig& cfg, double h_m_sq, double h_n_sq) {
  return detail::to_bits(std::log1p(detail::noma_sinr(cfg, h_m_sq, h_n_sq, 1)));
}

struct RateBreakdown {
  double noma_slot_rate = 0.0;     // U_n in the m-th slot
  double oma_slot_rate = 0.0;      // U_n in its own slot at reduced power
  double oma_baseline_rate = 0.0;  // U_n alone at full power
  int sic_stage = 1;
};

inline RateBreakdown rate_breakdown(Scheme scheme, const SystemConfig& cfg, double h_m_sq,
                                    double h_n_sq) {
  RateBreakdown out;
  out.oma_baseline_rate = detail::to_bits(std::log1p(cfg.rho_n * h_n_sq));
  if (scheme == Scheme::oma) return out;
  out.oma_slot_rate = detail::to_bits(std::log1p(cfg.beta * cfg.rho_n * h_n_sq));
  if (scheme == Scheme::hsic_hybrid) {
    const auto r = hsic_noma_rate(cfg, h_m_sq, h_n_sq);
    out.noma_slot_rate = r.rate;
    out.sic_stage = r.sic_stage;
  } else {
    out.noma_slot_rate = fsic_noma_rate(cfg, h_m_sq, h_n_sq);
  }
  return out;
}

// True iff the two-slot hybrid rate does not exceed the full-power OMA rate.
inline bool hybrid_vs_oma_indicator(Scheme scheme, const SystemConfig& cfg, double h_m_sq,
                                    double h_n_sq, LogBase base = LogBase::natural) {
  if (scheme == Scheme::oma) throw DomainError("indicator compares a hybrid scheme against OMA");
  int stage = 1;
  if (scheme == Scheme::hsic_hybrid && detail::second_stage_admissible(cfg, h_m_sq, h_n_sq))
    stage = 2;
  const double reduced = cfg.beta * cfg.rho_n * h_n_sq;
  const double noma = detail::noma_sinr(cfg, h_m_sq, h_n_sq, stage);
  if (base == LogBase::binary) {
    return std::log2(1.0 + noma) + std::log2(1.0 + reduced) <= std::log2(1.0 + cfg.rho_n * h_n_sq);
  }
  return std::log1p(noma) + std::log1p(reduced) <= std::log1p(cfg.rho_n * h_n_sq);
}

// Whenever U_m would succeed in OMA it still succeeds with U_n admitted under HSIC.
inline bool legacy_transparency_check(const SystemConfig& cfg, double h_m_sq, double h_n_sq) {
  const double snr_m = cfg.rho_m * h_m_sq;
  const double eps = cfg.eps_m();
  if (snr_m < eps) return true;  // U_m is in outage under OMA as well
  if (!detail::second_stage_admissible(cfg, h_m_sq, h_n_sq)) return true;
  // U_m decoded first, treating U_n as noise. Compared in SINR form so the
  // tau_m boundary meets R_m exactly.
  const double interference = cfg.beta * cfg.rho_n * h_n_sq;
  const double slack = 1e-12 * std::max(1.0, snr_m);
  return snr_m + slack >= eps * (interference + 1.0);
}

enum class Region { p11, p12, p21, p22, none };

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::p11: return "P11";
    case Region::p12: return "P12";
    case Region::p21: return "P21";
    case Region::p22: return "P22";
    case Region::none: return "NONE";
  }
  return "?";
}

// y = slope * x + intercept in the (|h_m|^2, |h_n|^2) plane.
struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double at(double x) const { return slope * x + intercept; }
};

// Boundary curves of the four-way decomposition of the HSIC event.
struct RegionCurves {
  double alpha = 0.0;   // |h_m|^2 above which tau_m > 0
  double omega2 = 0.0;  // |h_m|^2 at which Phi reaches omega3
  double omega3 = 0.0;  // |h_n|^2 bound of the Type I event
  Line phi;             // Type I admission boundary
  Line psi;             // Type II event boundary
};

inline RegionCurves region_curves(const SystemConfig& cfg) {
  const double b = cfg.beta;
  const double eps = cfg.eps_m();
  RegionCurves c;
  c.alpha = eps / cfg.rho_m;
  c.omega2 = (1.0 - b) * c.alpha / b;
  c.omega3 = (1.0 - 2.0 * b) / (b * b * cfg.rho_n);
  c.phi = {cfg.rho_m / (eps * b * cfg.rho_n), -1.0 / (b * cfg.rho_n)};
  c.psi = {(1.0 - b) * cfg.rho_m / (b * b * cfg.rho_n), c.omega3};
  return c;
}

inline Region lemma1_region(const SystemConfig& cfg, double h_m_sq, double h_n_sq) {
  const auto c = region_curves(cfg);
  const double x = h_m_sq;
  const double y = h_n_sq;
  if (x > c.alpha && detail::second_stage_admissible(cfg, x, y)) {
    if (x < c.omega2) return Region::p11;
    return y <= c.omega3 ? Region::p12 : Region::none;
  }
  if (y <= c.psi.at(x)) return x > c.alpha ? Region::p21 : Region::p22;
  return Region::none;
}

}  // namespace hnoma
