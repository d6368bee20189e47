#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hnoma {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scenario parameters (exit code 2 in the CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called outside its mathematical domain (e.g. m >= n for the m<n closed form).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A threshold constant used by the selected closed-form column has a vanishing
// denominator. Callers should fall back to quadrature.
class SingularRegime : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// One legacy/opportunistic user pair among M Rayleigh-faded uplink users.
// Noise power and slot duration are both normalized to 1.
struct SystemConfig {
  int users = 5;             // M
  int m = 1;                 // order index of the legacy user U_m
  int n = 2;                 // order index of the opportunistic user U_n
  double beta = 1.0 / 3.0;   // power-reducing coefficient, 0 < beta < 1/2
  double rho_n = 100.0;      // transmit SNR of U_n (linear)
  double rho_m = 20.0;       // transmit SNR of U_m (linear)
  double rate_m = 0.2;       // target rate of U_m in BPCU

  void validate() const {
    if (users < 2) throw ConfigError("users must be >= 2");
    if (m < 1 || m > users) throw ConfigError("m must lie in 1..users");
    if (n < 1 || n > users) throw ConfigError("n must lie in 1..users");
    if (m == n) throw ConfigError("m and n must differ");
    if (!(beta > 0.0 && beta < 0.5)) throw ConfigError("beta must lie in (0, 1/2)");
    if (!(rho_n > 0.0) || !std::isfinite(rho_n)) throw ConfigError("rho_n must be positive");
    if (!(rho_m > 0.0) || !std::isfinite(rho_m)) throw ConfigError("rho_m must be positive");
    if (!(rate_m > 0.0) || !std::isfinite(rate_m)) throw ConfigError("R_m must be positive");
  }

  double eta() const { return rho_n / rho_m; }
  // 2^R_m - 1, computed without cancellation for small R_m.
  double eps_m() const { return std::expm1(rate_m * std::numbers::ln2); }
  double alpha_m() const { return eps_m() / rho_m; }
};

// SNR is rho_n in dB; rho_m follows from the power ratio rho_n / rho_m.
inline SystemConfig with_snr(SystemConfig cfg, double snr_db, double ratio) {
  cfg.rho_n = db_to_linear(snr_db);
  cfg.rho_m = cfg.rho_n / ratio;
  return cfg;
}

}  // namespace hnoma
