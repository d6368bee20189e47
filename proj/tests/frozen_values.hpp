#pragma once
// Reference probabilities computed once with reference_oracle.hpp (1-D
// conditional-beta integration) and frozen here. The closed form and the 2-D
// quadrature are both checked against these numbers.

#include "hnoma/config.hpp"
#include "reference_oracle.hpp"

namespace frozen {

struct Case {
  int users, m, n;
  double beta, rate_m, snr_db, ratio;
  double value;

  hnoma::SystemConfig config() const {
    hnoma::SystemConfig c;
    c.users = users;
    c.m = m;
    c.n = n;
    c.beta = beta;
    c.rate_m = rate_m;
    return hnoma::with_snr(c, snr_db, ratio);
  }
  oracle::Cfg oracle_config() const {
    const auto c = config();
    return {c.users, c.m, c.n, c.beta, c.rho_n, c.rho_m, c.rate_m};
  }
};

inline constexpr double third = 1.0 / 3.0;

inline constexpr Case cases[] = {
    {5, 1, 5, third, 0.2, 10.0, 5.0, 0.0032867987377432515},
    {5, 1, 5, third, 0.2, 20.0, 5.0, 8.8232873358187743e-08},
    {5, 1, 5, third, 0.2, 30.0, 5.0, 9.7972253505051892e-13},
    {5, 5, 1, third, 0.2, 20.0, 5.0, 0.13929202357494216},
    {5, 2, 5, third, 0.2, 20.0, 5.0, 1.0932875889037478e-07},
    {5, 2, 5, third, 1.0, 20.0, 7.0, 8.5414963585607265e-07},
    {5, 5, 2, third, 1.0, 20.0, 2.5, 0.0082299155239686939},
    {6, 4, 2, 0.2, 0.5, 25.0, 2.0, 0.028417710076918047},
};

// Region masses (P11, P12, P21, P22) for M=5, m=2, n=5, beta=1/3, R_m=0.2,
// ratio 5, 20 dB.
inline constexpr double regions_m2n5_20db[4] = {1.1045513664240002e-09, 4.2444448961154566e-09,
                                                8.8615642627872174e-08, 1.5364119999962866e-08};

}  // namespace frozen
