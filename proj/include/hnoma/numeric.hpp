#pragma once

#include <cmath>
#include <limits>
#include <type_traits>

#include <boost/math/special_functions/expm1.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace hnoma {

// Alternating binomial sums in the closed forms cancel by up to ~20 decimal
// digits at 50 dB, so the exact expressions are evaluated in 100-digit binary
// floating point.
using Precise = boost::multiprecision::cpp_bin_float_100;

namespace num {

template <class Real>
Real expm1(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::expm1(x);
  } else {
    return boost::math::expm1(x);
  }
}

template <class Real>
Real exp(const Real& x) {
  using std::exp;
  return exp(x);
}

template <class Real>
bool is_pos_inf(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::isinf(x) && x > 0;
  } else {
    return boost::multiprecision::isinf(x) && x > 0;
  }
}

template <class Real>
Real infinity() {
  return std::numeric_limits<Real>::infinity();
}

template <class Real>
Real ipow(Real base, int e) {
  Real out = 1;
  if (e < 0) {
    base = Real(1) / base;
    e = -e;
  }
  while (e > 0) {
    if (e & 1) out *= base;
    base *= base;
    e >>= 1;
  }
  return out;
}

template <class Real>
Real binomial(int n, int k) {
  if (k < 0 || k > n) return Real(0);
  Real out = 1;
  for (int i = 1; i <= k; ++i) {
    out *= Real(n - k + i);
    out /= Real(i);
  }
  return out;
}

template <class Real>
Real factorial(int n) {
  Real out = 1;
  for (int i = 2; i <= n; ++i) out *= Real(i);
  return out;
}

}  // namespace num

// e^{shift} (e^{-x z} - e^{-y z}) / z, with y allowed to be +infinity.
// The shift is folded into the exponent so e^{1/(beta rho_n)}-type prefactors
// never overflow on their own.
template <class Real>
Real shifted_phi(const Real& shift, const Real& x, const Real& y, const Real& z) {
  using std::abs;
  if (abs(z) < Real(1e-12)) {
    if (num::is_pos_inf(y)) return num::infinity<Real>();
    return num::exp(shift) * ((y - x) - (y * y - x * x) * z / 2);
  }
  const Real head = num::exp(Real(shift - x * z));
  if (num::is_pos_inf(y)) return head / z;
  return -head * num::expm1(Real(-(y - x) * z)) / z;
}

// phi(x, y, z) = (e^{-xz} - e^{-yz}) / z, the building block of every term.
template <class Real>
Real phi_kernel(const Real& x, const Real& y, const Real& z) {
  return shifted_phi(Real(0), x, y, z);
}

inline double phi_kernel(double x, double y, double z) { return phi_kernel<double>(x, y, z); }

// e^{shift - x z} / z: the phi kernel with an infinite upper limit.
template <class Real>
Real shifted_tail(const Real& shift, const Real& x, const Real& z) {
  return num::exp(Real(shift - x * z)) / z;
}

}  // namespace hnoma
