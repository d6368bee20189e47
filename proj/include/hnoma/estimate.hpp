#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>

#include "hnoma/config.hpp"

namespace hnoma {

enum class Method { monte_carlo, closed_form, quadrature, asymptotic };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::monte_carlo: return "MONTE_CARLO";
    case Method::closed_form: return "CLOSED_FORM";
    case Method::quadrature: return "QUADRATURE";
    case Method::asymptotic: return "ASYMPTOTIC";
  }
  return "?";
}

inline Method parse_method(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "MONTE_CARLO" || up == "MC") return Method::monte_carlo;
  if (up == "CLOSED_FORM" || up == "CLOSED") return Method::closed_form;
  if (up == "QUADRATURE" || up == "QUAD") return Method::quadrature;
  if (up == "ASYMPTOTIC" || up == "ASYM") return Method::asymptotic;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

struct ProbabilityEstimate {
  double value = 0.0;
  double std_error = 0.0;  // sampling error for MC, error bound for quadrature, 0 otherwise
  std::uint64_t n_samples = 0;
  Method method = Method::closed_form;
};

}  // namespace hnoma
