#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "blv/errors.hpp"

namespace blv {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Logistic-space parameters are kept inside [-kLogisticClamp, +kLogisticClamp]
// after every learning update, so probability views stay in roughly
// (6e-6, 1 - 6e-6) and log terms never hit 0 or 1 during training.
inline constexpr double kLogisticClamp = 12.0;

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericError("logit: argument must lie strictly inside (0,1)");
  }
  return std::log(p) - std::log1p(-p);
}

inline double clamp_logistic_space(double x) {
  return std::clamp(x, -kLogisticClamp, kLogisticClamp);
}

// log(1 - exp(x)) for x <= 0, switching expansions at -ln 2 for accuracy.
inline double log1mexp(double x) {
  if (x >= 0.0) return kNegInf;
  constexpr double ln2 = 0.6931471805599453;
  return x > -ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// log C(n,k) via log-gamma; exact enough for n in the thousands.
inline double log_choose(int n, int k) {
  if (k < 0 || k > n) throw NumericError("log_choose: k out of [0,n]");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace blv
