#pragma once

// Distribution oracles for the statistical tests: normal moments, truncated
// normal moments and a chi-square goodness-of-fit p-value via the regularized
// incomplete gamma function.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace statutil {

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// mean of N(mu, sd) truncated to [lo, hi]
inline double truncated_normal_mean(double mu, double sd, double lo, double hi) {
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  const double zmass = norm_cdf(b) - norm_cdf(a);
  return mu + sd * (norm_pdf(a) - norm_pdf(b)) / zmass;
}

inline double truncated_normal_var(double mu, double sd, double lo, double hi) {
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  const double z = norm_cdf(b) - norm_cdf(a);
  const double c = (norm_pdf(a) - norm_pdf(b)) / z;
  const double apdf = std::isinf(a) ? 0.0 : a * norm_pdf(a);
  const double bpdf = std::isinf(b) ? 0.0 : b * norm_pdf(b);
  return sd * sd * (1.0 + (apdf - bpdf) / z - c * c);
}

// regularized lower incomplete gamma P(a,x) by series / continued fraction
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi_square_pvalue(double stat, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_pvalue: dof < 1");
  return 1.0 - gamma_p(dof / 2.0, stat / 2.0);
}

// Goodness-of-fit p-value for observed counts vs expected probabilities.
// Bins with expected count below 5 are merged into their left neighbor.
inline double chi_square_gof(const std::vector<long long>& observed,
                             const std::vector<double>& expected_prob) {
  if (observed.size() != expected_prob.size()) throw std::invalid_argument("chi_square_gof size");
  long long total = 0;
  for (long long o : observed) total += o;
  std::vector<double> exp_merged;
  std::vector<double> obs_merged;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_prob[i] * static_cast<double>(total);
    if (!exp_merged.empty() && (e < 5.0 || exp_merged.back() < 5.0)) {
      exp_merged.back() += e;
      obs_merged.back() += static_cast<double>(observed[i]);
    } else {
      exp_merged.push_back(e);
      obs_merged.push_back(static_cast<double>(observed[i]));
    }
  }
  if (exp_merged.size() < 2) throw std::invalid_argument("chi_square_gof: too few usable bins");
  double stat = 0.0;
  for (std::size_t i = 0; i < exp_merged.size(); ++i) {
    const double diff = obs_merged[i] - exp_merged[i];
    stat += diff * diff / exp_merged[i];
  }
  return chi_square_pvalue(stat, static_cast<int>(exp_merged.size()) - 1);
}

// pmf of Bin(n, p) truncated to [lo, hi], normalized over that support
inline std::vector<double> truncated_binomial_pmf(int n, double p, int lo, int hi) {
  std::vector<double> pmf(static_cast<std::size_t>(hi - lo + 1), 0.0);
  double mass = 0.0;
  for (int k = lo; k <= hi; ++k) {
    double choose = 1.0;
    for (int j = 0; j < k; ++j) choose = choose * (n - j) / (j + 1);
    const double v = choose * std::pow(p, k) * std::pow(1.0 - p, n - k);
    pmf[static_cast<std::size_t>(k - lo)] = v;
    mass += v;
  }
  for (double& v : pmf) v /= mass;
  return pmf;
}

}  // namespace statutil
