#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "blv/errors.hpp"
#include "blv/math.hpp"
#include "blv/matrix.hpp"
#include "blv/types.hpp"

namespace blv {

// Learnable parameters of the noisy-OR binary latent variable model, stored in
// unconstrained logistic space:
//   P_ia = logistic(rho_ia)  probability that cell i stays silent given latent
//                            unit a is active (membership strength is 1 - P_ia)
//   R_i  = logistic(r_i)     probability that cell i stays silent when no
//                            latent unit is active
//   Q    = logistic(q)       prior activation probability of one latent unit
//
// Infinite logistic values are permitted and map to exact 0/1 probabilities;
// synthesized ground-truth models use +inf for "silence certain" entries.
// Learned models keep every value clamped to [-kLogisticClamp, kLogisticClamp].
struct ModelParams {
  int n_cells = 0;    // N
  int n_latents = 0;  // M
  Matrix rho;                   // N x M logistic-space P
  std::vector<double> r_logit;  // N
  double q_logit = 0.0;

  ModelParams() = default;
  ModelParams(int n, int m)
      : n_cells(n), n_latents(m), rho(n, m, 0.0), r_logit(static_cast<std::size_t>(n), 0.0) {}

  double p_silence(int i, int a) const { return logistic(rho(i, a)); }
  double r_silence(int i) const { return logistic(r_logit[static_cast<std::size_t>(i)]); }
  double q_active() const { return logistic(q_logit); }

  Matrix p_matrix() const {
    Matrix p(n_cells, n_latents);
    for (int i = 0; i < n_cells; ++i)
      for (int a = 0; a < n_latents; ++a) p(i, a) = p_silence(i, a);
    return p;
  }

  // 1 - P, the convention every similarity/metric computation uses: large
  // values mean the cell reliably fires when the assembly is active.
  Matrix membership_strengths() const {
    Matrix s(n_cells, n_latents);
    for (int i = 0; i < n_cells; ++i)
      for (int a = 0; a < n_latents; ++a) s(i, a) = 1.0 - p_silence(i, a);
    return s;
  }

  static double prob_to_logit(double p) {
    if (p <= 0.0) return kNegInf;
    if (p >= 1.0) return -kNegInf;
    return logit(p);
  }

  static ModelParams from_probabilities(const Matrix& p, const std::vector<double>& r, double q) {
    ModelParams m(p.rows, p.cols);
    if (static_cast<int>(r.size()) != p.rows) {
      throw DataError("ModelParams: R length does not match P rows");
    }
    for (int i = 0; i < p.rows; ++i)
      for (int a = 0; a < p.cols; ++a) m.rho(i, a) = prob_to_logit(p(i, a));
    for (int i = 0; i < p.rows; ++i) m.r_logit[static_cast<std::size_t>(i)] = prob_to_logit(r[static_cast<std::size_t>(i)]);
    m.q_logit = prob_to_logit(q);
    return m;
  }

  bool operator==(const ModelParams&) const = default;
};

// Usage state of the homeostatic-egalitarian latent prior: per-unit activation
// rates and the number of EM inference steps applied so far. Rates start at 1
// for every unit so the prior is well defined before any data is seen.
struct HEState {
  std::vector<double> rates;
  std::int64_t steps = 0;

  HEState() = default;
  static HEState initial(int n_latents) {
    HEState s;
    s.rates.assign(static_cast<std::size_t>(n_latents), 1.0);
    return s;
  }

  bool operator==(const HEState&) const = default;
};

enum class PriorKind { binomial, homeostatic_egalitarian };

inline std::string to_string(PriorKind k) {
  return k == PriorKind::binomial ? "binomial" : "he";
}

namespace detail {
inline void check_dims(const ModelParams& m, const SpikeWord* y, const LatentVector* z) {
  if (y && y->size() != m.n_cells) {
    throw DataError("spike-word length " + std::to_string(y->size()) +
                    " does not match model n_cells " + std::to_string(m.n_cells));
  }
  if (z && z->size() != m.n_latents) {
    throw DataError("latent vector length " + std::to_string(z->size()) +
                    " does not match model n_latents " + std::to_string(m.n_latents));
  }
}
}  // namespace detail

// Conditional silence probabilities T_i = p(y_i = 0 | z) under the mean-field
// noisy-OR rule: T_i = R_i^(1 - |z|/M) * prod_{a: z_a=1} P_ia.
inline std::vector<double> cond_silence_probs(const ModelParams& m, const LatentVector& z) {
  detail::check_dims(m, nullptr, &z);
  const int k = z.cardinality();
  const double r_exp = 1.0 - static_cast<double>(k) / m.n_latents;
  std::vector<double> t(static_cast<std::size_t>(m.n_cells));
  for (int i = 0; i < m.n_cells; ++i) {
    double ti = std::pow(m.r_silence(i), r_exp);
    for (int a = 0; a < m.n_latents; ++a) {
      if (z.bits[static_cast<std::size_t>(a)]) ti *= m.p_silence(i, a);
    }
    t[static_cast<std::size_t>(i)] = ti;
  }
  return t;
}

// log p(y | z) = sum_i (1-y_i) log T_i + y_i log(1 - T_i).
// Returns -inf when a required log argument is exactly zero; with clamped
// learned models this is unreachable, but the contract stays total.
inline double log_likelihood(const ModelParams& m, const SpikeWord& y, const LatentVector& z) {
  detail::check_dims(m, &y, &z);
  const int k = z.cardinality();
  const double r_exp = 1.0 - static_cast<double>(k) / m.n_latents;
  double total = 0.0;
  for (int i = 0; i < m.n_cells; ++i) {
    // log T_i, with the 0 * log(0) case of a vanishing exponent handled first
    double log_t = r_exp == 0.0 ? 0.0 : r_exp * std::log(m.r_silence(i));
    for (int a = 0; a < m.n_latents; ++a) {
      if (z.bits[static_cast<std::size_t>(a)]) log_t += std::log(m.p_silence(i, a));
    }
    total += y.bits[static_cast<std::size_t>(i)] ? log1mexp(log_t) : log_t;
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

// log Bin(k; M, Q), the count prior on |z|.
inline double log_binomial_prior(int n_latents, double q, int k) {
  if (k < 0 || k > n_latents) {
    throw NumericError("log_binomial_prior: count " + std::to_string(k) + " outside [0," +
                       std::to_string(n_latents) + "]");
  }
  double v = log_choose(n_latents, k);
  v += k == 0 ? 0.0 : k * std::log(q);
  v += k == n_latents ? 0.0 : (n_latents - k) * std::log1p(-q);
  return v;
}

// Activation probability of latent unit a under the homeostatic-egalitarian
// prior: Q * mean(rates) / rates_a, clamped into (0,1) because rarely used
// units can push the raw ratio past 1.
inline constexpr double kHEProbClamp = 1e-6;

inline double he_activation_prob(const HEState& state, double q, int a) {
  const int m = static_cast<int>(state.rates.size());
  if (a < 0 || a >= m) throw DataError("he_activation_prob: latent index out of range");
  double mean = 0.0;
  for (double r : state.rates) mean += r;
  mean /= m;
  const double qa = q * mean / state.rates[static_cast<std::size_t>(a)];
  return std::clamp(qa, kHEProbClamp, 1.0 - kHEProbClamp);
}

// Factorial HE prior: sum_a z_a log Q_a + (1 - z_a) log(1 - Q_a).
inline double log_he_prior(const HEState& state, double q, const LatentVector& z) {
  if (z.size() != static_cast<int>(state.rates.size())) {
    throw DataError("log_he_prior: latent vector length does not match rate vector");
  }
  double total = 0.0;
  for (int a = 0; a < z.size(); ++a) {
    const double qa = he_activation_prob(state, q, a);
    total += z.bits[static_cast<std::size_t>(a)] ? std::log(qa) : std::log1p(-qa);
  }
  return total;
}

// Which latent prior scores a candidate z during inference and learning.
// The HE state is read-only here; rate updates happen in the learning module.
struct PriorContext {
  PriorKind kind = PriorKind::binomial;
  const HEState* he_state = nullptr;

  static PriorContext binomial() { return PriorContext{}; }
  static PriorContext homeostatic(const HEState& s) {
    return PriorContext{PriorKind::homeostatic_egalitarian, &s};
  }
};

inline double log_prior(const ModelParams& m, const LatentVector& z, const PriorContext& ctx) {
  if (ctx.kind == PriorKind::binomial) {
    return log_binomial_prior(m.n_latents, m.q_active(), z.cardinality());
  }
  if (!ctx.he_state) throw NumericError("HE prior requested without an HEState");
  return log_he_prior(*ctx.he_state, m.q_active(), z);
}

// log p(y, z): one count-prior (or HE prior) term plus the sum over cells of
// the likelihood terms.
inline double log_joint(const ModelParams& m, const SpikeWord& y, const LatentVector& z,
                        const PriorContext& ctx = {}) {
  return log_prior(m, z, ctx) + log_likelihood(m, y, z);
}

}  // namespace blv
