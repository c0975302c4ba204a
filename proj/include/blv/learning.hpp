#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "blv/inference.hpp"
#include "blv/model.hpp"
#include "blv/rng.hpp"

namespace blv {

enum class SampleOrder { shuffled, sequential };

struct LearnConfig {
  double learning_rate = 0.1;
  double lr_decay = 1.0;  // per-pass multiplier on the learning rate; 1 = constant
  int n_passes = 3;
  PriorKind prior_kind = PriorKind::binomial;
  SampleOrder sample_order = SampleOrder::shuffled;
  std::uint64_t rng_seed = 0;
  double init_silence = 0.95;   // target initial P and R probability level
  double init_jitter_sd = 1.0;  // logistic-space sd of the init noise
  double q_init = 0.0;          // <= 0 selects the default 1/M
  int i0 = 9;
  int imax = 10;

  InferenceConfig inference_config() const { return {i0, imax, prior_kind}; }
};

struct TrainTrace {
  std::vector<double> pass_mean_log_joint;       // inference-time score, one per pass
  std::vector<std::int64_t> usage;               // inferred activations per latent, all passes
  std::vector<std::int64_t> final_pass_usage;    // same, last pass only

  bool operator==(const TrainTrace&) const = default;
};

struct TrainResult {
  ModelParams model;
  TrainTrace trace;
  HEState he;
};

// Nearly silent initialization: every P_ia and R_i starts at init_silence with
// Gaussian jitter in logistic space (the jitter breaks latent-unit symmetry),
// Q starts at q_init (default 1/M, i.e. one active unit expected per word).
inline ModelParams init_model(int n_cells, int n_latents, const LearnConfig& cfg) {
  if (n_cells < 1 || n_latents < 1) throw DataError("init_model: need n_cells, n_latents >= 1");
  Rng rng(cfg.rng_seed);
  ModelParams m(n_cells, n_latents);
  const double base = clamp_logistic_space(ModelParams::prob_to_logit(cfg.init_silence));
  for (int i = 0; i < n_cells; ++i) {
    for (int a = 0; a < n_latents; ++a) {
      m.rho(i, a) = clamp_logistic_space(base + rng.normal(0.0, cfg.init_jitter_sd));
    }
  }
  for (int i = 0; i < n_cells; ++i) {
    m.r_logit[static_cast<std::size_t>(i)] =
        clamp_logistic_space(base + rng.normal(0.0, cfg.init_jitter_sd));
  }
  const double q0 = cfg.q_init > 0.0 ? cfg.q_init : 1.0 / n_latents;
  m.q_logit = clamp_logistic_space(ModelParams::prob_to_logit(q0));
  return m;
}

// d log p(y,z) / dq under the binomial prior: |z| - M sigma(q).
inline double grad_q(const ModelParams& m, const LatentVector& z) {
  detail::check_dims(m, nullptr, &z);
  return z.cardinality() - m.n_latents * m.q_active();
}

namespace detail {

// Shared bracket of the R and rho gradients:
//   (1 - y_i) - y_i * T_i / (1 - T_i)
// i.e. +1 for a silent cell and minus the silence odds for a firing one.
inline std::vector<double> likelihood_brackets(const ModelParams& m, const SpikeWord& y,
                                               const LatentVector& z) {
  check_dims(m, &y, &z);
  const int k = z.cardinality();
  const double r_exp = 1.0 - static_cast<double>(k) / m.n_latents;
  std::vector<double> bracket(static_cast<std::size_t>(m.n_cells));
  for (int i = 0; i < m.n_cells; ++i) {
    if (!y.bits[static_cast<std::size_t>(i)]) {
      bracket[static_cast<std::size_t>(i)] = 1.0;
      continue;
    }
    double log_t = r_exp == 0.0 ? 0.0 : r_exp * std::log(m.r_silence(i));
    for (int a = 0; a < m.n_latents; ++a) {
      if (z.bits[static_cast<std::size_t>(a)]) log_t += std::log(m.p_silence(i, a));
    }
    // odds T/(1-T), with 1-T via expm1 to keep accuracy for T near 1
    bracket[static_cast<std::size_t>(i)] = -std::exp(log_t) / (-std::expm1(log_t));
  }
  return bracket;
}

}  // namespace detail

// d log p(y,z) / dr_i = (1 - |z|/M)(1 - sigma(r_i)) * bracket_i.
inline std::vector<double> grad_r(const ModelParams& m, const SpikeWord& y,
                                  const LatentVector& z) {
  const auto bracket = detail::likelihood_brackets(m, y, z);
  const double lead = 1.0 - static_cast<double>(z.cardinality()) / m.n_latents;
  std::vector<double> g(static_cast<std::size_t>(m.n_cells));
  for (int i = 0; i < m.n_cells; ++i) {
    g[static_cast<std::size_t>(i)] = lead * (1.0 - m.r_silence(i)) * bracket[static_cast<std::size_t>(i)];
  }
  return g;
}

// d log p(y,z) / drho_ia = z_a (1 - sigma(rho_ia)) * bracket_i.
// Columns with z_a = 0 are exact zeros: learning is gated off there.
inline Matrix grad_rho(const ModelParams& m, const SpikeWord& y, const LatentVector& z) {
  const auto bracket = detail::likelihood_brackets(m, y, z);
  Matrix g(m.n_cells, m.n_latents, 0.0);
  for (int a = 0; a < m.n_latents; ++a) {
    if (!z.bits[static_cast<std::size_t>(a)]) continue;
    for (int i = 0; i < m.n_cells; ++i) {
      g(i, a) = (1.0 - m.p_silence(i, a)) * bracket[static_cast<std::size_t>(i)];
    }
  }
  return g;
}

// d log p(y,z,t) / dq under the HE prior, with clamped Q_a(t).
inline double grad_q_he(const HEState& state, const ModelParams& m, const LatentVector& z) {
  detail::check_dims(m, nullptr, &z);
  const double q = m.q_active();
  double sum = 0.0;
  for (int a = 0; a < m.n_latents; ++a) {
    if (z.bits[static_cast<std::size_t>(a)]) {
      sum += 1.0;
    } else {
      const double qa = he_activation_prob(state, q, a);
      sum -= qa / (1.0 - qa);
    }
  }
  return (1.0 - q) * sum;
}

struct EmStepResult {
  LatentVector z;
  double score = 0.0;  // log joint achieved at inference, before the update
};

// One stochastic EM step: infer z for the word with the current parameters,
// then move every parameter by +learning_rate * gradient in logistic space and
// re-clamp. Under the HE prior the usage rates absorb the inferred z afterward.
inline EmStepResult em_step(ModelParams& m, const SpikeWord& y, const LearnConfig& cfg,
                            HEState& he) {
  const PriorContext ctx = cfg.prior_kind == PriorKind::binomial
                               ? PriorContext::binomial()
                               : PriorContext::homeostatic(he);
  InferenceResult inferred = greedy_infer_scored(m, y, cfg.inference_config(), ctx);
  const LatentVector& z = inferred.z;

  const double lr = cfg.learning_rate;
  if (lr != 0.0) {  // lr = 0 must leave the model bit-identical
    const double gq = cfg.prior_kind == PriorKind::binomial ? grad_q(m, z) : grad_q_he(he, m, z);
    const auto bracket = detail::likelihood_brackets(m, y, z);
    const double lead = 1.0 - static_cast<double>(z.cardinality()) / m.n_latents;
    for (int i = 0; i < m.n_cells; ++i) {
      const double gr = lead * (1.0 - m.r_silence(i)) * bracket[static_cast<std::size_t>(i)];
      m.r_logit[static_cast<std::size_t>(i)] =
          clamp_logistic_space(m.r_logit[static_cast<std::size_t>(i)] + lr * gr);
    }
    for (int a = 0; a < m.n_latents; ++a) {
      if (!z.bits[static_cast<std::size_t>(a)]) continue;
      for (int i = 0; i < m.n_cells; ++i) {
        const double g = (1.0 - m.p_silence(i, a)) * bracket[static_cast<std::size_t>(i)];
        m.rho(i, a) = clamp_logistic_space(m.rho(i, a) + lr * g);
      }
    }
    m.q_logit = clamp_logistic_space(m.q_logit + lr * gq);
  }

  if (cfg.prior_kind == PriorKind::homeostatic_egalitarian) {
    for (int a = 0; a < m.n_latents; ++a) {
      he.rates[static_cast<std::size_t>(a)] += z.bits[static_cast<std::size_t>(a)];
    }
    he.steps += 1;
  }
  return {std::move(inferred.z), inferred.score};
}

// Stochastic EM over the corpus: n_passes epochs of per-word em_step in the
// configured order. The trace records the mean inference-time log joint per
// pass and per-latent usage counts.
inline TrainResult train(const Corpus& corpus, int n_latents, const LearnConfig& cfg) {
  if (corpus.empty()) throw DataError("train: empty corpus");
  const int n_cells = corpus.front().size();
  for (const auto& w : corpus) {
    if (w.size() != n_cells) throw DataError("train: corpus words have inconsistent lengths");
  }

  TrainResult out;
  out.model = init_model(n_cells, n_latents, cfg);
  out.he = HEState::initial(n_latents);
  out.trace.usage.assign(static_cast<std::size_t>(n_latents), 0);
  out.trace.final_pass_usage.assign(static_cast<std::size_t>(n_latents), 0);

  Rng order_rng(splitmix64(cfg.rng_seed ^ 0xDA3E39CB94B95BDBULL));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  LearnConfig pass_cfg = cfg;
  for (int pass = 0; pass < cfg.n_passes; ++pass) {
    pass_cfg.learning_rate = cfg.learning_rate * std::pow(cfg.lr_decay, pass);
    if (cfg.sample_order == SampleOrder::shuffled) order_rng.shuffle(order);
    double score_sum = 0.0;
    const bool last = pass == cfg.n_passes - 1;
    for (std::size_t idx : order) {
      EmStepResult step = em_step(out.model, corpus[idx], pass_cfg, out.he);
      score_sum += step.score;
      for (int a = 0; a < n_latents; ++a) {
        if (step.z.bits[static_cast<std::size_t>(a)]) {
          ++out.trace.usage[static_cast<std::size_t>(a)];
          if (last) ++out.trace.final_pass_usage[static_cast<std::size_t>(a)];
        }
      }
    }
    out.trace.pass_mean_log_joint.push_back(score_sum / static_cast<double>(corpus.size()));
  }
  return out;
}

}  // namespace blv
