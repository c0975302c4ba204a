#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "blv/model.hpp"
#include "blv/rng.hpp"

namespace blv {

// Hyperparameters of the synthetic ground-truth generator.
//   |z|  ~ Bin(M, Q) truncated to [k_min, k_max],  Q ~ N(K/M, sigma_q) on [0,1]
//   |S_col| ~ Bin(N, C/N) truncated to [c_min, c_max]
//   member strength 1 - P_ia ~ N(1 - mu_p, sigma_p) on [0,1]; non-member P_ia = 1
//   R_i ~ N(1 - mu_r, sigma_r) on [0,1]
// Smaller mu_p means stronger membership: member cells fire with probability
// near 1 - mu_p when their assembly is active.
struct SynthHyperparams {
  int n_cells = 0;   // N
  int n_latents = 0; // M
  int k = 1;
  int k_min = 0;
  int k_max = 1;
  int c = 2;
  int c_min = 1;
  int c_max = 2;
  double mu_p = 0.3;
  double sigma_p = 0.1;
  double mu_r = 0.04;
  double sigma_r = 0.02;
  double sigma_q = 0.0;

  bool operator==(const SynthHyperparams&) const = default;
};

inline void validate(const SynthHyperparams& h) {
  if (h.n_cells < 1 || h.n_latents < 1) throw NumericError("synth: need N, M >= 1");
  if (!(0 <= h.k_min && h.k_min <= h.k && h.k <= h.k_max && h.k_max <= h.n_latents)) {
    throw NumericError("synth: need 0 <= k_min <= k <= k_max <= M");
  }
  if (!(0 <= h.c_min && h.c_min <= h.c && h.c <= h.c_max && h.c_max <= h.n_cells)) {
    throw NumericError("synth: need 0 <= c_min <= c <= c_max <= N");
  }
  if (h.sigma_p < 0 || h.sigma_r < 0 || h.sigma_q < 0) throw NumericError("synth: negative sd");
}

// Synthesized model plus the binary membership matrix it was built from.
// Invariant: P_ia < 1 only where s(i,a) = 1; activity of non-members is
// carried entirely by R.
struct GroundTruth {
  ModelParams params;
  std::vector<std::uint8_t> s;  // N x M row-major binary membership
  SynthHyperparams hyper;

  bool member(int i, int a) const {
    return s[static_cast<std::size_t>(i) * hyper.n_latents + a] != 0;
  }
  bool operator==(const GroundTruth&) const = default;
};

struct LabeledDataset {
  GroundTruth gt;
  std::vector<LatentVector> latents;
  Corpus words;
};

inline constexpr int kRejectionCap = 10000;

// Rejection sampling from N(mu, sd) restricted to [lo, hi]; sd = 0 degenerates
// to clamp(mu). Exceeding the attempt cap means the bounds are effectively
// unreachable and is reported as a configuration error.
inline double sample_truncated_normal(double mu, double sd, double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw NumericError("sample_truncated_normal: need lo < hi");
  if (sd == 0.0) return std::clamp(mu, lo, hi);
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    const double x = rng.normal(mu, sd);
    if (x >= lo && x <= hi) return x;
  }
  throw NumericError("sample_truncated_normal: no draw from N(" + std::to_string(mu) + "," +
                     std::to_string(sd) + ") landed in [" + std::to_string(lo) + "," +
                     std::to_string(hi) + "] after " + std::to_string(kRejectionCap) +
                     " attempts");
}

// Mean cosine similarity over all unordered column pairs of a binary matrix.
inline double mean_pairwise_column_cosine(const std::vector<std::uint8_t>& s, int n, int m) {
  if (m < 2) return 0.0;
  std::vector<double> norms(static_cast<std::size_t>(m), 0.0);
  for (int a = 0; a < m; ++a) {
    int c = 0;
    for (int i = 0; i < n; ++i) c += s[static_cast<std::size_t>(i) * m + a];
    norms[static_cast<std::size_t>(a)] = std::sqrt(static_cast<double>(c));
  }
  double total = 0.0;
  int pairs = 0;
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      int dot = 0;
      for (int i = 0; i < n; ++i) {
        dot += s[static_cast<std::size_t>(i) * m + a] & s[static_cast<std::size_t>(i) * m + b];
      }
      const double na = norms[static_cast<std::size_t>(a)] * norms[static_cast<std::size_t>(b)];
      total += na == 0.0 ? 0.0 : dot / na;
      ++pairs;
    }
  }
  return total / pairs;
}

// Binary membership matrix with truncated-binomial column sums, followed by a
// swap phase that moves low-usage cells into random assemblies (evicting a
// member, so column sums are preserved) and keeps a swap only if the mean
// pairwise column cosine similarity decreased.
inline std::vector<std::uint8_t> build_membership(int n, int m, int c, int c_min, int c_max,
                                                  int n_swap_iters, Rng& rng) {
  if (!(0 <= c_min && c_min <= c && c <= c_max && c_max <= n)) {
    throw NumericError("build_membership: need 0 <= c_min <= c <= c_max <= N");
  }
  std::vector<std::uint8_t> s(static_cast<std::size_t>(n) * m, 0);
  const double p1 = static_cast<double>(c) / n;
  for (int a = 0; a < m; ++a) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= kRejectionCap) {
        throw NumericError("build_membership: column sum never landed in [" +
                           std::to_string(c_min) + "," + std::to_string(c_max) + "] after " +
                           std::to_string(kRejectionCap) + " attempts");
      }
      int sum = 0;
      for (int i = 0; i < n; ++i) {
        const std::uint8_t bit = rng.bernoulli(p1) ? 1 : 0;
        s[static_cast<std::size_t>(i) * m + a] = bit;
        sum += bit;
      }
      if (sum >= c_min && sum <= c_max) break;
    }
  }

  double current = mean_pairwise_column_cosine(s, n, m);
  std::vector<int> row_sums(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < m; ++a) row_sums[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i) * m + a];
  }

  std::vector<int> pick;
  for (int iter = 0; iter < n_swap_iters; ++iter) {
    // cell participating in the fewest assemblies, ties broken uniformly
    const int min_usage = *std::min_element(row_sums.begin(), row_sums.end());
    pick.clear();
    for (int i = 0; i < n; ++i) {
      if (row_sums[static_cast<std::size_t>(i)] == min_usage) pick.push_back(i);
    }
    const int cell = pick[static_cast<std::size_t>(rng.bounded(pick.size()))];

    // random assembly the cell is not already in
    pick.clear();
    for (int a = 0; a < m; ++a) {
      if (!s[static_cast<std::size_t>(cell) * m + a]) pick.push_back(a);
    }
    if (pick.empty()) continue;
    const int assembly = pick[static_cast<std::size_t>(rng.bounded(pick.size()))];

    // evict one existing member
    pick.clear();
    for (int i = 0; i < n; ++i) {
      if (s[static_cast<std::size_t>(i) * m + assembly]) pick.push_back(i);
    }
    if (pick.empty()) continue;
    const int evicted = pick[static_cast<std::size_t>(rng.bounded(pick.size()))];

    s[static_cast<std::size_t>(cell) * m + assembly] = 1;
    s[static_cast<std::size_t>(evicted) * m + assembly] = 0;
    const double changed = mean_pairwise_column_cosine(s, n, m);
    if (changed < current) {
      current = changed;
      ++row_sums[static_cast<std::size_t>(cell)];
      --row_sums[static_cast<std::size_t>(evicted)];
    } else {
      s[static_cast<std::size_t>(cell) * m + assembly] = 0;
      s[static_cast<std::size_t>(evicted) * m + assembly] = 1;
    }
  }
  return s;
}

// Conditional silence matrix from a membership matrix: member membership
// strengths (1 - P) are drawn near (1 - mu_p), so member silence sits near
// mu_p; non-member entries are exactly 1 (the assembly has no effect on cells
// outside it; their activity is already modeled in R).
inline Matrix build_p(const std::vector<std::uint8_t>& s, int n, int m, double mu_p,
                      double sigma_p, Rng& rng) {
  Matrix p(n, m, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < m; ++a) {
      if (s[static_cast<std::size_t>(i) * m + a]) {
        p(i, a) = 1.0 - sample_truncated_normal(1.0 - mu_p, sigma_p, 0.0, 1.0, rng);
      }
    }
  }
  return p;
}

inline constexpr int kSwapItersPerLatent = 50;

// n_swap_iters < 0 selects the default budget of 50 per latent unit.
inline GroundTruth synthesize_gt(const SynthHyperparams& h, Rng& rng, int n_swap_iters = -1) {
  validate(h);
  GroundTruth gt;
  gt.hyper = h;
  if (n_swap_iters < 0) n_swap_iters = kSwapItersPerLatent * h.n_latents;
  gt.s = build_membership(h.n_cells, h.n_latents, h.c, h.c_min, h.c_max, n_swap_iters, rng);
  const Matrix p = build_p(gt.s, h.n_cells, h.n_latents, h.mu_p, h.sigma_p, rng);
  std::vector<double> r(static_cast<std::size_t>(h.n_cells));
  for (int i = 0; i < h.n_cells; ++i) {
    r[static_cast<std::size_t>(i)] = sample_truncated_normal(1.0 - h.mu_r, h.sigma_r, 0.0, 1.0, rng);
  }
  const double q = sample_truncated_normal(static_cast<double>(h.k) / h.n_latents, h.sigma_q,
                                           0.0, 1.0, rng);
  gt.params = ModelParams::from_probabilities(p, r, q);
  return gt;
}

// Latent vector with i.i.d. Bernoulli(Q) units, resampled as a whole until
// |z| lands inside [k_min, k_max].
inline LatentVector sample_latent(const SynthHyperparams& h, double q, Rng& rng) {
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    LatentVector z(h.n_latents);
    int card = 0;
    for (int a = 0; a < h.n_latents; ++a) {
      if (rng.bernoulli(q)) {
        z.bits[static_cast<std::size_t>(a)] = 1;
        ++card;
      }
    }
    if (card >= h.k_min && card <= h.k_max) return z;
  }
  throw NumericError("sample_latent: |z| never landed in [" + std::to_string(h.k_min) + "," +
                     std::to_string(h.k_max) + "] after " + std::to_string(kRejectionCap) +
                     " attempts");
}

// Run the generative direction once: y_i ~ Bernoulli(1 - T_i(z)).
inline SpikeWord generate_word(const GroundTruth& gt, const LatentVector& z, Rng& rng) {
  const std::vector<double> t = cond_silence_probs(gt.params, z);
  SpikeWord y(gt.params.n_cells);
  for (int i = 0; i < gt.params.n_cells; ++i) {
    if (rng.bernoulli(1.0 - t[static_cast<std::size_t>(i)])) y.bits[static_cast<std::size_t>(i)] = 1;
  }
  return y;
}

inline LabeledDataset generate_dataset(const GroundTruth& gt, int n_words, Rng& rng) {
  LabeledDataset ds;
  ds.gt = gt;
  ds.latents.reserve(static_cast<std::size_t>(n_words));
  ds.words.reserve(static_cast<std::size_t>(n_words));
  const double q = gt.params.q_active();
  for (int w = 0; w < n_words; ++w) {
    LatentVector z = sample_latent(gt.hyper, q, rng);
    ds.words.push_back(generate_word(gt, z, rng));
    ds.latents.push_back(std::move(z));
  }
  return ds;
}

}  // namespace blv
