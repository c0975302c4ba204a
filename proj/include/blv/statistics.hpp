#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "blv/rng.hpp"
#include "blv/synthesis.hpp"

namespace blv {

// Empirical spike-word moments: distribution of |y|, per-cell means <y_i> and
// pairwise coactivities <y_i y_j>. Counts are kept alongside the normalized
// pdf so quantiles of the length distribution stay exact.
struct MomentSummary {
  std::int64_t n_words = 0;
  int n_cells = 0;
  std::vector<std::int64_t> word_length_counts;  // size N+1
  std::vector<double> word_length_pdf;           // counts / n_words
  std::vector<double> cell_means;                // N
  Matrix pair_coactivity;                        // N x N symmetric, diagonal = mean

  std::vector<double> upper_triangle() const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n_cells) * (n_cells - 1) / 2);
    for (int i = 0; i < n_cells; ++i) {
      for (int j = i + 1; j < n_cells; ++j) v.push_back(pair_coactivity(i, j));
    }
    return v;
  }
};

struct QQReport {
  double qq_length = 0.0;
  double qq_mean = 0.0;
  double qq_pair = 0.0;
  double combined = 0.0;
};

struct QQWeights {
  double length = 1.0;
  double mean = 1.0;
  double pair = 1.0;
};

inline MomentSummary moments(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("moments: empty corpus");
  const int n = corpus.front().size();
  MomentSummary s;
  s.n_words = static_cast<std::int64_t>(corpus.size());
  s.n_cells = n;
  s.word_length_counts.assign(static_cast<std::size_t>(n) + 1, 0);
  s.cell_means.assign(static_cast<std::size_t>(n), 0.0);
  s.pair_coactivity = Matrix(n, n, 0.0);

  std::vector<int> firing;
  for (const auto& w : corpus) {
    if (w.size() != n) throw DataError("moments: corpus words have inconsistent lengths");
    firing.clear();
    for (int i = 0; i < n; ++i) {
      if (w.bits[static_cast<std::size_t>(i)]) firing.push_back(i);
    }
    ++s.word_length_counts[firing.size()];
    for (std::size_t u = 0; u < firing.size(); ++u) {
      s.cell_means[static_cast<std::size_t>(firing[u])] += 1.0;
      for (std::size_t v = u + 1; v < firing.size(); ++v) {
        s.pair_coactivity(firing[u], firing[v]) += 1.0;
      }
    }
  }

  const double t = static_cast<double>(s.n_words);
  s.word_length_pdf.resize(s.word_length_counts.size());
  for (std::size_t k = 0; k < s.word_length_counts.size(); ++k) {
    s.word_length_pdf[k] = static_cast<double>(s.word_length_counts[k]) / t;
  }
  for (int i = 0; i < n; ++i) s.cell_means[static_cast<std::size_t>(i)] /= t;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double c = s.pair_coactivity(i, j) / t;
      s.pair_coactivity(i, j) = c;
      s.pair_coactivity(j, i) = c;
    }
    s.pair_coactivity(i, i) = s.cell_means[static_cast<std::size_t>(i)];
  }
  return s;
}

namespace detail {

inline constexpr int kQQLevels = 100;

// order-statistic quantile with linear interpolation (h = (n-1) p)
inline double sample_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// expanded-sample value at a given order-statistic index of an integer
// histogram (value k repeated counts[k] times)
inline double hist_value_at(const std::vector<std::int64_t>& counts, std::int64_t idx) {
  std::int64_t cum = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    cum += counts[k];
    if (idx < cum) return static_cast<double>(k);
  }
  return static_cast<double>(counts.size() - 1);
}

inline double hist_quantile(const std::vector<std::int64_t>& counts, std::int64_t total, double p) {
  if (total == 1) return hist_value_at(counts, 0);
  const double h = static_cast<double>(total - 1) * p;
  const auto lo = static_cast<std::int64_t>(h);
  const double frac = h - static_cast<double>(lo);
  const double x0 = hist_value_at(counts, lo);
  const double x1 = hist_value_at(counts, std::min(lo + 1, total - 1));
  return x0 + frac * (x1 - x0);
}

}  // namespace detail

// Average absolute deviation between the two samples' matched quantiles,
// evaluated at 100 evenly spaced levels and normalized by the pooled value
// range so different moment families are commensurable. Zero iff the
// empirical distributions agree at every evaluated quantile.
inline double qq_value(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("qq_value: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double lo = std::min(a.front(), b.front());
  const double hi = std::max(a.back(), b.back());
  const double range = hi - lo;
  if (range == 0.0) return 0.0;
  double sum = 0.0;
  for (int j = 0; j < detail::kQQLevels; ++j) {
    const double p = (j + 0.5) / detail::kQQLevels;
    sum += std::abs(detail::sample_quantile(a, p) - detail::sample_quantile(b, p));
  }
  return sum / detail::kQQLevels / range;
}

// Same deviation computed between two integer histograms (used for the
// word-length distribution, whose sample only exists in histogram form).
inline double qq_value_hist(const std::vector<std::int64_t>& a, std::int64_t total_a,
                            const std::vector<std::int64_t>& b, std::int64_t total_b) {
  if (total_a <= 0 || total_b <= 0) throw DataError("qq_value_hist: empty sample");
  auto value_range = [](const std::vector<std::int64_t>& c, double& lo, double& hi) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] > 0) {
        lo = std::min(lo, static_cast<double>(k));
        hi = std::max(hi, static_cast<double>(k));
      }
    }
  };
  double lo = 1e300, hi = -1e300;
  value_range(a, lo, hi);
  value_range(b, lo, hi);
  const double range = hi - lo;
  if (range == 0.0) return 0.0;
  double sum = 0.0;
  for (int j = 0; j < detail::kQQLevels; ++j) {
    const double p = (j + 0.5) / detail::kQQLevels;
    sum += std::abs(detail::hist_quantile(a, total_a, p) - detail::hist_quantile(b, total_b, p));
  }
  return sum / detail::kQQLevels / range;
}

inline QQReport qq_report(const MomentSummary& a, const MomentSummary& b,
                          const QQWeights& w = {}) {
  QQReport r;
  r.qq_length = qq_value_hist(a.word_length_counts, a.n_words, b.word_length_counts, b.n_words);
  r.qq_mean = qq_value(a.cell_means, b.cell_means);
  r.qq_pair = qq_value(a.upper_triangle(), b.upper_triangle());
  r.combined = w.length * r.qq_length + w.mean * r.qq_mean + w.pair * r.qq_pair;
  return r;
}

struct FitResult {
  int best_index = -1;
  SynthHyperparams best;
  QQReport best_report;
  std::vector<QQReport> reports;  // one per lattice point, in lattice order
};

// Grid search over synthesis hyperparameters: each lattice point synthesizes a
// ground truth with its own derived seed, generates words_per_eval words,
// and is scored by the combined QQ distance to the target moments. Ties keep
// the earlier lattice point.
inline FitResult fit_hyperparams(const MomentSummary& target,
                                 const std::vector<SynthHyperparams>& grid, int words_per_eval,
                                 std::uint64_t seed, const QQWeights& weights = {}) {
  if (grid.empty()) throw DataError("fit_hyperparams: empty grid");
  FitResult out;
  out.reports.reserve(grid.size());
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    Rng rng(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (idx + 1)));
    const GroundTruth gt = synthesize_gt(grid[idx], rng);
    Corpus words;
    words.reserve(static_cast<std::size_t>(words_per_eval));
    const double q = gt.params.q_active();
    for (int i = 0; i < words_per_eval; ++i) {
      words.push_back(generate_word(gt, sample_latent(gt.hyper, q, rng), rng));
    }
    const QQReport rep = qq_report(target, moments(words), weights);
    if (out.best_index < 0 || rep.combined < out.best_report.combined) {
      out.best_index = static_cast<int>(idx);
      out.best = grid[idx];
      out.best_report = rep;
    }
    out.reports.push_back(rep);
  }
  return out;
}

// Cross-product lattice over per-field candidate lists, in nested-loop order
// (k outermost ... sigma_q innermost). Empty lists pin the field's default.
struct HyperGridSpec {
  int n_cells = 0;
  int n_latents = 0;
  std::vector<int> k, k_min, k_max, c, c_min, c_max;
  std::vector<double> mu_p, sigma_p, mu_r, sigma_r, sigma_q;

  std::vector<SynthHyperparams> expand() const {
    SynthHyperparams base;
    base.n_cells = n_cells;
    base.n_latents = n_latents;
    auto ints = [](const std::vector<int>& v, int fallback) {
      return v.empty() ? std::vector<int>{fallback} : v;
    };
    auto reals = [](const std::vector<double>& v, double fallback) {
      return v.empty() ? std::vector<double>{fallback} : v;
    };
    std::vector<SynthHyperparams> grid;
    for (int vk : ints(k, base.k))
      for (int vkmin : ints(k_min, base.k_min))
        for (int vkmax : ints(k_max, base.k_max))
          for (int vc : ints(c, base.c))
            for (int vcmin : ints(c_min, base.c_min))
              for (int vcmax : ints(c_max, base.c_max))
                for (double vmup : reals(mu_p, base.mu_p))
                  for (double vsigp : reals(sigma_p, base.sigma_p))
                    for (double vmur : reals(mu_r, base.mu_r))
                      for (double vsigr : reals(sigma_r, base.sigma_r))
                        for (double vsigq : reals(sigma_q, base.sigma_q)) {
                          SynthHyperparams h = base;
                          h.k = vk;
                          h.k_min = vkmin;
                          h.k_max = vkmax;
                          h.c = vc;
                          h.c_min = vcmin;
                          h.c_max = vcmax;
                          h.mu_p = vmup;
                          h.sigma_p = vsigp;
                          h.mu_r = vmur;
                          h.sigma_r = vsigr;
                          h.sigma_q = vsigq;
                          grid.push_back(h);
                        }
    return grid;
  }
};

}  // namespace blv
