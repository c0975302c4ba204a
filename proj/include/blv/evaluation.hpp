#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "blv/matrix.hpp"
#include "blv/model.hpp"

namespace blv {

// cs(u,v) = u.v / (|u||v|); for nonnegative inputs this lies in [0,1].
// A zero-norm vector is similar to nothing: cs = 0 by convention.
inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw DataError("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  // Cauchy-Schwarz bounds; rounding can stray past them by an ulp
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

// Exact O(n^3) Hungarian algorithm (potentials formulation) for square cost
// matrices; returns assignment[row] = column minimizing the total cost.
inline std::vector<int> hungarian_min_cost(const Matrix& cost) {
  if (cost.rows != cost.cols) throw DataError("hungarian_min_cost: matrix must be square");
  const int n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  }
  return assignment;
}

// Optimal pairing of two models' assemblies plus the delta-cs summary:
// mean cosine similarity over matched pairs minus the mean over the unmatched
// diagonal, which corrects for the bias of raw similarities.
struct MatchReport {
  std::vector<int> assignment;            // column of b matched to each column of a
  std::vector<double> matched_cs;         // cs(a_col, b_col matched)
  std::vector<double> unmatched_diag_cs;  // cs(a_col, b_col same index)
  double delta_cs = 0.0;

  double mean_matched() const {
    double s = 0.0;
    for (double v : matched_cs) s += v;
    return s / static_cast<double>(matched_cs.size());
  }
  double mean_diag() const {
    double s = 0.0;
    for (double v : unmatched_diag_cs) s += v;
    return s / static_cast<double>(unmatched_diag_cs.size());
  }
};

// Matches assembly columns of two conditional-silence matrices by maximizing
// total cosine similarity of membership strengths (Hungarian on cost 1 - cs).
inline MatchReport match_assemblies(const Matrix& p_a, const Matrix& p_b) {
  if (!p_a.same_shape(p_b)) throw DataError("match_assemblies: shape mismatch");
  const int m = p_a.cols;
  const int n = p_a.rows;
  auto strength_col = [n](const Matrix& p, int a) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = 1.0 - p(i, a);
    return v;
  };
  std::vector<std::vector<double>> cols_a, cols_b;
  cols_a.reserve(static_cast<std::size_t>(m));
  cols_b.reserve(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    cols_a.push_back(strength_col(p_a, a));
    cols_b.push_back(strength_col(p_b, a));
  }
  Matrix cs(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      cs(a, b) = cosine_similarity(cols_a[static_cast<std::size_t>(a)], cols_b[static_cast<std::size_t>(b)]);
    }
  }
  Matrix cost(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) cost(a, b) = 1.0 - cs(a, b);

  MatchReport rep;
  rep.assignment = hungarian_min_cost(cost);
  rep.matched_cs.resize(static_cast<std::size_t>(m));
  rep.unmatched_diag_cs.resize(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    rep.matched_cs[static_cast<std::size_t>(a)] = cs(a, rep.assignment[static_cast<std::size_t>(a)]);
    rep.unmatched_diag_cs[static_cast<std::size_t>(a)] = cs(a, a);
  }
  rep.delta_cs = rep.mean_matched() - rep.mean_diag();
  return rep;
}

// Cells determined to belong to one assembly, with their membership strengths.
struct MemberSet {
  int assembly_index = -1;
  std::vector<int> members;
  std::vector<double> strengths;
};

namespace detail {

inline void mean_sd(const std::vector<double>& v, double& mu, double& sd) {
  mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  var /= static_cast<double>(v.size());  // population variance
  sd = std::sqrt(var);
}

}  // namespace detail

// Member determination by the level-plus-gap rule: sort strengths descending,
// find the largest neighboring gap that exceeds mu + sd of all gaps, and keep
// the cells above it whose strength also exceeds mu + sd of the strengths.
// Both thresholds are strict, so a constant column has no members.
inline MemberSet determine_members(const std::vector<double>& strengths) {
  MemberSet out;
  out.strengths.clear();
  const int n = static_cast<int>(strengths.size());
  if (n < 2) return out;

  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return strengths[static_cast<std::size_t>(a)] > strengths[static_cast<std::size_t>(b)]; });

  std::vector<double> gaps(static_cast<std::size_t>(n) - 1);
  for (int j = 0; j + 1 < n; ++j) {
    gaps[static_cast<std::size_t>(j)] = strengths[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] -
                                        strengths[static_cast<std::size_t>(idx[static_cast<std::size_t>(j) + 1])];
  }
  double mu_s, sd_s, mu_g, sd_g;
  detail::mean_sd(strengths, mu_s, sd_s);
  detail::mean_sd(gaps, mu_g, sd_g);

  int cut = -1;  // sorted position of the decisive gap
  double best_gap = 0.0;
  for (int j = 0; j + 1 < n; ++j) {
    const double g = gaps[static_cast<std::size_t>(j)];
    if (g > mu_g + sd_g && g > best_gap) {
      best_gap = g;
      cut = j;
    }
  }
  if (cut < 0) return out;

  for (int j = 0; j <= cut; ++j) {
    const int cell = idx[static_cast<std::size_t>(j)];
    if (strengths[static_cast<std::size_t>(cell)] > mu_s + sd_s) {
      out.members.push_back(cell);
      out.strengths.push_back(strengths[static_cast<std::size_t>(cell)]);
    }
  }
  std::sort(out.members.begin(), out.members.end());
  std::sort(out.strengths.begin(), out.strengths.end(), std::greater<>());
  return out;
}

inline constexpr double kCrispnessVarianceFloor = 1e-6;

// d' separation of member vs non-member strength populations:
// (mu_in - mu_out) / sqrt(var_in + var_out), variance sum floored.
inline double crispness(const std::vector<double>& strengths, const MemberSet& members) {
  const std::size_t n = strengths.size();
  if (members.members.empty() || members.members.size() >= n) {
    throw NumericError("crispness: member set must be a non-empty proper subset");
  }
  std::vector<char> is_in(n, 0);
  for (int i : members.members) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) throw DataError("crispness: member index out of range");
    is_in[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<double> in, out;
  for (std::size_t i = 0; i < n; ++i) (is_in[i] ? in : out).push_back(strengths[i]);
  double mu_in, sd_in, mu_out, sd_out;
  detail::mean_sd(in, mu_in, sd_in);
  detail::mean_sd(out, mu_out, sd_out);
  const double var = std::max(sd_in * sd_in + sd_out * sd_out, kCrispnessVarianceFloor);
  return (mu_in - mu_out) / std::sqrt(var);
}

// Event raster of one latent unit (or cell): (trial, time-in-ms) occurrences.
struct EventTrace {
  int n_trials = 1;
  double duration_ms = 0.0;
  std::vector<std::pair<int, double>> events;
};

// Peri-stimulus time histogram: event counts per time bin, pooled over trials.
inline std::vector<double> psth(const EventTrace& trace, double bin_ms) {
  if (!(bin_ms > 0.0)) throw NumericError("psth: bin width must be positive");
  const auto bins = static_cast<std::size_t>(std::ceil(trace.duration_ms / bin_ms));
  std::vector<double> counts(std::max<std::size_t>(bins, 1), 0.0);
  for (const auto& [trial, t] : trace.events) {
    if (t < 0.0 || t >= trace.duration_ms) throw DataError("psth: event time outside [0, duration)");
    ++counts[static_cast<std::size_t>(t / bin_ms)];
  }
  return counts;
}

namespace detail {
inline void check_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw NumericError(std::string(what) + ": input outside [0,1]");
}
}  // namespace detail

// R_X = sqrt(<cs_tau> * <cs_M>): high only when membership structure and
// temporal activation both repeat across models.
inline double robustness(double cs_membership_mean, double cs_temporal_mean) {
  detail::check_unit_interval(cs_membership_mean, "robustness");
  detail::check_unit_interval(cs_temporal_mean, "robustness");
  return std::sqrt(cs_temporal_mean * cs_membership_mean);
}

// H = min(#type1, #type2) / avg(#type1, #type2) in [0,1]; 1 when each type
// contributes half the members.
inline double heterogeneity(int count_type1, int count_type2) {
  if (count_type1 < 0 || count_type2 < 0) throw NumericError("heterogeneity: negative count");
  if (count_type1 == 0 && count_type2 == 0) throw NumericError("heterogeneity: both counts zero");
  const double mn = std::min(count_type1, count_type2);
  const double avg = (count_type1 + count_type2) / 2.0;
  return mn / avg;
}

// S(a,b) = 1 - sqrt(cs_tau * cs_M): 0 for fully redundant assemblies, 1 when
// they are orthogonal along either axis.
inline double synergy(double cs_temporal, double cs_membership) {
  detail::check_unit_interval(cs_temporal, "synergy");
  detail::check_unit_interval(cs_membership, "synergy");
  return 1.0 - std::sqrt(cs_temporal * cs_membership);
}

// log p(y) under an independent per-cell rate model (the GLM null):
// sum_i y_i log rate_i + (1-y_i) log(1-rate_i), rates clamped into (0,1).
inline double null_word_logprob(const std::vector<double>& rates, const SpikeWord& y) {
  if (static_cast<int>(rates.size()) != y.size()) {
    throw DataError("null_word_logprob: rate vector length does not match word");
  }
  constexpr double eps = 1e-12;
  double total = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    const double r = std::clamp(rates[static_cast<std::size_t>(i)], eps, 1.0 - eps);
    total += y.bits[static_cast<std::size_t>(i)] ? std::log(r) : std::log1p(-r);
  }
  return total;
}

// Delta P_y = 1 - cs of the two traces after rebinning at bin_ms (traces are
// per-1ms samples of PSTH(z_a) and the null-model word probability).
inline double delta_py(const std::vector<double>& z_psth_trace,
                       const std::vector<double>& null_prob_trace, int bin_ms) {
  if (z_psth_trace.size() != null_prob_trace.size()) {
    throw DataError("delta_py: trace durations differ");
  }
  if (bin_ms < 1) throw NumericError("delta_py: bin_ms must be >= 1");
  auto rebin = [bin_ms](const std::vector<double>& v) {
    std::vector<double> out((v.size() + bin_ms - 1) / bin_ms, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) out[i / static_cast<std::size_t>(bin_ms)] += v[i];
    return out;
  };
  return 1.0 - cosine_similarity(rebin(z_psth_trace), rebin(null_prob_trace));
}

// Per-latent activation counts and pairwise co-activation counts over a set of
// inferred latent vectors; a pair is counted once per word, diagonal stays 0.
struct CoactivityStats {
  std::vector<std::int64_t> counts;  // M
  Matrix pair_counts;                // M x M symmetric, zero diagonal
};

inline CoactivityStats coactivity_stats(const std::vector<LatentVector>& inferred) {
  CoactivityStats out;
  if (inferred.empty()) return out;
  const int m = inferred.front().size();
  out.counts.assign(static_cast<std::size_t>(m), 0);
  out.pair_counts = Matrix(m, m, 0.0);
  std::vector<int> active;
  for (const auto& z : inferred) {
    if (z.size() != m) throw DataError("coactivity_stats: inconsistent latent lengths");
    active.clear();
    for (int a = 0; a < m; ++a) {
      if (z.bits[static_cast<std::size_t>(a)]) active.push_back(a);
    }
    for (std::size_t u = 0; u < active.size(); ++u) {
      ++out.counts[static_cast<std::size_t>(active[u])];
      for (std::size_t v = u + 1; v < active.size(); ++v) {
        out.pair_counts(active[u], active[v]) += 1.0;
        out.pair_counts(active[v], active[u]) += 1.0;
      }
    }
  }
  return out;
}

}  // namespace blv
