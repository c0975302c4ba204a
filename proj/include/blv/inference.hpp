#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "blv/model.hpp"

namespace blv {

// Knobs of the greedy interpolated MAP search. i0 admits candidates that score
// below the z=0 solution into the combination step; imax caps the pool size.
// i0 = imax = M reproduces the full combinatorial search, imax = 1 the best
// solution with at most one active unit.
struct InferenceConfig {
  int i0 = 9;
  int imax = 10;
  PriorKind prior_kind = PriorKind::binomial;
};

// One entry of the ranked single-unit scan; latent_index -1 encodes z = 0.
struct ScoredCandidate {
  int latent_index = -1;
  double score = 0.0;
};

struct InferenceResult {
  LatentVector z;
  double score = 0.0;
};

namespace detail {

// Finite stand-in for log(0) factors inside the subset search. Keeps sums
// finite; any state containing such a factor loses every comparison.
inline constexpr double kLogFloor = -1e30;

inline double floored_log(double p) { return p <= 0.0 ? kLogFloor : std::log(p); }

// first differing index decides; the vector holding 0 there is smaller
inline bool lex_less(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

// Exact maximizer of the log joint over all subsets of a fixed pool of
// candidate latent columns.
//
// For a subset S with k = |S|,
//   log T_i = (1 - k/M) log R_i + sum_{a in S} log P_ia
// and the silent-cell likelihood part collapses into two running scalars,
//   sum_{y_i=0} log T_i = (1 - k/M) * SR + sum_{a in S} colsum_a,
// so a subset costs O(1 + #firing-cells): only firing cells need a log1mexp.
//
// Subsets are enumerated by a depth-first include/exclude walk over pool
// positions (ascending latent index). Accumulators for the include branch are
// copied per depth, never subtracted back, so every evaluated value is a plain
// left-to-right sum in column order — two pools with the same columns yield
// bit-identical scores regardless of how the pool was assembled.
class SubsetEvaluator {
 public:
  SubsetEvaluator(const ModelParams& m, const SpikeWord& y, std::vector<int> pool,
                  const PriorContext& ctx)
      : m_(m), pool_(std::move(pool)), kind_(ctx.kind) {
    check_dims(m, &y, nullptr);
    std::sort(pool_.begin(), pool_.end());
    const int n = m.n_cells;
    const int p = static_cast<int>(pool_.size());

    for (int i = 0; i < n; ++i) {
      if (y.bits[static_cast<std::size_t>(i)]) firing_.push_back(i);
    }
    const int f = static_cast<int>(firing_.size());

    sr_silent_ = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!y.bits[static_cast<std::size_t>(i)]) sr_silent_ += floored_log(m.r_silence(i));
    }
    lr_fire_.resize(static_cast<std::size_t>(f));
    for (int j = 0; j < f; ++j) lr_fire_[static_cast<std::size_t>(j)] = floored_log(m.r_silence(firing_[static_cast<std::size_t>(j)]));

    lp_fire_.assign(static_cast<std::size_t>(p) * f, 0.0);
    colsum_silent_.assign(static_cast<std::size_t>(p), 0.0);
    for (int c = 0; c < p; ++c) {
      const int a = pool_[static_cast<std::size_t>(c)];
      double cs = 0.0;
      int j = 0;
      for (int i = 0; i < n; ++i) {
        const double lp = floored_log(m.p_silence(i, a));
        if (y.bits[static_cast<std::size_t>(i)]) {
          lp_fire_[static_cast<std::size_t>(c) * f + j++] = lp;
        } else {
          cs += lp;
        }
      }
      colsum_silent_[static_cast<std::size_t>(c)] = cs;
    }

    const double q = m.q_active();
    if (kind_ == PriorKind::binomial) {
      binom_table_.resize(static_cast<std::size_t>(p) + 1);
      for (int k = 0; k <= p; ++k) binom_table_[static_cast<std::size_t>(k)] = log_binomial_prior(m.n_latents, q, k);
    } else {
      if (!ctx.he_state) throw NumericError("HE prior requested without an HEState");
      const HEState& he = *ctx.he_state;
      he_base_ = 0.0;
      for (int a = 0; a < m.n_latents; ++a) {
        he_base_ += std::log1p(-he_activation_prob(he, q, a));
      }
      he_gain_.resize(static_cast<std::size_t>(p));
      for (int c = 0; c < p; ++c) {
        const double qa = he_activation_prob(he, q, pool_[static_cast<std::size_t>(c)]);
        he_gain_[static_cast<std::size_t>(c)] = std::log(qa) - std::log1p(-qa);
      }
    }

    s_fire_.assign(static_cast<std::size_t>(p + 1) * f, 0.0);
  }

  // argmax over all 2^pool subsets, z = 0 included; ties resolved toward the
  // lexicographically smallest bit pattern
  InferenceResult best() {
    best_score_ = kNegInf;
    best_mask_ = 0;
    have_best_ = false;
    dfs(0, 0, 0.0, 0.0, 0u, 0);
    InferenceResult out;
    out.z = LatentVector(m_.n_latents);
    for (int c = 0; c < static_cast<int>(pool_.size()); ++c) {
      if (best_mask_ & (1u << c)) out.z.bits[static_cast<std::size_t>(pool_[static_cast<std::size_t>(c)])] = 1;
    }
    out.score = best_score_;
    return out;
  }

 private:
  double leaf_score(int k, double colsum, double gain, int depth) const {
    const double prior = kind_ == PriorKind::binomial
                             ? binom_table_[static_cast<std::size_t>(k)]
                             : he_base_ + gain;
    const double r_exp = 1.0 - static_cast<double>(k) / m_.n_latents;
    double score = prior + r_exp * sr_silent_ + colsum;
    const int f = static_cast<int>(firing_.size());
    const double* s = s_fire_.data() + static_cast<std::size_t>(depth) * f;
    for (int j = 0; j < f; ++j) {
      score += log1mexp(r_exp * lr_fire_[static_cast<std::size_t>(j)] + s[j]);
    }
    return score;
  }

  void consider(double score, std::uint32_t mask) {
    if (!have_best_ || score > best_score_) {
      best_score_ = score;
      best_mask_ = mask;
      have_best_ = true;
      return;
    }
    if (score == best_score_ && mask != best_mask_) {
      if (lex_less(mask_bits(mask), mask_bits(best_mask_))) best_mask_ = mask;
    }
  }

  std::vector<std::uint8_t> mask_bits(std::uint32_t mask) const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m_.n_latents), 0);
    for (int c = 0; c < static_cast<int>(pool_.size()); ++c) {
      if (mask & (1u << c)) bits[static_cast<std::size_t>(pool_[static_cast<std::size_t>(c)])] = 1;
    }
    return bits;
  }

  void dfs(int pos, int k, double colsum, double gain, std::uint32_t mask, int depth) {
    if (pos == static_cast<int>(pool_.size())) {
      consider(leaf_score(k, colsum, gain, depth), mask);
      return;
    }
    dfs(pos + 1, k, colsum, gain, mask, depth);
    const int f = static_cast<int>(firing_.size());
    double* dst = s_fire_.data() + static_cast<std::size_t>(depth + 1) * f;
    const double* src = s_fire_.data() + static_cast<std::size_t>(depth) * f;
    const double* col = lp_fire_.data() + static_cast<std::size_t>(pos) * f;
    for (int j = 0; j < f; ++j) dst[j] = src[j] + col[j];
    dfs(pos + 1, k + 1, colsum + colsum_silent_[static_cast<std::size_t>(pos)],
        gain + he_gain(pos), mask | (1u << pos), depth + 1);
  }

  double he_gain(int pos) const {
    return kind_ == PriorKind::binomial ? 0.0 : he_gain_[static_cast<std::size_t>(pos)];
  }

  const ModelParams& m_;
  std::vector<int> pool_;
  PriorKind kind_;
  std::vector<int> firing_;
  double sr_silent_ = 0.0;
  std::vector<double> lr_fire_;
  std::vector<double> lp_fire_;         // pool x firing
  std::vector<double> colsum_silent_;   // per pool column
  std::vector<double> binom_table_;
  double he_base_ = 0.0;
  std::vector<double> he_gain_;
  std::vector<double> s_fire_;          // (pool+1) x firing DFS accumulators
  double best_score_ = kNegInf;
  std::uint32_t best_mask_ = 0;
  bool have_best_ = false;
};

}  // namespace detail

// Scores the z = 0 solution and every 1-hot z by log joint, sorted descending;
// ties break toward the smaller latent index (the z = 0 entry counts as -1).
inline std::vector<ScoredCandidate> score_one_hots(const ModelParams& m, const SpikeWord& y,
                                                   const PriorContext& ctx = {}) {
  detail::check_dims(m, &y, nullptr);
  std::vector<ScoredCandidate> out;
  out.reserve(static_cast<std::size_t>(m.n_latents) + 1);
  out.push_back({-1, log_joint(m, y, LatentVector(m.n_latents), ctx)});
  for (int a = 0; a < m.n_latents; ++a) {
    out.push_back({a, log_joint(m, y, one_hot_latent(m.n_latents, a), ctx)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredCandidate& l, const ScoredCandidate& r) {
    if (l.score != r.score) return l.score > r.score;
    return l.latent_index < r.latent_index;
  });
  return out;
}

// Greedy interpolated MAP search: rank the 1-hot candidates against z = 0,
// keep everything scoring strictly above z = 0, append up to i0 of the rest in
// descending order, truncate the pool to imax, then exhaustively evaluate all
// subsets of the pool (z = 0 always included).
inline InferenceResult greedy_infer_scored(const ModelParams& m, const SpikeWord& y,
                                           const InferenceConfig& cfg,
                                           const PriorContext& ctx = {}) {
  if (cfg.imax < 1 || cfg.i0 < 0) throw NumericError("greedy_infer: need imax >= 1 and i0 >= 0");
  const int i0 = std::min(cfg.i0, m.n_latents);
  const int imax = std::min(cfg.imax, m.n_latents);

  const auto scored = score_one_hots(m, y, ctx);
  double z0_score = 0.0;
  for (const auto& c : scored) {
    if (c.latent_index == -1) z0_score = c.score;
  }

  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(imax));
  int below_taken = 0;
  for (const auto& c : scored) {
    if (c.latent_index == -1) continue;
    if (static_cast<int>(pool.size()) == imax) break;
    if (c.score > z0_score) {
      pool.push_back(c.latent_index);
    } else if (below_taken < i0) {
      pool.push_back(c.latent_index);
      ++below_taken;
    }
  }

  detail::SubsetEvaluator eval(m, y, std::move(pool), ctx);
  return eval.best();
}

inline LatentVector greedy_infer(const ModelParams& m, const SpikeWord& y,
                                 const InferenceConfig& cfg, const PriorContext& ctx = {}) {
  return greedy_infer_scored(m, y, cfg, ctx).z;
}

inline constexpr int kExhaustiveGuard = 24;

// Exact argmax of the log joint over all 2^M latent vectors. Guarded against
// blowup; raise max_latents deliberately if you really want a bigger search.
inline InferenceResult exhaustive_infer_scored(const ModelParams& m, const SpikeWord& y,
                                               const PriorContext& ctx = {},
                                               int max_latents = kExhaustiveGuard) {
  if (m.n_latents > max_latents) {
    throw NumericError("exhaustive_infer: n_latents " + std::to_string(m.n_latents) +
                       " exceeds guard " + std::to_string(max_latents));
  }
  std::vector<int> pool(static_cast<std::size_t>(m.n_latents));
  for (int a = 0; a < m.n_latents; ++a) pool[static_cast<std::size_t>(a)] = a;
  detail::SubsetEvaluator eval(m, y, std::move(pool), ctx);
  return eval.best();
}

inline LatentVector exhaustive_infer(const ModelParams& m, const SpikeWord& y,
                                     const PriorContext& ctx = {},
                                     int max_latents = kExhaustiveGuard) {
  return exhaustive_infer_scored(m, y, ctx, max_latents).z;
}

}  // namespace blv
