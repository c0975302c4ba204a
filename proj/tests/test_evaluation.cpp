#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blv/evaluation.hpp"
#include "blv/rng.hpp"
#include "test_util.hpp"

using namespace blv;

TEST_CASE("cosine_similarity closed forms") {
  CHECK(cosine_similarity({1, 1, 0}, {1, 1, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 0, 0}, {0, 1, 1}) == 0.0);
  CHECK(cosine_similarity({1, 1, 0}, {1, 0, 0}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cosine_similarity({0, 0}, {1, 1}) == 0.0);  // zero-norm convention
  CHECK_THROWS_AS(cosine_similarity({1, 2}, {1, 2, 3}), DataError);
}

TEST_CASE("cosine_similarity is symmetric and in [0,1] for nonnegative input") {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(8), v(8);
    for (auto& x : u) x = rng.uniform();
    for (auto& x : v) x = rng.uniform();
    const double ab = cosine_similarity(u, v);
    CHECK(ab == doctest::Approx(cosine_similarity(v, u)).epsilon(1e-14));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("hungarian_min_cost matches brute-force permutation search") {
  Rng rng(62);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.bounded(5));  // up to 6
    Matrix cost(n, n);
    for (double& v : cost.data) v = rng.uniform();

    const std::vector<int> assignment = hungarian_min_cost(cost);
    double got = 0.0;
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      REQUIRE(assignment[i] >= 0);
      REQUIRE(assignment[i] < n);
      CHECK(!used[assignment[i]]);
      used[assignment[i]] = 1;
      got += cost(i, assignment[i]);
    }

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("match_assemblies recovers a column permutation exactly") {
  Rng rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12, m = 9;
    Matrix p(n, m);
    for (double& v : p.data) v = rng.uniform();
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix permuted(n, m);
    for (int a = 0; a < m; ++a) {
      for (int i = 0; i < n; ++i) permuted(i, perm[a]) = p(i, a);
    }
    const MatchReport rep = match_assemblies(p, permuted);
    for (int a = 0; a < m; ++a) {
      CHECK(rep.assignment[a] == perm[a]);
      CHECK(rep.matched_cs[a] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("match_assemblies of a model with itself has delta_cs >= 0 and matched diag") {
  Rng rng(64);
  Matrix p(10, 6);
  for (double& v : p.data) v = rng.uniform();
  const MatchReport rep = match_assemblies(p, p);
  CHECK(rep.delta_cs >= -1e-12);
  CHECK(rep.mean_matched() == doctest::Approx(1.0).epsilon(1e-12));
  Matrix other(9, 6);
  CHECK_THROWS_AS(match_assemblies(p, other), DataError);
}

TEST_CASE("delta_cs is the difference between matched and diagonal means") {
  Rng rng(65);
  Matrix a(8, 5), b(8, 5);
  for (double& v : a.data) v = rng.uniform();
  for (double& v : b.data) v = rng.uniform();
  const MatchReport rep = match_assemblies(a, b);
  CHECK(rep.delta_cs == doctest::Approx(rep.mean_matched() - rep.mean_diag()).epsilon(1e-12));
  CHECK(rep.delta_cs >= -1e-12);  // optimal matching cannot lose to the diagonal
}

TEST_CASE("determine_members: constant column has no members") {
  CHECK(determine_members(std::vector<double>(6, 0.4)).members.empty());
  CHECK(determine_members({}).members.empty());
  CHECK(determine_members({0.5}).members.empty());
}

TEST_CASE("determine_members hand example") {
  const MemberSet ms = determine_members({0.9, 0.85, 0.05, 0.04, 0.03});
  CHECK(ms.members == std::vector<int>{0, 1});
  REQUIRE(ms.strengths.size() == 2);
  CHECK(ms.strengths[0] == doctest::Approx(0.9));
  CHECK(ms.strengths[1] == doctest::Approx(0.85));
}

TEST_CASE("determine_members on a one-hot column returns exactly that cell") {
  std::vector<double> col(8, 0.0);
  col[5] = 1.0;
  const MemberSet ms = determine_members(col);
  CHECK(ms.members == std::vector<int>{5});
}

TEST_CASE("crispness closed forms") {
  // identical in/out populations: zero numerator
  MemberSet ms;
  ms.members = {0, 1};
  CHECK(crispness({0.5, 0.5, 0.5, 0.5}, ms) == doctest::Approx(0.0));

  // in = {0.8 +/- 0.1}, out = {0.05 +/- 0.1} -> 0.75 / sqrt(0.02)
  const double got = crispness({0.7, 0.9, 0.15, -0.05}, ms);
  CHECK(got == doctest::Approx(0.75 / std::sqrt(0.02)).epsilon(1e-12));
  CHECK(got == doctest::Approx(5.3033).epsilon(1e-4));

  MemberSet empty;
  CHECK_THROWS_AS(crispness({0.1, 0.2}, empty), NumericError);
  MemberSet full;
  full.members = {0, 1};
  CHECK_THROWS_AS(crispness({0.1, 0.2}, full), NumericError);
}

TEST_CASE("psth bins and conserves events") {
  EventTrace trace;
  trace.n_trials = 2;
  trace.duration_ms = 200.0;
  CHECK(psth(trace, 50.0) == std::vector<double>(4, 0.0));

  trace.events = {{0, 74.0}};
  const auto one = psth(trace, 50.0);
  CHECK(one[0] == 0.0);
  CHECK(one[1] == 1.0);

  Rng rng(66);
  trace.events.clear();
  for (int i = 0; i < 200; ++i) {
    trace.events.emplace_back(static_cast<int>(rng.bounded(2)), rng.uniform() * 200.0);
  }
  for (double width : {1.0, 7.0, 50.0, 200.0}) {
    const auto counts = psth(trace, width);
    CHECK(std::accumulate(counts.begin(), counts.end(), 0.0) == doctest::Approx(200.0));
  }
  trace.events = {{0, 300.0}};
  CHECK_THROWS_AS(psth(trace, 50.0), DataError);
}

TEST_CASE("robustness closed forms and range checks") {
  CHECK(robustness(1.0, 1.0) == 1.0);
  CHECK(robustness(0.7, 0.0) == 0.0);
  CHECK(robustness(0.64, 0.81) == doctest::Approx(0.72).epsilon(1e-12));
  CHECK_THROWS_AS(robustness(1.5, 0.2), NumericError);
  CHECK_THROWS_AS(robustness(0.5, -0.1), NumericError);
}

TEST_CASE("heterogeneity closed forms") {
  CHECK(heterogeneity(2, 2) == 1.0);
  CHECK(heterogeneity(0, 5) == 0.0);
  CHECK(heterogeneity(1, 3) == doctest::Approx(0.5));
  CHECK_THROWS_AS(heterogeneity(0, 0), NumericError);
  CHECK_THROWS_AS(heterogeneity(-1, 2), NumericError);
}

TEST_CASE("synergy closed forms and the identity with robustness") {
  CHECK(synergy(1.0, 1.0) == 0.0);
  CHECK(synergy(0.0, 0.9) == 1.0);
  CHECK(synergy(0.64, 0.81) == doctest::Approx(0.28).epsilon(1e-12));
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(), b = rng.uniform();
    CHECK(synergy(a, b) == doctest::Approx(1.0 - robustness(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("null_word_logprob closed forms") {
  SpikeWord any(3);
  any.bits = {1, 0, 1};
  CHECK(null_word_logprob({0.5, 0.5, 0.5}, any) == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-12));

  SpikeWord certain(2);
  certain.bits = {1, 0};
  CHECK(null_word_logprob({1.0, 0.0}, certain) == doctest::Approx(0.0).epsilon(1e-9));

  SpikeWord both(2);
  both.bits = {1, 1};
  CHECK(null_word_logprob({0.1, 0.9}, both) == doctest::Approx(std::log(0.09)).epsilon(1e-12));
  CHECK_THROWS_AS(null_word_logprob({0.5}, both), DataError);
}

TEST_CASE("delta_py trivial values and scale invariance") {
  const std::vector<double> trace = {1, 0, 2, 0, 3, 0, 1, 1};
  std::vector<double> scaled = trace;
  for (double& v : scaled) v *= 7.5;
  CHECK(delta_py(trace, scaled, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(delta_py(trace, scaled, 4) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> left = {1, 1, 0, 0};
  const std::vector<double> right = {0, 0, 1, 1};
  CHECK(delta_py(left, right, 1) == doctest::Approx(1.0));
  CHECK(delta_py(left, right, 2) == doctest::Approx(1.0));

  CHECK_THROWS_AS(delta_py({1, 2}, {1, 2, 3}, 1), DataError);
}

TEST_CASE("coactivity_stats counts activations and unordered pairs") {
  std::vector<LatentVector> one_hots;
  for (int a = 0; a < 3; ++a) one_hots.push_back(one_hot_latent(3, a));
  const CoactivityStats solo = coactivity_stats(one_hots);
  CHECK(solo.counts == std::vector<std::int64_t>{1, 1, 1});
  for (double v : solo.pair_counts.data) CHECK(v == 0.0);

  LatentVector pair(3);
  pair.bits = {1, 1, 0};
  const CoactivityStats stats = coactivity_stats({pair});
  CHECK(stats.counts == std::vector<std::int64_t>{1, 1, 0});
  CHECK(stats.pair_counts(0, 1) == 1.0);
  CHECK(stats.pair_counts(1, 0) == 1.0);
  CHECK(stats.pair_counts(0, 0) == 0.0);  // self pairs are not counted
  CHECK(stats.pair_counts(1, 1) == 0.0);
}
