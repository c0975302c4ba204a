#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "blv/model.hpp"
#include "test_util.hpp"

using namespace blv;

TEST_CASE("logistic and logit are mutually inverse") {
  CHECK(logistic(0.0) == doctest::Approx(0.5));
  CHECK(logit(logistic(3.7)) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(logit(0.5) == doctest::Approx(0.0));
  for (double x : {-11.0, -2.3, 0.01, 4.7, 11.5}) {
    CHECK(logit(logistic(x)) == doctest::Approx(x).epsilon(1e-10));
  }
  CHECK_THROWS_AS(logit(0.0), NumericError);
  CHECK_THROWS_AS(logit(1.0), NumericError);
  CHECK_THROWS_AS(logit(-0.2), NumericError);
}

TEST_CASE("logistic-space clamp keeps probabilities away from 0 and 1") {
  CHECK(clamp_logistic_space(-1e9) == -kLogisticClamp);
  CHECK(clamp_logistic_space(1e9) == kLogisticClamp);
  CHECK(clamp_logistic_space(3.0) == 3.0);
  CHECK(logistic(-kLogisticClamp) > 0.0);
  CHECK(logistic(-kLogisticClamp) < 1e-4);
  CHECK(logistic(kLogisticClamp) < 1.0);
}

TEST_CASE("cond_silence_probs reduces to R for z=0 and to the P product for all-ones") {
  Rng rng(11);
  const ModelParams m = testutil::random_model(4, 3, rng);
  const auto t0 = cond_silence_probs(m, LatentVector(3));
  for (int i = 0; i < 4; ++i) CHECK(t0[i] == doctest::Approx(m.r_silence(i)).epsilon(1e-14));

  LatentVector ones(3);
  std::fill(ones.bits.begin(), ones.bits.end(), 1);
  const auto t1 = cond_silence_probs(m, ones);
  for (int i = 0; i < 4; ++i) {
    const double expected = m.p_silence(i, 0) * m.p_silence(i, 1) * m.p_silence(i, 2);
    CHECK(t1[i] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("cond_silence_probs hand example N=1 M=2") {
  Matrix p(1, 2);
  p(0, 0) = 0.5;
  p(0, 1) = 0.7;
  const ModelParams m = ModelParams::from_probabilities(p, {0.9}, 0.1);
  LatentVector z(2);
  z.bits[0] = 1;
  const auto t = cond_silence_probs(m, z);
  CHECK(t[0] == doctest::Approx(std::pow(0.9, 0.5) * 0.5).epsilon(1e-12));
  CHECK(t[0] == doctest::Approx(0.47434).epsilon(1e-4));
}

TEST_CASE("cond_silence_probs stays in [0,1] for random inputs") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(6));
    const int m = 1 + static_cast<int>(rng.bounded(6));
    const ModelParams model = testutil::random_model(n, m, rng, 6.0);
    const LatentVector z = testutil::random_latent(m, 0.4, rng);
    for (double t : cond_silence_probs(model, z)) {
      CHECK(t >= 0.0);
      CHECK(t <= 1.0);
    }
  }
}

TEST_CASE("log_likelihood: all-silent word under z=0 is sum of log R") {
  Rng rng(33);
  const ModelParams m = testutil::random_model(5, 4, rng);
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) expected += std::log(m.r_silence(i));
  CHECK(log_likelihood(m, SpikeWord(5), LatentVector(4)) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log_likelihood normalizes over all words") {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(3));  // up to N=3 here; N=4 in acceptance
    const int m = 1 + static_cast<int>(rng.bounded(5));
    const ModelParams model = testutil::random_model(n, m, rng);
    const LatentVector z = testutil::random_latent(m, 0.5, rng);
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      total += std::exp(log_likelihood(model, testutil::word_from_mask(n, mask), z));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("log_likelihood firing-cell contribution matches the silence complement") {
  Matrix p(1, 2);
  p(0, 0) = 0.5;
  p(0, 1) = 0.7;
  const ModelParams m = ModelParams::from_probabilities(p, {0.9}, 0.1);
  LatentVector z(2);
  z.bits[0] = 1;
  SpikeWord y(1);
  y.bits[0] = 1;
  CHECK(log_likelihood(m, y, z) ==
        doctest::Approx(std::log(1.0 - std::pow(0.9, 0.5) * 0.5)).epsilon(1e-12));
  CHECK(std::exp(log_likelihood(m, y, z)) == doctest::Approx(0.52566).epsilon(1e-4));
}

TEST_CASE("log_likelihood returns -inf for an impossible word instead of erroring") {
  Matrix p(1, 1);
  p(0, 0) = 1.0;
  const ModelParams m = ModelParams::from_probabilities(p, {1.0}, 0.5);
  SpikeWord y(1);
  y.bits[0] = 1;  // T = 1 exactly, so p(y=1) = 0
  LatentVector z(1);
  CHECK(log_likelihood(m, y, z) == kNegInf);
}

TEST_CASE("log_binomial_prior closed forms and normalization") {
  CHECK(log_binomial_prior(7, 0.2, 0) == doctest::Approx(7.0 * std::log(0.8)).epsilon(1e-14));
  CHECK(std::exp(log_binomial_prior(10, 0.1, 1)) == doctest::Approx(0.387420489).epsilon(1e-12));
  for (auto [m, q] : {std::pair{10, 0.1}, std::pair{40, 0.37}, std::pair{3, 0.9}}) {
    double total = 0.0;
    for (int k = 0; k <= m; ++k) total += std::exp(log_binomial_prior(m, q, k));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(log_binomial_prior(5, 0.1, -1), NumericError);
  CHECK_THROWS_AS(log_binomial_prior(5, 0.1, 6), NumericError);
}

TEST_CASE("log_joint composes prior and likelihood") {
  Rng rng(55);
  const ModelParams m = testutil::random_model(4, 3, rng);
  double expected = 3.0 * std::log1p(-m.q_active());
  for (int i = 0; i < 4; ++i) expected += std::log(m.r_silence(i));
  CHECK(log_joint(m, SpikeWord(4), LatentVector(3)) == doctest::Approx(expected).epsilon(1e-12));

  for (int trial = 0; trial < 30; ++trial) {
    const SpikeWord y = testutil::random_word(4, 0.5, rng);
    const LatentVector z = testutil::random_latent(3, 0.5, rng);
    CHECK(log_joint(m, y, z) <= log_binomial_prior(3, m.q_active(), z.cardinality()) + 1e-12);
  }
}

TEST_CASE("log_joint equals the probability-space oracle on small instances") {
  Rng rng(66);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelParams m = testutil::random_model(2, 2, rng);
    for (unsigned ymask = 0; ymask < 4; ++ymask) {
      for (unsigned zmask = 0; zmask < 4; ++zmask) {
        const SpikeWord y = testutil::word_from_mask(2, ymask);
        const LatentVector z = testutil::latent_from_mask(2, zmask);
        CHECK(log_joint(m, y, z) ==
              doctest::Approx(testutil::oracle_log_joint(m, y, z)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("he_activation_prob: uniform rates give Q, ratios otherwise") {
  HEState he = HEState::initial(4);
  for (int a = 0; a < 4; ++a) CHECK(he_activation_prob(he, 0.07, a) == doctest::Approx(0.07));

  HEState uneven;
  uneven.rates = {1.0, 3.0};
  CHECK(he_activation_prob(uneven, 0.1, 0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(he_activation_prob(uneven, 0.1, 1) == doctest::Approx(0.2 / 3.0).epsilon(1e-14));

  HEState doubled;
  doubled.rates = {2.0, 6.0};
  CHECK(he_activation_prob(doubled, 0.1, 0) == doctest::Approx(he_activation_prob(uneven, 0.1, 0)));
  CHECK(he_activation_prob(doubled, 0.1, 1) == doctest::Approx(he_activation_prob(uneven, 0.1, 1)));
}

TEST_CASE("he_activation_prob clamps the ratio into (0,1)") {
  HEState he;
  he.rates = {1e-9, 10.0};  // raw ratio for unit 0 far exceeds 1
  CHECK(he_activation_prob(he, 0.5, 0) == doctest::Approx(1.0 - 1e-6));
  CHECK(he_activation_prob(he, 0.5, 0) < 1.0);
}

TEST_CASE("log_he_prior reduces to the factorial Bernoulli prior for uniform rates") {
  Rng rng(77);
  HEState he = HEState::initial(5);
  const double q = 0.13;
  for (int trial = 0; trial < 20; ++trial) {
    const LatentVector z = testutil::random_latent(5, 0.5, rng);
    double expected = 0.0;
    for (int a = 0; a < 5; ++a) {
      expected += z.bits[a] ? std::log(q) : std::log1p(-q);
    }
    CHECK(log_he_prior(he, q, z) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("log_he_prior hand example") {
  HEState he;
  he.rates = {1.0, 3.0};
  LatentVector z(2);
  z.bits[0] = 1;
  CHECK(log_he_prior(he, 0.1, z) ==
        doctest::Approx(std::log(0.2) + std::log1p(-0.2 / 3.0)).epsilon(1e-12));
  CHECK(log_he_prior(he, 0.1, LatentVector(2)) ==
        doctest::Approx(std::log1p(-0.2) + std::log1p(-0.2 / 3.0)).epsilon(1e-12));
}

TEST_CASE("log_joint is invariant under simultaneous latent permutations") {
  Rng rng(88);
  const int n = 5, m = 4;
  const ModelParams model = testutil::random_model(n, m, rng);
  HEState he;
  he.rates = {1.0, 2.0, 0.5, 4.0};

  std::vector<int> perm = {2, 0, 3, 1};
  ModelParams permuted = model;
  HEState he_perm = he;
  for (int a = 0; a < m; ++a) {
    for (int i = 0; i < n; ++i) permuted.rho(i, a) = model.rho(i, perm[a]);
    he_perm.rates[a] = he.rates[perm[a]];
  }

  for (int trial = 0; trial < 30; ++trial) {
    const SpikeWord y = testutil::random_word(n, 0.4, rng);
    const LatentVector z = testutil::random_latent(m, 0.5, rng);
    LatentVector z_perm(m);
    for (int a = 0; a < m; ++a) z_perm.bits[a] = z.bits[perm[a]];
    CHECK(log_joint(model, y, z) == doctest::Approx(log_joint(permuted, y, z_perm)).epsilon(1e-12));
    CHECK(log_joint(model, y, z, PriorContext::homeostatic(he)) ==
          doctest::Approx(log_joint(permuted, y, z_perm, PriorContext::homeostatic(he_perm)))
              .epsilon(1e-12));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  Rng rng(99);
  const ModelParams m = testutil::random_model(3, 2, rng);
  CHECK_THROWS_AS(cond_silence_probs(m, LatentVector(3)), DataError);
  CHECK_THROWS_AS(log_likelihood(m, SpikeWord(4), LatentVector(2)), DataError);
  CHECK_THROWS_AS(log_likelihood(m, SpikeWord(3), LatentVector(1)), DataError);
}
