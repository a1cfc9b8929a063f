#include <doctest.h>

#include <cmath>

#include "eclab/reshape.hpp"
#include "eclab/grpo.hpp"
#include "test_helpers.hpp"

using namespace eclab;

namespace {

reshape::ReshapeParams params(double r0, double l0 = 25.0, double delta = 1e9,
                          Granularity g = Granularity::kSequence) {
  return reshape::ReshapeParams{r0, l0, delta, g};
}

}  // namespace

TEST_CASE("self-information of a sequence") {
  const Rollout full = test::make_rollout(0, {0, 1}, {0.0, 0.0}, 0.0);
  CHECK(reshape::self_information_sequence(full) == 0.0);

  const Rollout two = test::make_rollout(0, {0, 1}, {-1.0, -3.0}, 0.0);
  CHECK(reshape::self_information_sequence(two) == doctest::Approx(2.0).epsilon(1e-12));

  const Rollout one = test::make_rollout(0, {0}, {-2.0}, 0.0);
  CHECK(reshape::self_information_sequence(one) == doctest::Approx(2.0).epsilon(1e-12));

  Rollout empty;
  CHECK_THROWS_AS(reshape::self_information_sequence(empty), std::invalid_argument);
}

TEST_CASE("per-token self-information and the compositional identity") {
  const Rollout r = test::make_rollout(0, {0, 1, 2}, {-0.5, -1.5, -2.5}, 0.0);
  CHECK(reshape::self_information_token(r, 0) == doctest::Approx(0.5));
  CHECK(reshape::self_information_token(r, 2) == doctest::Approx(2.5));
  CHECK_THROWS_AS(reshape::self_information_token(r, 3), std::out_of_range);
  CHECK_THROWS_AS(reshape::self_information_token(r, -1), std::out_of_range);
  double mean_tokens = 0.0;
  for (int t = 0; t < 3; ++t) mean_tokens += reshape::self_information_token(r, t) / 3.0;
  CHECK(reshape::self_information_sequence(r) == doctest::Approx(mean_tokens).epsilon(1e-12));
}

TEST_CASE("reshape advantage: worked examples") {
  // gate open (r_std below delta)
  CHECK(reshape::reshape_advantage(2.0, 5.0, params(10.0), 0.0) == doctest::Approx(1.5));
  CHECK(reshape::reshape_advantage(2.0, 5.0, params(-50.0), 0.0) == doctest::Approx(2.1));
  // negative advantages are untouched in every configuration
  CHECK(reshape::reshape_advantage(-1.0, 99.0, params(10.0), 0.0) == -1.0);
  // floor binds when the self-information term would cross it
  CHECK(reshape::reshape_advantage(2.0, 50.0, params(10.0), 0.0) == doctest::Approx(2.0 / 25.0));
  // gate closed leaves positives unchanged
  CHECK(reshape::reshape_advantage(2.0, 5.0, params(10.0, 25.0, 0.5), 0.7) == 2.0);
  // zero advantage is a fixed point
  CHECK(reshape::reshape_advantage(0.0, 5.0, params(10.0), 0.0) == 0.0);
}

TEST_CASE("reshape parameter validation") {
  CHECK_THROWS_AS(reshape::reshape_advantage(1.0, 1.0, params(0.5), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(reshape::reshape_advantage(1.0, 1.0, params(10.0, 1.0), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(reshape::reshape_advantage(1.0, 1.0, params(10.0, 25.0, 0.0), 0.0),
                  std::invalid_argument);
}

TEST_CASE("reshape invariants over random cases") {
  RngStream rng(2718);
  for (int i = 0; i < 20000; ++i) {
    const double a = 4.0 * rng.next_double() - 2.0;
    const double s = 3.0 * rng.next_double();
    const double r0 = (rng.next_int(0, 1) ? 1.0 : -1.0) * (1.0 + 99.0 * rng.next_double());
    const double l0 = 1.0 + 49.0 * rng.next_double();
    const double delta = 2.0 * rng.next_double() + 1e-9;
    const double r_std = 2.0 * rng.next_double();
    const double shaped = reshape::reshape_advantage(a, s, params(r0, l0, delta), r_std);

    if (a > 0.0 && r_std < delta) {
      CHECK(shaped >= a / l0);           // sign preservation via the floor
      CHECK(shaped > 0.0);
      if (r0 > 1.0) CHECK(shaped <= a);  // positive r0 dampens
      if (r0 < -1.0) CHECK(shaped >= a); // negative r0 boosts
    } else {
      CHECK(shaped == a);  // negatives, zeros and gate-closed cases are fixed points
    }
  }
}

TEST_CASE("reshape approaches the identity as |r0| grows") {
  const double a = 1.7, s = 2.3;
  for (double r0 : {1e9, -1e9}) {
    CHECK(std::abs(reshape::reshape_advantage(a, s, params(r0), 0.0) - a) <= 1e-6);
  }
}

TEST_CASE("reshape group honors the gate and granularity") {
  grpo::RolloutGroup group;
  group.query = 0;
  group.rollouts.push_back(test::make_rollout(0, {0, 1}, {-1.0, -3.0}, 1.2));
  group.rollouts.push_back(test::make_rollout(0, {1, 0}, {-0.2, -0.4}, -0.7));
  group.rollouts.push_back(test::make_rollout(0, {1, 1}, {-0.5, -0.5}, 0.0));

  SUBCASE("gate closed: everything untouched") {
    group.r_std_gate = 2.0;
    reshape::reshape_group(group, params(10.0, 25.0, 1.5));
    for (const Rollout& r : group.rollouts)
      for (double v : r.shaped_adv) CHECK(v == r.advantage);
  }

  SUBCASE("per-sequence granularity") {
    group.r_std_gate = 0.5;
    reshape::reshape_group(group, params(10.0, 25.0, 1.5));
    // positive rollout: S = 2.0, so max(1.2/25, 1.2 - 0.2) = 1.0
    for (double v : group.rollouts[0].shaped_adv) CHECK(v == doctest::Approx(1.0));
    for (double v : group.rollouts[1].shaped_adv) CHECK(v == -0.7);
    for (double v : group.rollouts[2].shaped_adv) CHECK(v == 0.0);
  }

  SUBCASE("per-token granularity matches the per-element oracle") {
    group.r_std_gate = 0.5;
    reshape::reshape_group(group, params(10.0, 25.0, 1.5, Granularity::kToken));
    const Rollout& r = group.rollouts[0];
    for (int t = 0; t < 2; ++t) {
      const double expect = reshape::reshape_advantage(
          r.advantage, reshape::self_information_token(r, t), params(10.0), 0.0);
      CHECK(r.shaped_adv[t] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(r.shaped_adv[0] != r.shaped_adv[1]);
  }

  SUBCASE("all-negative group is untouched") {
    for (Rollout& r : group.rollouts) {
      r.advantage = -std::abs(r.advantage) - 0.1;
      r.shaped_adv.assign(r.tokens.size(), 0.0);
    }
    group.r_std_gate = 0.0;
    reshape::reshape_group(group, params(10.0));
    for (const Rollout& r : group.rollouts)
      for (double v : r.shaped_adv) CHECK(v == r.advantage);
  }

  SUBCASE("positive advantages strictly decrease with positive r0") {
    group.r_std_gate = 0.5;
    reshape::reshape_group(group, params(10.0, 25.0, 1.5));
    CHECK(group.rollouts[0].shaped_adv[0] < group.rollouts[0].advantage);
  }
}

TEST_CASE("covariance diagnostic") {
  std::vector<Rollout> rollouts;
  CHECK_THROWS_AS(reshape::covariance_diagnostic(rollouts, 1.0), std::invalid_argument);

  RngStream rng(1414);
  for (int i = 0; i < 32; ++i) {
    const double lp = -3.0 * rng.next_double();
    rollouts.push_back(test::make_rollout(0, {0}, {lp}, rng.next_normal()));
  }

  SUBCASE("k = 0 reduces to the base covariance") {
    const auto d = reshape::covariance_diagnostic(rollouts, 0.0);
    CHECK(d.cov_total == d.cov_base);
  }

  SUBCASE("bilinearity identity holds for any k") {
    for (double k : {-5.0, -1.0, 0.5, 3.0, 42.0}) {
      const auto d = reshape::covariance_diagnostic(rollouts, k);
      CHECK(std::abs(d.cov_total - (d.cov_base - k * d.cov_entropy_term)) <= 1e-12);
    }
  }

  SUBCASE("constant log-probabilities kill every covariance") {
    std::vector<Rollout> flat;
    for (int i = 0; i < 8; ++i)
      flat.push_back(test::make_rollout(0, {0}, {-1.5}, rng.next_normal()));
    const auto d = reshape::covariance_diagnostic(flat, 3.0);
    CHECK(d.cov_base == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.cov_entropy_term == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.cov_total == doctest::Approx(0.0).epsilon(1e-15));
  }
}
