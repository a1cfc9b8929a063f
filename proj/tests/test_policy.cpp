#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "eclab/gradcheck.hpp"
#include "eclab/numerics.hpp"
#include "eclab/policy.hpp"
#include "test_helpers.hpp"

using namespace eclab;

TEST_CASE("sampling from a near-deterministic softmax returns the argmax") {
  FactoredPolicy p = FactoredPolicy::uniform(1, 3, 5);
  for (int t = 0; t < 3; ++t) p.row(0, t)[t + 1] = 1e6;
  RngStream rng(3);
  const Rollout r = sample_rollout(p, 0, 1.0, rng);
  CHECK(r.tokens == std::vector<Token>{1, 2, 3});
  CHECK(sequence_logprob(p, r) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sampling matches the multinomial distribution") {
  const FactoredPolicy p = FactoredPolicy::uniform(1, 1, 4);
  int counts[4] = {0, 0, 0, 0};
  const int n = 10000;
  RngStream rng(17);
  for (int i = 0; i < n; ++i) {
    const Rollout r = sample_rollout(p, 0, 1.0, rng);
    ++counts[r.tokens[0]];
  }
  // 3-sigma binomial bound around 1/4
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  for (int v = 0; v < 4; ++v)
    CHECK(std::abs(counts[v] / static_cast<double>(n) - 0.25) <= 3.0 * sigma);
}

TEST_CASE("sampling is deterministic per stream") {
  FactoredPolicy p = FactoredPolicy::uniform(2, 4, 6);
  RngStream g(99);
  for (double& x : p.logits) x = g.next_normal();
  RngStream a = derive_stream(42, {kTagRollout, 3, 1, 0});
  RngStream b = derive_stream(42, {kTagRollout, 3, 1, 0});
  const Rollout ra = sample_rollout(p, 1, 0.7, a);
  const Rollout rb = sample_rollout(p, 1, 0.7, b);
  CHECK(ra.tokens == rb.tokens);
  CHECK(ra.logp_old == rb.logp_old);
}

TEST_CASE("temperature only affects sampling, never scoring") {
  FactoredPolicy p = FactoredPolicy::uniform(1, 1, 3);
  p.row(0, 0)[0] = 1.0;  // logit gap 1 over the others
  int argmax_hits = 0;
  const int n = 10000;
  RngStream rng(5);
  for (int i = 0; i < n; ++i) {
    const Rollout r = sample_rollout(p, 0, 0.01, rng);
    if (r.tokens[0] == 0) ++argmax_hits;
    // stored log-probability is the tau=1 value
    CHECK(r.logp_old[0] == doctest::Approx(log_softmax(p.row(0, 0))[r.tokens[0]]));
  }
  CHECK(argmax_hits >= 9990);
}

TEST_CASE("sequence logprob closed forms") {
  const FactoredPolicy uniform4 = FactoredPolicy::uniform(1, 2, 4);
  RngStream rng(11);
  const Rollout r = sample_rollout(uniform4, 0, 1.0, rng);
  CHECK(sequence_logprob(uniform4, r) == doctest::Approx(2.0 * std::log(0.25)).epsilon(1e-12));
  CHECK(sequence_logprob(uniform4, r) <= 0.0);
}

TEST_CASE("token entropy closed forms") {
  const FactoredPolicy uniform4 = FactoredPolicy::uniform(1, 1, 4);
  CHECK(token_entropy(uniform4, 0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  FactoredPolicy det = FactoredPolicy::uniform(1, 1, 4);
  det.row(0, 0)[2] = 1e9;
  CHECK(token_entropy(det, 0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  // two-point (0.9, 0.1)
  FactoredPolicy two = FactoredPolicy::uniform(1, 1, 2);
  two.row(0, 0)[0] = std::log(0.9);
  two.row(0, 0)[1] = std::log(0.1);
  CHECK(token_entropy(two, 0, 0) == doctest::Approx(0.325083).epsilon(1e-4));
}

TEST_CASE("exact policy entropy is the mean over positions") {
  FactoredPolicy p = FactoredPolicy::uniform(2, 2, 4);
  p.row(1, 1)[0] = 50.0;  // one near-deterministic position
  double expect = 0.0;
  for (int q = 0; q < 2; ++q)
    for (int t = 0; t < 2; ++t) expect += token_entropy(p, q, t);
  expect /= 4.0;
  CHECK(exact_policy_entropy(p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sampled entropy: arithmetic and convergence") {
  CHECK_THROWS_AS(sampled_policy_entropy({}), std::invalid_argument);

  const Rollout single = test::make_rollout(0, {0, 1}, {-1.0, -3.0}, 0.0);
  std::vector<Rollout> one = {single};
  CHECK(sampled_policy_entropy(one) == doctest::Approx(2.0).epsilon(1e-12));

  FactoredPolicy p = FactoredPolicy::uniform(1, 2, 4);
  RngStream g(15);
  for (double& x : p.logits) x = 0.5 * g.next_normal();
  const double exact = exact_policy_entropy(p);
  std::vector<Rollout> rollouts;
  RngStream rng(31);
  std::vector<double> token_nlls;
  for (int i = 0; i < 10000; ++i) {
    rollouts.push_back(sample_rollout(p, 0, 1.0, rng));
    for (double lp : rollouts.back().logp_old) token_nlls.push_back(-lp);
  }
  const double est = sampled_policy_entropy(rollouts);
  const double se = sample_std(token_nlls) / std::sqrt(static_cast<double>(token_nlls.size()));
  CHECK(std::abs(est - exact) <= 3.0 * se + 1e-12);
}

TEST_CASE("softmax shift invariance") {
  FactoredPolicy p = FactoredPolicy::uniform(1, 3, 5);
  RngStream g(21);
  for (double& x : p.logits) x = g.next_normal();
  FactoredPolicy shifted = p;
  for (int v = 0; v < 5; ++v) shifted.row(0, 1)[v] += 17.25;

  CHECK(std::abs(token_entropy(p, 0, 1) - token_entropy(shifted, 0, 1)) <= 1e-10);
  CHECK(std::abs(exact_policy_entropy(p) - exact_policy_entropy(shifted)) <= 1e-10);

  const Rollout r = [&] {
    RngStream rng(4);
    Rollout out = sample_rollout(p, 0, 1.0, rng);
    out.advantage = 1.3;
    out.shaped_adv.assign(out.tokens.size(), 1.3);
    return out;
  }();
  std::vector<Rollout> rollouts = {r};
  const SurrogateConfig cfg{0.0, 0.2, Granularity::kSequence};
  const auto ga = surrogate_gradient(p, p, p, rollouts, 0, cfg);
  const auto gb = surrogate_gradient(shifted, shifted, shifted, rollouts, 0, cfg);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(std::abs(ga[i] - gb[i]) <= 1e-10);
}

TEST_CASE("surrogate gradient: zero advantage, zero gradient") {
  const FactoredPolicy p = FactoredPolicy::uniform(1, 2, 3);
  RngStream rng(9);
  Rollout r = sample_rollout(p, 0, 1.0, rng);
  r.advantage = 0.0;
  r.shaped_adv.assign(r.tokens.size(), 0.0);
  std::vector<Rollout> rollouts = {r};
  const auto g = surrogate_gradient(p, p, p, rollouts, 0, {0.0, 0.2, Granularity::kSequence});
  for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("surrogate gradient reduces to A * grad log pi when policies coincide") {
  // single rollout, beta = 0, pi = pi_old: gradient at (t, v) is
  // A * (1{v = o_t} - pi(v))
  FactoredPolicy p = FactoredPolicy::uniform(1, 2, 4);
  RngStream g(33);
  for (double& x : p.logits) x = g.next_normal();
  RngStream rng(12);
  Rollout r = sample_rollout(p, 0, 1.0, rng);
  const double a = 0.8;
  r.advantage = a;
  r.shaped_adv.assign(r.tokens.size(), a);
  std::vector<Rollout> rollouts = {r};
  const auto grad = surrogate_gradient(p, p, p, rollouts, 0, {0.0, 0.2, Granularity::kSequence});
  for (int t = 0; t < 2; ++t) {
    const auto probs = softmax(p.row(0, t));
    for (int v = 0; v < 4; ++v) {
      const double expect = a * ((v == r.tokens[t] ? 1.0 : 0.0) - probs[v]);
      CHECK(grad[static_cast<std::size_t>(t) * 4 + v] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("expected sampled gradient equals the exact tabular gradient") {
  // weighting single-action rollouts by pi reproduces pi(a)(A(a) - sum pi A)
  FactoredPolicy p = FactoredPolicy::uniform(1, 1, 4);
  RngStream g(44);
  for (double& x : p.logits) x = g.next_normal();
  const std::vector<double> probs = softmax(p.row(0, 0));
  const std::vector<double> lp = log_softmax(p.row(0, 0));
  const double advantages[4] = {0.5, -1.0, 2.0, 0.25};

  std::vector<double> expected_grad(4, 0.0);
  for (int a = 0; a < 4; ++a) {
    Rollout r = test::make_rollout(0, {a}, {lp[a]}, advantages[a]);
    std::vector<Rollout> one = {r};
    const auto grad = surrogate_gradient(p, p, p, one, 0, {0.0, 0.2, Granularity::kSequence});
    for (int v = 0; v < 4; ++v) expected_grad[v] += probs[a] * grad[v];
  }
  double pia = 0.0;
  for (int a = 0; a < 4; ++a) pia += probs[a] * advantages[a];
  for (int v = 0; v < 4; ++v)
    CHECK(expected_grad[v] == doctest::Approx(probs[v] * (advantages[v] - pia)).epsilon(1e-10));
}

TEST_CASE("tabular surrogate gradient matches the analytic softmax identity") {
  TabularPolicy p = TabularPolicy::uniform(2, 5);
  RngStream g(55);
  for (double& x : p.logits) x = g.next_normal();
  std::vector<double> adv(5);
  for (double& a : adv) a = g.next_normal();
  const auto grad = tabular_surrogate_gradient(p, p, p, 1, adv, {0.0, 0.2, Granularity::kSequence});
  const std::vector<double> probs = softmax(p.row(1));
  double pia = 0.0;
  for (int a = 0; a < 5; ++a) pia += probs[a] * adv[a];
  for (int a = 0; a < 5; ++a) {
    CHECK(grad[5 + a] == doctest::Approx(probs[a] * (adv[a] - pia)).epsilon(1e-12));
    CHECK(grad[a] == 0.0);  // untouched state
  }
}

TEST_CASE("surrogate rejects a bad clip epsilon and mismatched shapes") {
  const FactoredPolicy p = FactoredPolicy::uniform(1, 1, 3);
  const FactoredPolicy other = FactoredPolicy::uniform(1, 2, 3);
  std::vector<Rollout> empty;
  CHECK_THROWS_AS(surrogate_gradient(p, p, p, empty, 0, {0.0, 0.0, Granularity::kSequence}),
                  std::invalid_argument);
  CHECK_THROWS_AS(surrogate_gradient(p, p, p, empty, 0, {0.0, 1.0, Granularity::kSequence}),
                  std::invalid_argument);
  CHECK_THROWS_AS(surrogate_gradient(p, other, p, empty, 0, {0.0, 0.2, Granularity::kSequence}),
                  std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
  // randomized instances spanning beta, reshape, granularity, tabular
  const GradcheckResult res = run_gradcheck(56, 1e-5, 909);
  CHECK(res.instances == 56);
  CHECK(res.max_rel_error <= 1e-4);
}

TEST_CASE("apply gradient ascent") {
  // zero gradient: identical policy
  FactoredPolicy p = FactoredPolicy::uniform(1, 1, 2);
  const std::vector<double> zero(2, 0.0);
  CHECK(apply_gradient_ascent(p, zero, 0.5).logits == p.logits);

  // tabular two-action example: theta = (0,0), centered A = (+1,-1), eta = 0.1
  TabularPolicy t = TabularPolicy::uniform(1, 2);
  const std::vector<double> adv = {1.0, -1.0};
  const auto grad = tabular_surrogate_gradient(t, t, t, 0, adv, {0.0, 0.2, Granularity::kSequence});
  const TabularPolicy updated = apply_gradient_ascent(t, grad, 0.1);
  CHECK(updated.logits[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(updated.logits[1] == doctest::Approx(-0.05).epsilon(1e-12));

  // update then revert restores the original
  FactoredPolicy q = FactoredPolicy::uniform(1, 2, 3);
  RngStream g(66);
  for (double& x : q.logits) x = g.next_normal();
  std::vector<double> dir(q.logits.size());
  for (double& x : dir) x = g.next_normal();
  const FactoredPolicy back =
      apply_gradient_ascent(apply_gradient_ascent(q, dir, 0.3), dir, -0.3);
  for (std::size_t i = 0; i < q.logits.size(); ++i)
    CHECK(std::abs(back.logits[i] - q.logits[i]) <= 1e-12);
}

TEST_CASE("rows sum to one after updates") {
  FactoredPolicy p = FactoredPolicy::uniform(2, 3, 6);
  RngStream g(77);
  for (double& x : p.logits) x = g.next_normal();
  std::vector<double> dir(p.logits.size());
  for (double& x : dir) x = g.next_normal();
  const FactoredPolicy updated = apply_gradient_ascent(p, dir, 0.7);
  for (int q = 0; q < 2; ++q) {
    for (int t = 0; t < 3; ++t) {
      const auto probs = softmax(updated.row(q, t));
      double s = 0.0;
      for (double v : probs) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("policy snapshot round-trips bit-exactly") {
  FactoredPolicy p = FactoredPolicy::uniform(3, 4, 7);
  RngStream g(88);
  for (double& x : p.logits) x = g.next_normal() * 13.7;
  const std::string text = policy_to_text(p);
  const FactoredPolicy q = policy_from_text(text);
  CHECK(q.queries == p.queries);
  CHECK(q.length == p.length);
  CHECK(q.vocab == p.vocab);
  CHECK(q.logits == p.logits);  // bit-exact

  const auto path = std::filesystem::temp_directory_path() / "eclab_policy_roundtrip.txt";
  save_policy(p, path.string());
  CHECK(load_policy(path.string()).logits == p.logits);
  std::filesystem::remove(path);
}

TEST_CASE("policy snapshot rejects malformed input") {
  CHECK_THROWS(policy_from_text("policy v2 1 1 1\n0\n"));
  CHECK_THROWS(policy_from_text("policy v1 1 1 2\n0\n"));        // truncated
  CHECK_THROWS(policy_from_text("policy v1 1 1 1\n0 1\n"));      // trailing data
  CHECK_THROWS(policy_from_text("nonsense"));
  CHECK_THROWS(policy_from_text("policy v1 0 1 1\n"));           // bad dims
}
