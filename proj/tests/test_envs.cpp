#include <doctest.h>

#include <cmath>
#include <set>

#include "eclab/envs.hpp"
#include "eclab/numerics.hpp"
#include "test_helpers.hpp"

using namespace eclab;

TEST_CASE("vocabulary partition covers every token exactly once") {
  const Vocab v = Vocab::with_template(16, 8);
  CHECK(v.size() == 6 + 8 + 17);
  int structural = 0, noun = 0, numeric = 0;
  for (Token t = 0; t < v.size(); ++t) {
    const bool s = v.is_structural(t), n = v.is_noun(t), m = v.is_numeric(t);
    CHECK((int(s) + int(n) + int(m)) == 1);
    structural += s;
    noun += n;
    numeric += m;
  }
  CHECK(structural == 6);
  CHECK(noun == 8);
  CHECK(numeric == 17);
  CHECK(v.numeric_value(v.numeric(13)) == 13);

  const Vocab b = Vocab::numeric_only(41);
  CHECK(b.size() == 41);
  for (Token t = 0; t < b.size(); ++t) CHECK(b.is_numeric(t));
}

TEST_CASE("grounding reward: clean and malformed sequences") {
  envs::GroundingConfig gc;
  gc.num_queries = 2;
  gc.jitter = 0;
  const envs::GroundingEnv env(gc);
  const auto& query = env.config().queries[0];

  // perfect prediction with correct format scores 2.0
  const auto seq = envs::template_sequence(env.vocab(), query.noun, query.gt);
  RngStream rng(1);
  const auto r = env.reward(0, seq, rng);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.format == 1.0);
  CHECK(r.total == doctest::Approx(2.0));

  // malformed sequence: both components zero
  auto bad = seq;
  bad.pop_back();
  RngStream rng2(1);
  const auto rb = env.reward(0, bad, rng2);
  CHECK(rb.accuracy == 0.0);
  CHECK(rb.format == 0.0);
  CHECK(rb.total == 0.0);

  // with jitter disabled the reward is deterministic
  RngStream ra(11), rbb(222);
  CHECK(env.reward(0, seq, ra).total == env.reward(0, seq, rbb).total);
}

TEST_CASE("grounding reward under jitter matches the exhaustive jitter mean") {
  envs::GroundingConfig gc;
  gc.num_queries = 1;
  gc.jitter = 1;
  const envs::GroundingEnv env(gc);
  const auto& query = env.config().queries[0];
  const auto seq = envs::template_sequence(env.vocab(), query.noun, query.gt);

  // oracle: mean IoU of the clean box against every valid jitter
  double expect = 0.0;
  const auto jitters = env.valid_jitters(0);
  for (const auto& j : jitters) expect += geom::iou(query.gt, j);
  expect /= static_cast<double>(jitters.size());

  const int n = 20000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream rng = derive_stream(3, {kTagRollout, static_cast<std::uint64_t>(i)});
    const double acc = env.reward(0, seq, rng).accuracy;
    CHECK(acc > 0.0);
    CHECK(acc <= 1.0);
    s += acc;
    s2 += acc * acc;
  }
  const double mc_mean = s / n;
  const double mc_se = std::sqrt((s2 / n - mc_mean * mc_mean) / n);
  CHECK(std::abs(mc_mean - expect) <= 4.0 * mc_se + 1e-9);
}

TEST_CASE("jittered ground truth always satisfies the box invariants") {
  envs::GroundingConfig gc;
  gc.num_queries = 4;
  gc.jitter = 3;
  const envs::GroundingEnv env(gc);
  for (int q = 0; q < env.num_queries(); ++q) {
    for (int i = 0; i < 2000; ++i) {
      RngStream rng = derive_stream(17, {static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(i)});
      CHECK(geom::is_valid(env.draw_jittered_gt(q, rng), gc.grid));
    }
    for (const auto& j : env.valid_jitters(q)) CHECK(geom::is_valid(j, gc.grid));
  }
}

TEST_CASE("reasoning reward is binary exact-sequence match") {
  envs::ReasoningConfig rc;
  rc.num_queries = 2;
  const envs::ReasoningEnv env(rc);
  RngStream rng(1);

  const auto target = env.target(0);
  const std::vector<Token> exact(target.begin(), target.end());
  CHECK(env.reward(0, exact, rng).total == 1.0);
  CHECK(env.reward(0, exact, rng).format == 0.0);  // single-component regime

  auto off = exact;
  off[5] = env.vocab().numeric(env.vocab().numeric_value(off[5]) == 0 ? 1 : 0);
  CHECK(env.reward(0, off, rng).total == 0.0);

  // the regime takes exactly two values
  std::set<double> seen;
  for (int i = 0; i < 500; ++i) {
    RngStream r = derive_stream(9, {static_cast<std::uint64_t>(i)});
    std::vector<Token> seq(env.seq_length());
    for (Token& t : seq) t = r.next_int(0, env.vocab().size() - 1);
    seen.insert(env.reward(0, seq, r).total);
  }
  for (double v : seen) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("reasoning env rejects an empty query set") {
  envs::ReasoningConfig rc;
  rc.num_queries = 0;
  CHECK_THROWS_AS(envs::ReasoningEnv{rc}, std::invalid_argument);
}

TEST_CASE("numeric bandit env") {
  envs::BanditConfig bc;  // actions 0..40, target 20, lambda 0.05
  const envs::NumericBanditEnv env(bc);
  CHECK(env.action_reward(20) == doctest::Approx(1.0));
  CHECK(env.action_reward(0) == doctest::Approx(0.0));
  CHECK(env.action_reward(30) == doctest::Approx(0.5));
  CHECK_THROWS_AS(env.action_reward(41), std::out_of_range);
  CHECK_THROWS_AS(env.action_reward(-1), std::out_of_range);

  RngStream rng(3);
  const std::vector<Token> toks = {env.vocab().numeric(10)};
  CHECK(env.reward(0, toks, rng).total == doctest::Approx(0.5));

  envs::BanditConfig bad = bc;
  bad.target = 99;
  CHECK_THROWS_AS(envs::NumericBanditEnv{bad}, std::invalid_argument);
}

TEST_CASE("greedy evaluation") {
  envs::GroundingConfig gc;
  gc.num_queries = 3;
  const envs::GroundingEnv env(gc);

  // the anchored starting policy decodes to the clean ground truth
  const FactoredPolicy anchored = env.initial_policy();
  const auto res = env.evaluate(anchored, envs::EvalMode::kGreedy);
  CHECK(res.mean_score == doctest::Approx(1.0));
  CHECK(res.exact_match_rate == doctest::Approx(1.0));

  // evaluation of a deterministic policy is seed independent by construction
  const auto res2 = env.evaluate(anchored, envs::EvalMode::kGreedy);
  CHECK(res.mean_score == res2.mean_score);

  // reasoning twin: greedy match rate 1 on the anchored policy
  envs::ReasoningConfig rc;
  rc.num_queries = 3;
  const envs::ReasoningEnv renv(rc);
  const auto rres = renv.evaluate(renv.initial_policy(), envs::EvalMode::kGreedy);
  CHECK(rres.mean_score == doctest::Approx(1.0));
}

TEST_CASE("expected evaluation of a uniform policy equals the enumeration oracle") {
  envs::GroundingConfig gc;
  gc.num_queries = 2;
  const envs::GroundingEnv env(gc);
  const FactoredPolicy uniform =
      FactoredPolicy::uniform(env.num_queries(), env.seq_length(), env.vocab().size());

  // oracle: a uniform answer-slot guess scores the average clean IoU over all
  // candidate tuples
  double expect = 0.0;
  const long long n = env.candidate_count();
  for (int q = 0; q < env.num_queries(); ++q) {
    double s = 0.0;
    for (long long i = 0; i < n; ++i) s += env.candidate_clean_value(q, i);
    expect += s / static_cast<double>(n);
  }
  expect /= env.num_queries();

  const auto res = env.evaluate(uniform, envs::EvalMode::kExpected);
  CHECK(res.mean_score == doctest::Approx(expect).epsilon(1e-9));

  // oracle-policy sanity: the anchored policy concentrates near the truth, so
  // its expected IoU is far above the uniform guess
  const auto anchored = env.evaluate(env.initial_policy(), envs::EvalMode::kExpected);
  CHECK(anchored.mean_score > 5.0 * res.mean_score);
}

TEST_CASE("candidate values and probabilities are consistent") {
  envs::GroundingConfig gc;
  gc.num_queries = 1;
  const envs::GroundingEnv env(gc);
  const FactoredPolicy p = env.initial_policy();
  const long long n = env.candidate_count();
  CHECK(n == 17LL * 17 * 17 * 17);

  // candidate tuples partition the event "all four answer slots emit numerics"
  double expect_mass = 1.0;
  for (int k = 0; k < 4; ++k) {
    const auto probs = softmax(p.row(0, envs::GroundingEnv::kAnswerSlot0 + k));
    double slot = 0.0;
    for (int v = 0; v < env.vocab().numeric_count; ++v) slot += probs[env.vocab().numeric(v)];
    expect_mass *= slot;
  }
  double total_prob = 0.0;
  for (long long i = 0; i < n; ++i) total_prob += std::exp(env.candidate_logprob(p, 0, i));
  CHECK(total_prob == doctest::Approx(expect_mass).epsilon(1e-9));
  CHECK(total_prob <= 1.0);
  CHECK(total_prob > 0.9);  // the anchored policy concentrates on numerics there

  // the clean ground-truth tuple is the unique candidate with clean value 1
  long long perfect = 0;
  for (long long i = 0; i < n; ++i)
    if (env.candidate_clean_value(0, i) >= 1.0 - 1e-12) ++perfect;
  CHECK(perfect == 1);
}

TEST_CASE("default queries are valid and sized for wide near-optimal sets") {
  for (int grid : {12, 16, 24}) {
    const auto queries = envs::default_queries(grid, 8, 8);
    CHECK(queries.size() == 8);
    for (const auto& q : queries) {
      CHECK(geom::is_valid(q.gt, grid));
      CHECK(geom::area(q.gt) >= grid * grid / 5);
    }
  }
}
