#include "eclab/grpo.hpp"

#include <cmath>
#include <stdexcept>

#include "eclab/reshape.hpp"
#include "eclab/numerics.hpp"

namespace eclab::grpo {

void TrainConfig::validate() const {
  if (rollouts < 2) throw std::invalid_argument("train.rollouts: must be >= 2");
  if (!(temperature > 0.0)) throw std::invalid_argument("train.temperature: must be > 0");
  if (iterations < 1) throw std::invalid_argument("train.iterations: must be >= 1");
  if (kl_beta < 0.0) throw std::invalid_argument("train.kl_beta: must be >= 0");
  if (!(clip_eps > 0.0 && clip_eps < 1.0))
    throw std::invalid_argument("train.clip_eps: must lie in (0,1)");
  if (learning_rate < 0.0) throw std::invalid_argument("train.learning_rate: must be >= 0");
  if (steps < 0) throw std::invalid_argument("train.steps: must be >= 0");
  if (queries_per_batch < 0)
    throw std::invalid_argument("train.queries_per_batch: must be >= 0");
  if (reshape && !(std::abs(r0) > 1.0))
    throw std::invalid_argument("train.r0: |r0| must be > 1");
  if (!(l0 > 1.0)) throw std::invalid_argument("train.l0: must be > 1");
  if (!(delta_gate > 0.0)) throw std::invalid_argument("train.delta_gate: must be > 0");
  if (std_floor < 0.0) throw std::invalid_argument("train.std_floor: must be >= 0");
}

std::vector<double> standardize_advantages(std::span<const double> rewards, double std_floor) {
  if (rewards.size() < 2)
    throw std::invalid_argument("standardize_advantages: need at least 2 rewards");
  const double m = mean(rewards);
  const double sd = population_std(rewards);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd > std_floor) {
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - m) / sd;
  }
  return adv;
}

double reward_std_gate(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("reward_std_gate: need at least 2 rewards");
  const double m = mean(rewards);
  double s = 0.0;
  for (double r : rewards) s += (r - m) * (r - m);
  return std::sqrt(s);
}

double kl_to_reference(const FactoredPolicy& policy, const FactoredPolicy& reference,
                       int query) {
  if (!policy.same_shape(reference))
    throw std::invalid_argument("kl_to_reference: shape mismatch");
  double kl = 0.0;
  for (int t = 0; t < policy.length; ++t) {
    const std::vector<double> lp = log_softmax(policy.row(query, t));
    const std::vector<double> lr = log_softmax(reference.row(query, t));
    for (int v = 0; v < policy.vocab; ++v) kl += std::exp(lp[v]) * (lp[v] - lr[v]);
  }
  if (!std::isfinite(kl) || kl < 0.0) {
    if (kl > -1e-12) return 0.0;  // tiny negative from cancellation
    throw std::runtime_error("kl_to_reference: divergence is not finite");
  }
  return kl;
}

namespace {

void finalize_group(RolloutGroup& group, const TrainConfig& cfg) {
  std::vector<double> rewards(group.rollouts.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) rewards[i] = group.rollouts[i].reward.total;
  group.reward_mean = mean(rewards);
  group.reward_pop_std = population_std(rewards);
  group.r_std_gate = reward_std_gate(rewards);
  const std::vector<double> adv = standardize_advantages(rewards, cfg.std_floor);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    group.rollouts[i].advantage = adv[i];
    group.rollouts[i].shaped_adv.assign(group.rollouts[i].tokens.size(), adv[i]);
  }
}

Rollout sample_and_score(const FactoredPolicy& sampling_policy, const envs::Environment& env,
                         int query, const TrainConfig& cfg, int step, int index) {
  RngStream rng = derive_stream(
      cfg.seed, {kTagRollout, static_cast<std::uint64_t>(step),
                 static_cast<std::uint64_t>(query), static_cast<std::uint64_t>(index)});
  Rollout r = sample_rollout(sampling_policy, query, cfg.temperature, rng);
  r.reward = env.reward(query, r.tokens, rng);
  return r;
}

}  // namespace

RolloutGroup collect_group(const FactoredPolicy& sampling_policy, const envs::Environment& env,
                           int query, const TrainConfig& cfg, int step) {
  cfg.validate();
  RolloutGroup group;
  group.query = query;
  group.rollouts.resize(cfg.rollouts);
  for (int i = 0; i < cfg.rollouts; ++i)
    group.rollouts[i] = sample_and_score(sampling_policy, env, query, cfg, step, i);
  finalize_group(group, cfg);
  return group;
}

std::vector<int> batch_queries(int num_queries, int queries_per_batch, int step) {
  if (queries_per_batch <= 0 || queries_per_batch >= num_queries) {
    std::vector<int> all(num_queries);
    for (int q = 0; q < num_queries; ++q) all[q] = q;
    return all;
  }
  std::vector<int> batch(queries_per_batch);
  const long long start = static_cast<long long>(step) * queries_per_batch;
  for (int i = 0; i < queries_per_batch; ++i)
    batch[i] = static_cast<int>((start + i) % num_queries);
  return batch;
}

std::vector<RolloutGroup> collect_step_groups(const FactoredPolicy& sampling_policy,
                                              const envs::Environment& env,
                                              std::span<const int> queries,
                                              const TrainConfig& cfg, int step) {
  const int nb = static_cast<int>(queries.size());
  std::vector<RolloutGroup> groups(nb);
  for (int b = 0; b < nb; ++b) {
    groups[b].query = queries[b];
    groups[b].rollouts.resize(cfg.rollouts);
  }
  // every (group, rollout) pair owns a stream and a slot
  const int total = nb * cfg.rollouts;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < total; ++k) {
    const int b = k / cfg.rollouts;
    const int i = k % cfg.rollouts;
    groups[b].rollouts[i] = sample_and_score(sampling_policy, env, queries[b], cfg, step, i);
  }
  for (RolloutGroup& g : groups) finalize_group(g, cfg);
  return groups;
}

StepResult train_step(const FactoredPolicy& policy, const FactoredPolicy& reference,
                      const envs::Environment& env, const TrainConfig& cfg, int step) {
  cfg.validate();
  if (!policy.same_shape(reference)) throw std::invalid_argument("train_step: shape mismatch");

  const FactoredPolicy old_snap = policy;  // frozen sampling snapshot for this step
  const std::vector<int> batch =
      batch_queries(env.num_queries(), cfg.queries_per_batch, step);
  std::vector<RolloutGroup> groups = collect_step_groups(old_snap, env, batch, cfg, step);

  if (cfg.reshape) {
    const reshape::ReshapeParams params{cfg.r0, cfg.l0, cfg.delta_gate, cfg.granularity};
    for (RolloutGroup& g : groups) reshape::reshape_group(g, params);
  }

  const SurrogateConfig scfg{cfg.kl_beta, cfg.clip_eps, cfg.granularity};
  FactoredPolicy cur = policy;
  const int nb = static_cast<int>(groups.size());
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<std::vector<double>> per_group(nb);
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < nb; ++b) {
      for (Rollout& r : groups[b].rollouts) refresh_current_logprobs(cur, r);
      per_group[b] =
          surrogate_gradient(cur, old_snap, reference, groups[b].rollouts, groups[b].query, scfg);
    }
    // serial reduce in batch order, then a single update commit
    std::vector<double> grad(cur.logits.size(), 0.0);
    for (int b = 0; b < nb; ++b)
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += per_group[b][i] / nb;
    cur = apply_gradient_ascent(std::move(cur), grad, cfg.learning_rate);
  }
  return StepResult{std::move(cur), std::move(groups)};
}

}  // namespace eclab::grpo
