#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "eclab/envs.hpp"
#include "eclab/policy.hpp"

namespace eclab::grpo {

// N rollouts for one query with group reward statistics. reward_pop_std is
// the population standard deviation used for advantage standardization;
// r_std_gate is the sum-form spread sqrt(sum_i (r_i - mean)^2) that drives
// the reshape gate.
struct RolloutGroup {
  int query = 0;
  std::vector<Rollout> rollouts;
  double reward_mean = 0.0;
  double reward_pop_std = 0.0;
  double r_std_gate = 0.0;
};

struct TrainConfig {
  int rollouts = 8;           // N, group size
  double temperature = 1.0;   // sampling only; scoring stays at tau = 1
  int iterations = 1;         // optimizer passes against one frozen snapshot
  double kl_beta = 0.04;
  double clip_eps = 0.2;
  double learning_rate = 2.0;  // sized for tabular logit tables
  int steps = 800;
  int queries_per_batch = 0;  // 0 = every query each step
  bool reshape = false;
  double r0 = 10.0;           // |r0| > 1 when reshape is on
  double l0 = 25.0;
  double delta_gate = std::numeric_limits<double>::infinity();
  Granularity granularity = Granularity::kSequence;
  double std_floor = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument naming the offending key
};

// A_i = (r_i - mean) / population std, or all zeros when the spread is at or
// below std_floor. Rejects groups smaller than 2.
std::vector<double> standardize_advantages(std::span<const double> rewards, double std_floor);

// sqrt(sum_i (r_i - mean)^2): the sum-form spread, no 1/N
double reward_std_gate(std::span<const double> rewards);

// sum over positions of KL(pi(.|q,t) || ref(.|q,t))
double kl_to_reference(const FactoredPolicy& policy, const FactoredPolicy& reference, int query);

// Sample N rollouts under the frozen snapshot, score them, and standardize
// advantages. Each rollout draws from the stream derived from
// (seed, kTagRollout, step, query, rollout index).
RolloutGroup collect_group(const FactoredPolicy& sampling_policy, const envs::Environment& env,
                           int query, const TrainConfig& cfg, int step);

// queries making up the batch at `step` (round-robin when queries_per_batch
// is smaller than the query set)
std::vector<int> batch_queries(int num_queries, int queries_per_batch, int step);

// OpenMP-parallel collection of every group in the batch; rollouts land in
// fixed slots so the result is independent of the schedule.
std::vector<RolloutGroup> collect_step_groups(const FactoredPolicy& sampling_policy,
                                              const envs::Environment& env,
                                              std::span<const int> queries,
                                              const TrainConfig& cfg, int step);

struct StepResult {
  FactoredPolicy policy;
  std::vector<RolloutGroup> groups;
};

// One training step: collect groups under the frozen snapshot, standardize,
// optionally reshape, then `iterations` gradient-ascent updates of
//   (1/B) sum_batch [ (1/N) sum_i min(C1, C2) - beta * KL ].
StepResult train_step(const FactoredPolicy& policy, const FactoredPolicy& reference,
                      const envs::Environment& env, const TrainConfig& cfg, int step);

}  // namespace eclab::grpo
