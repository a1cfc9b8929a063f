#pragma once

// Serial reference implementations of the OpenMP kernels. Plain loops over
// the same per-item functions: because every rollout/instance/candidate owns
// a counter-derived RNG stream and reductions run in fixed order, the
// parallel kernels must reproduce these results bit for bit. Tests assert
// exact equality; tools/bench compares wall time.

#include "eclab/entropy_lab.hpp"
#include "eclab/grpo.hpp"

namespace eclab::serial_ref {

std::vector<grpo::RolloutGroup> collect_step_groups(const FactoredPolicy& sampling_policy,
                                                    const envs::Environment& env,
                                                    std::span<const int> queries,
                                                    const grpo::TrainConfig& cfg, int step);

grpo::StepResult train_step(const FactoredPolicy& policy, const FactoredPolicy& reference,
                            const envs::Environment& env, const grpo::TrainConfig& cfg,
                            int step);

entropy::TheoremStats verify_theorem(int instances, double eta, std::uint64_t seed);

entropy::DegeneracyReport degeneracy_report(const envs::Environment& env,
                                            const FactoredPolicy& policy, int query,
                                            double delta_adv);

}  // namespace eclab::serial_ref
