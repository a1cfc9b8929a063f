#include "eclab/serial_ref.hpp"

#include <algorithm>
#include <cmath>

#include "eclab/reshape.hpp"
#include "eclab/numerics.hpp"

namespace eclab::serial_ref {

std::vector<grpo::RolloutGroup> collect_step_groups(const FactoredPolicy& sampling_policy,
                                                    const envs::Environment& env,
                                                    std::span<const int> queries,
                                                    const grpo::TrainConfig& cfg, int step) {
  std::vector<grpo::RolloutGroup> groups;
  groups.reserve(queries.size());
  for (int q : queries) groups.push_back(grpo::collect_group(sampling_policy, env, q, cfg, step));
  return groups;
}

grpo::StepResult train_step(const FactoredPolicy& policy, const FactoredPolicy& reference,
                            const envs::Environment& env, const grpo::TrainConfig& cfg,
                            int step) {
  cfg.validate();
  const FactoredPolicy old_snap = policy;
  const std::vector<int> batch =
      grpo::batch_queries(env.num_queries(), cfg.queries_per_batch, step);
  std::vector<grpo::RolloutGroup> groups =
      serial_ref::collect_step_groups(old_snap, env, batch, cfg, step);

  if (cfg.reshape) {
    const reshape::ReshapeParams params{cfg.r0, cfg.l0, cfg.delta_gate, cfg.granularity};
    for (grpo::RolloutGroup& g : groups) reshape::reshape_group(g, params);
  }

  const SurrogateConfig scfg{cfg.kl_beta, cfg.clip_eps, cfg.granularity};
  FactoredPolicy cur = policy;
  const int nb = static_cast<int>(groups.size());
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<double> grad(cur.logits.size(), 0.0);
    for (int b = 0; b < nb; ++b) {
      for (Rollout& r : groups[b].rollouts) refresh_current_logprobs(cur, r);
      const std::vector<double> g =
          surrogate_gradient(cur, old_snap, reference, groups[b].rollouts, groups[b].query, scfg);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i] / nb;
    }
    cur = apply_gradient_ascent(std::move(cur), grad, cfg.learning_rate);
  }
  return grpo::StepResult{std::move(cur), std::move(groups)};
}

entropy::TheoremStats verify_theorem(int instances, double eta, std::uint64_t seed) {
  if (instances < 10) throw std::invalid_argument("verify_theorem: need at least 10 instances");
  std::vector<double> err_full(instances), err_half(instances);
  for (int i = 0; i < instances; ++i) {
    // mirror the instance generator: stream (seed, kTagTheorem, i)
    RngStream rng = derive_stream(seed, {kTagTheorem, static_cast<std::uint64_t>(i)});
    const int actions = rng.next_int(2, 10);
    TabularPolicy policy = TabularPolicy::uniform(1, actions);
    auto row = policy.row(0);
    for (int a = 0; a < actions; ++a) row[a] = rng.next_normal();
    std::vector<double> adv(actions);
    for (int a = 0; a < actions; ++a) adv[a] = 2.0 * rng.next_double() - 1.0;
    const std::vector<double> p = softmax(row);
    double dot = 0.0;
    for (int a = 0; a < actions; ++a) dot += p[a] * adv[a];
    for (int a = 0; a < actions; ++a) adv[a] -= dot;

    err_full[i] = entropy::forecast_instance(policy, 0, adv, eta).abs_error;
    err_half[i] = entropy::forecast_instance(policy, 0, adv, eta / 2.0).abs_error;
  }
  entropy::TheoremStats stats;
  stats.instances = instances;
  stats.eta = eta;
  stats.mean_error_full = mean(err_full);
  stats.max_error_full = *std::max_element(err_full.begin(), err_full.end());
  stats.mean_error_half = mean(err_half);
  stats.max_error_half = *std::max_element(err_half.begin(), err_half.end());
  stats.decay_ratio =
      stats.mean_error_half > 0.0 ? stats.mean_error_full / stats.mean_error_half : 0.0;
  return stats;
}

entropy::DegeneracyReport degeneracy_report(const envs::Environment& env,
                                            const FactoredPolicy& policy, int query,
                                            double delta_adv) {
  const long long n = env.candidate_count();
  std::vector<double> value(n);
  for (long long i = 0; i < n; ++i) value[i] = env.candidate_value(query, i);

  double v_max = value[0], v_sum = 0.0;
  for (long long i = 0; i < n; ++i) {
    v_max = std::max(v_max, value[i]);
    v_sum += value[i];
  }
  const double v_mean = v_sum / static_cast<double>(n);

  entropy::DegeneracyReport report;
  report.delta_adv = delta_adv;
  report.candidates = n;
  report.max_advantage = v_max - v_mean;
  double adv_sum = 0.0, prob_sum = 0.0;
  for (long long i = 0; i < n; ++i) {
    if (v_max - value[i] <= delta_adv) {
      ++report.near_optimal;
      adv_sum += value[i] - v_mean;
      prob_sum += std::exp(env.candidate_logprob(policy, query, i));
    }
  }
  report.mean_advantage = adv_sum / static_cast<double>(report.near_optimal);
  report.mean_probability = prob_sum / static_cast<double>(report.near_optimal);
  report.inv_m = 1.0 / static_cast<double>(report.near_optimal);
  return report;
}

}  // namespace eclab::serial_ref
