#include "eclab/entropy_lab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eclab/numerics.hpp"

namespace eclab::entropy {

double state_entropy(const TabularPolicy& policy, int state) {
  return entropy_from_logits(policy.row(state));
}

namespace {

void check_centered(std::span<const double> probs, std::span<const double> advantages) {
  double dot = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) dot += probs[a] * advantages[a];
  if (std::abs(dot) > 1e-6)
    throw std::invalid_argument(
        "advantages must be centered under the policy (|sum pi*A| <= 1e-6)");
}

}  // namespace

double predict_entropy_change(const TabularPolicy& policy, int state,
                              std::span<const double> advantages, double eta) {
  if (static_cast<int>(advantages.size()) != policy.actions)
    throw std::invalid_argument("predict_entropy_change: advantage size mismatch");
  const std::vector<double> lp = log_softmax(policy.row(state));
  std::vector<double> p(lp.size());
  for (std::size_t a = 0; a < lp.size(); ++a) p[a] = std::exp(lp[a]);
  check_centered(p, advantages);

  // Cov under a ~ pi: E[xy] - E[x]E[y] with x = log pi, y = pi * A
  double ex = 0.0, ey = 0.0, exy = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    const double x = lp[a];
    const double y = p[a] * advantages[a];
    ex += p[a] * x;
    ey += p[a] * y;
    exy += p[a] * x * y;
  }
  return -eta * (exy - ex * ey);
}

TabularPolicy vpg_logit_update(TabularPolicy policy, int state,
                               std::span<const double> advantages, double eta) {
  if (static_cast<int>(advantages.size()) != policy.actions)
    throw std::invalid_argument("vpg_logit_update: advantage size mismatch");
  const std::vector<double> p = softmax(policy.row(state));
  check_centered(p, advantages);
  auto row = policy.row(state);
  for (int a = 0; a < policy.actions; ++a) row[a] += eta * p[a] * advantages[a];
  return policy;
}

EntropyForecast forecast_instance(const TabularPolicy& policy, int state,
                                  std::span<const double> advantages, double eta) {
  EntropyForecast f;
  f.state = state;
  f.eta = eta;
  f.entropy_before = state_entropy(policy, state);
  f.predicted_dh = predict_entropy_change(policy, state, advantages, eta);
  const TabularPolicy updated = vpg_logit_update(policy, state, advantages, eta);
  f.entropy_after = state_entropy(updated, state);
  f.abs_error = std::abs((f.entropy_after - f.entropy_before) - f.predicted_dh);
  return f;
}

namespace {

struct TheoremInstance {
  TabularPolicy policy;
  std::vector<double> advantages;
};

TheoremInstance make_theorem_instance(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, {kTagTheorem, static_cast<std::uint64_t>(index)});
  const int actions = rng.next_int(2, 10);
  TheoremInstance inst;
  inst.policy = TabularPolicy::uniform(1, actions);
  auto row = inst.policy.row(0);
  for (int a = 0; a < actions; ++a) row[a] = rng.next_normal();
  inst.advantages.resize(actions);
  for (int a = 0; a < actions; ++a) inst.advantages[a] = 2.0 * rng.next_double() - 1.0;
  const std::vector<double> p = softmax(row);
  double dot = 0.0;
  for (int a = 0; a < actions; ++a) dot += p[a] * inst.advantages[a];
  for (int a = 0; a < actions; ++a) inst.advantages[a] -= dot;
  return inst;
}

}  // namespace

TheoremStats verify_theorem(int instances, double eta, std::uint64_t seed) {
  if (instances < 10) throw std::invalid_argument("verify_theorem: need at least 10 instances");
  std::vector<double> err_full(instances), err_half(instances);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < instances; ++i) {
    const TheoremInstance inst = make_theorem_instance(seed, i);
    err_full[i] = forecast_instance(inst.policy, 0, inst.advantages, eta).abs_error;
    err_half[i] = forecast_instance(inst.policy, 0, inst.advantages, eta / 2.0).abs_error;
  }
  TheoremStats stats;
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

DegeneracyReport degeneracy_report(const envs::Environment& env, const FactoredPolicy& policy,
                                   int query, double delta_adv, long long max_candidates,
                                   bool allow_sampling, std::uint64_t seed) {
  if (!(delta_adv > 0.0)) throw std::invalid_argument("degeneracy_report: delta_adv must be > 0");
  const long long total = env.candidate_count();
  std::vector<long long> indices;
  if (total <= max_candidates) {
    indices.resize(total);
    for (long long i = 0; i < total; ++i) indices[i] = i;
  } else if (allow_sampling) {
    RngStream rng = derive_stream(seed, {kTagDegeneracySample, static_cast<std::uint64_t>(query)});
    indices.resize(max_candidates);
    for (long long i = 0; i < max_candidates; ++i)
      indices[i] = static_cast<long long>(rng.next_below(static_cast<std::uint64_t>(total)));
  } else {
    throw std::invalid_argument(
        "degeneracy_report: candidate space exceeds the enumeration cap; "
        "enable sampling to estimate");
  }

  const long long n = static_cast<long long>(indices.size());
  std::vector<double> value(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) value[i] = env.candidate_value(query, indices[i]);

  double v_max = value[0], v_sum = 0.0;
  for (long long i = 0; i < n; ++i) {
    v_max = std::max(v_max, value[i]);
    v_sum += value[i];
  }
  const double v_mean = v_sum / static_cast<double>(n);

  DegeneracyReport report;
  report.delta_adv = delta_adv;
  report.candidates = n;
  report.max_advantage = v_max - v_mean;
  double adv_sum = 0.0, prob_sum = 0.0;
  for (long long i = 0; i < n; ++i) {
    if (v_max - value[i] <= delta_adv) {
      ++report.near_optimal;
      adv_sum += value[i] - v_mean;
      prob_sum += std::exp(env.candidate_logprob(policy, query, indices[i]));
    }
  }
  report.mean_advantage = adv_sum / static_cast<double>(report.near_optimal);
  report.mean_probability = prob_sum / static_cast<double>(report.near_optimal);
  report.inv_m = 1.0 / static_cast<double>(report.near_optimal);
  return report;
}

HighEntropyReport high_entropy_token_report(const FactoredPolicy& policy, double factor,
                                            std::span<const TokenClass> position_classes) {
  if (!(factor > 0.0))
    throw std::invalid_argument("high_entropy_token_report: factor must be > 0");
  if (static_cast<int>(position_classes.size()) != policy.length)
    throw std::invalid_argument("high_entropy_token_report: position class size mismatch");

  HighEntropyReport report;
  report.factor = factor;
  std::vector<double> h(static_cast<std::size_t>(policy.rows()));
  for (int q = 0; q < policy.queries; ++q)
    for (int t = 0; t < policy.length; ++t)
      h[static_cast<std::size_t>(q) * policy.length + t] = token_entropy(policy, q, t);
  report.mean_entropy = mean(h);

  report.flags.assign(h.size(), 0);
  const double threshold = factor * report.mean_entropy;
  for (int q = 0; q < policy.queries; ++q) {
    for (int t = 0; t < policy.length; ++t) {
      const std::size_t idx = static_cast<std::size_t>(q) * policy.length + t;
      if (h[idx] >= threshold && h[idx] > 0.0) {
        report.flags[idx] = 1;
        ++report.flagged_total;
        switch (position_classes[t]) {
          case TokenClass::kStructural: ++report.flagged_structural; break;
          case TokenClass::kNoun: ++report.flagged_noun; break;
          case TokenClass::kNumeric: ++report.flagged_numeric; break;
        }
      }
    }
  }
  return report;
}

std::optional<TokenClassProbability> token_class_probability(std::span<const Rollout> rollouts,
                                                             const Vocab& vocab) {
  double num_sum = 0.0, other_sum = 0.0;
  long long num_n = 0, other_n = 0;
  for (const Rollout& r : rollouts) {
    if (!(r.advantage > 0.0)) continue;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const double p = std::exp(r.logp_old[t]);
      if (vocab.is_numeric(r.tokens[t])) {
        num_sum += p;
        ++num_n;
      } else {
        other_sum += p;
        ++other_n;
      }
    }
  }
  if (num_n == 0 && other_n == 0) return std::nullopt;
  TokenClassProbability out;
  out.numeric_mean = num_n ? num_sum / static_cast<double>(num_n) : 0.0;
  out.other_mean = other_n ? other_sum / static_cast<double>(other_n) : 0.0;
  return out;
}

}  // namespace eclab::entropy
