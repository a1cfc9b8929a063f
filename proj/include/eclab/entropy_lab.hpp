#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eclab/envs.hpp"
#include "eclab/grpo.hpp"
#include "eclab/policy.hpp"

namespace eclab::entropy {

// One tabular instance of the entropy-change prediction: exact entropies
// around a VPG update versus the first-order covariance forecast.
struct EntropyForecast {
  int state = 0;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  double predicted_dh = 0.0;
  double abs_error = 0.0;
  double eta = 0.0;
};

double state_entropy(const TabularPolicy& policy, int state);

// -eta * Cov_{a~pi}(log pi(a|s), pi(a|s) * A(s,a)), covariance weighted by
// pi(.|s). Advantages must be centered under pi (|sum pi*A| <= 1e-6).
double predict_entropy_change(const TabularPolicy& policy, int state,
                              std::span<const double> advantages, double eta);

// theta[s][a] += eta * pi(a|s) * A(s,a); requires centered advantages
TabularPolicy vpg_logit_update(TabularPolicy policy, int state,
                               std::span<const double> advantages, double eta);

// run the forecast for one instance at learning rate eta
EntropyForecast forecast_instance(const TabularPolicy& policy, int state,
                                  std::span<const double> advantages, double eta);

struct TheoremStats {
  int instances = 0;
  double eta = 0.0;
  double mean_error_full = 0.0;
  double max_error_full = 0.0;
  double mean_error_half = 0.0;
  double max_error_half = 0.0;
  double decay_ratio = 0.0;  // mean_error_full / mean_error_half; ~4 for an O(eta^2) remainder
};

// Random instances: 2..10 actions, standard-normal logits, uniform advantages
// centered under pi. Each instance is evaluated at eta and eta/2. Rejects
// fewer than 10 instances.
TheoremStats verify_theorem(int instances, double eta, std::uint64_t seed);

struct DegeneracyReport {
  double delta_adv = 0.0;
  long long candidates = 0;        // enumerated answer combinations
  long long near_optimal = 0;      // M
  double max_advantage = 0.0;      // A_max (rewards centered over the candidate set)
  double mean_advantage = 0.0;     // mean advantage of the near-optimal set
  double mean_probability = 0.0;   // mean policy probability of the set's answers
  double inv_m = 0.0;              // the 1/M bound, reported alongside
};

// Enumerate the environment's candidate answers, center their (deterministic)
// rewards, and measure the near-optimal set {a : |A - A_max| <= delta_adv}.
// Enumeration beyond max_candidates is rejected unless allow_sampling is set,
// in which case max_candidates candidates are drawn uniformly instead (the
// report is then an estimate).
DegeneracyReport degeneracy_report(const envs::Environment& env, const FactoredPolicy& policy,
                                   int query, double delta_adv,
                                   long long max_candidates = 1000000,
                                   bool allow_sampling = false, std::uint64_t seed = 0);

struct HighEntropyReport {
  double mean_entropy = 0.0;
  double factor = 0.0;
  std::vector<std::uint8_t> flags;  // one per (query, position), row-major
  long long flagged_structural = 0;
  long long flagged_noun = 0;
  long long flagged_numeric = 0;
  long long flagged_total = 0;
};

// Flag positions whose token entropy reaches factor * mean entropy; counts
// are grouped by the template slot class.
HighEntropyReport high_entropy_token_report(const FactoredPolicy& policy, double factor,
                                            std::span<const TokenClass> position_classes);

struct TokenClassProbability {
  double numeric_mean = 0.0;
  double other_mean = 0.0;
};

// Mean token probability (exp of the stored log-prob) of numeric versus
// non-numeric tokens across positive-advantage rollouts; empty when no
// rollout has a positive advantage.
std::optional<TokenClassProbability> token_class_probability(std::span<const Rollout> rollouts,
                                                             const Vocab& vocab);

}  // namespace eclab::entropy
