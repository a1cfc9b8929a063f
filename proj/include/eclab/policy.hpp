#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eclab/rewards.hpp"
#include "eclab/rng.hpp"
#include "eclab/tokens.hpp"

namespace eclab {

// Position-factored softmax policy: independent logits theta[q][t][v] per
// query and position. Sampling may use a temperature; scoring (stored
// log-probabilities, entropies, gradients) is always at tau = 1.
struct FactoredPolicy {
  int queries = 0;
  int length = 0;
  int vocab = 0;
  std::vector<double> logits;  // [query][position][vocab], row-major

  static FactoredPolicy uniform(int queries, int length, int vocab);

  int rows() const { return queries * length; }

  std::span<double> row(int q, int t) {
    return std::span<double>(logits).subspan(
        static_cast<std::size_t>(q * length + t) * vocab, vocab);
  }
  std::span<const double> row(int q, int t) const {
    return std::span<const double>(logits).subspan(
        static_cast<std::size_t>(q * length + t) * vocab, vocab);
  }

  bool same_shape(const FactoredPolicy& o) const {
    return queries == o.queries && length == o.length && vocab == o.vocab;
  }

  void check_finite() const;  // throws std::invalid_argument on NaN/inf
};

// Single-step softmax policy over states x actions; the object of the
// entropy-change analysis.
struct TabularPolicy {
  int states = 0;
  int actions = 0;
  std::vector<double> logits;

  static TabularPolicy uniform(int states, int actions);

  std::span<double> row(int s) {
    return std::span<double>(logits).subspan(static_cast<std::size_t>(s) * actions, actions);
  }
  std::span<const double> row(int s) const {
    return std::span<const double>(logits).subspan(static_cast<std::size_t>(s) * actions, actions);
  }
};

// One sampled sequence with its scoring log-probabilities and advantages.
// shaped_adv holds the per-token advantage actually fed to the update; it is
// initialized to the raw advantage and overwritten by the reshape.
struct Rollout {
  int query = 0;
  std::vector<Token> tokens;
  std::vector<double> logp_old;  // tau=1 log-probs under the sampling snapshot
  std::vector<double> logp_cur;  // tau=1 log-probs under the current policy
  rewards::RewardBreakdown reward;
  double advantage = 0.0;
  std::vector<double> shaped_adv;
};

// Draw one sequence for `query`: tokens sampled per position from
// softmax(logits / temperature); stored log-probs are the tau = 1 values.
Rollout sample_rollout(const FactoredPolicy& policy, int query, double temperature,
                       RngStream& rng);

// recompute logp_cur for every token under `policy`
void refresh_current_logprobs(const FactoredPolicy& policy, Rollout& rollout);

// sum over positions of log pi(o_t | q, t) at tau = 1
double sequence_logprob(const FactoredPolicy& policy, const Rollout& rollout);

double token_entropy(const FactoredPolicy& policy, int query, int position);

// mean token entropy over all (query, position) pairs
double exact_policy_entropy(const FactoredPolicy& policy);

// mean of -logp_old over every token of every rollout; rejects an empty set
double sampled_policy_entropy(std::span<const Rollout> rollouts);

enum class Granularity { kSequence, kToken };

struct SurrogateConfig {
  double kl_beta = 0.0;
  double clip_eps = 0.2;                             // must lie in (0,1)
  Granularity granularity = Granularity::kSequence;  // ratio/advantage pairing
};

// Clipped surrogate for one rollout group:
//   J = (1/N) sum_i min(ratio_i * A'_i, clip(ratio_i, 1-eps, 1+eps) * A'_i)
//       - beta * sum_t KL(pi_cur(.|q,t) || pi_ref(.|q,t))
// Sequence granularity uses the sequence-level ratio with A'_i = shaped_adv[0];
// token granularity applies per-token ratios against shaped_adv[t].
double surrogate_objective(const FactoredPolicy& cur, const FactoredPolicy& old_snap,
                           const FactoredPolicy& ref, std::span<const Rollout> rollouts,
                           int query, const SurrogateConfig& cfg);

// exact gradient of surrogate_objective with respect to cur.logits
std::vector<double> surrogate_gradient(const FactoredPolicy& cur, const FactoredPolicy& old_snap,
                                       const FactoredPolicy& ref,
                                       std::span<const Rollout> rollouts, int query,
                                       const SurrogateConfig& cfg);

// Single-step tabular counterparts. The sampled group is replaced by its
// exact expectation over actions a ~ pi_old(.|state):
//   J = sum_a pi_old(a|s) min(C1(a), C2(a)) - beta * KL(s)
double tabular_surrogate_objective(const TabularPolicy& cur, const TabularPolicy& old_snap,
                                   const TabularPolicy& ref, int state,
                                   std::span<const double> advantages,
                                   const SurrogateConfig& cfg);

std::vector<double> tabular_surrogate_gradient(const TabularPolicy& cur,
                                               const TabularPolicy& old_snap,
                                               const TabularPolicy& ref, int state,
                                               std::span<const double> advantages,
                                               const SurrogateConfig& cfg);

// theta <- theta + eta * gradient
FactoredPolicy apply_gradient_ascent(FactoredPolicy policy, std::span<const double> gradient,
                                     double eta);
TabularPolicy apply_gradient_ascent(TabularPolicy policy, std::span<const double> gradient,
                                    double eta);

// Flat text snapshot: "policy v1 Q L V" header, then one line of V logits per
// (q,t) row. 17-significant-digit rendering makes round-trips bit-exact.
std::string policy_to_text(const FactoredPolicy& policy);
FactoredPolicy policy_from_text(std::string_view text);  // throws on malformed input
void save_policy(const FactoredPolicy& policy, const std::string& path);
FactoredPolicy load_policy(const std::string& path);

}  // namespace eclab
