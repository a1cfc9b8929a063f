#pragma once

#include <span>

#include "eclab/grpo.hpp"
#include "eclab/policy.hpp"

namespace eclab::reshape {

struct ReshapeParams {
  double r0 = 10.0;    // |r0| > 1; positive dampens positive advantages, negative boosts
  double l0 = 25.0;    // > 1; floor A/l0 keeps reshaped positives positive
  double delta = std::numeric_limits<double>::infinity();  // gate on the group spread
  Granularity granularity = Granularity::kSequence;

  void validate() const;
};

// S_i: mean negative log-probability over the rollout's tokens (under the
// sampling snapshot); rejects empty sequences
double self_information_sequence(const Rollout& rollout);

// S_{i,t}: negative log-probability of one token
double self_information_token(const Rollout& rollout, int t);

// The advantage reshape:
//   A > 0 and r_std < delta  ->  max(A / l0, A - S / r0)
//   otherwise                ->  A unchanged
double reshape_advantage(double advantage, double self_information, const ReshapeParams& params,
                         double r_std);

// Populate shaped_adv for every rollout; the gate is evaluated once per group
// from its r_std_gate value.
void reshape_group(grpo::RolloutGroup& group, const ReshapeParams& params);

struct CovarianceDiagnostic {
  double cov_total = 0.0;         // cov_base - k * cov_entropy_term
  double cov_base = 0.0;          // Cov(log pi, pi * A)
  double cov_entropy_term = 0.0;  // Cov(log pi, pi * log pi)
};

// Sample covariances (1/n) over the rollout set, with x_i the sequence
// log-probability under the sampling snapshot. Rejects fewer than 2 samples.
CovarianceDiagnostic covariance_diagnostic(std::span<const Rollout> rollouts, double k);

}  // namespace eclab::reshape
