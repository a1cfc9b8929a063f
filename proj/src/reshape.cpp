#include "eclab/reshape.hpp"

#include <cmath>
#include <stdexcept>

namespace eclab::reshape {

void ReshapeParams::validate() const {
  if (!(std::abs(r0) > 1.0)) throw std::invalid_argument("reshape: |r0| must be > 1");
  if (!(l0 > 1.0)) throw std::invalid_argument("reshape: l0 must be > 1");
  if (!(delta > 0.0)) throw std::invalid_argument("reshape: delta must be > 0");
}

double self_information_sequence(const Rollout& rollout) {
  if (rollout.logp_old.empty())
    throw std::invalid_argument("self_information_sequence: empty rollout");
  double s = 0.0;
  for (double lp : rollout.logp_old) s -= lp;
  return s / static_cast<double>(rollout.logp_old.size());
}

double self_information_token(const Rollout& rollout, int t) {
  if (t < 0 || t >= static_cast<int>(rollout.logp_old.size()))
    throw std::out_of_range("self_information_token: index out of range");
  return -rollout.logp_old[t];
}

double reshape_advantage(double advantage, double self_information,
                         const ReshapeParams& params, double r_std) {
  params.validate();
  if (advantage > 0.0 && r_std < params.delta)
    return std::max(advantage / params.l0, advantage - self_information / params.r0);
  return advantage;
}

void reshape_group(grpo::RolloutGroup& group, const ReshapeParams& params) {
  params.validate();
  const bool gate_open = group.r_std_gate < params.delta;
  for (Rollout& r : group.rollouts) {
    const double a = r.advantage;
    r.shaped_adv.assign(r.tokens.size(), a);
    if (!(a > 0.0) || !gate_open) continue;
    if (params.granularity == Granularity::kSequence) {
      const double shaped = reshape_advantage(a, self_information_sequence(r), params, 0.0);
      r.shaped_adv.assign(r.tokens.size(), shaped);
    } else {
      for (std::size_t t = 0; t < r.tokens.size(); ++t)
        r.shaped_adv[t] =
            reshape_advantage(a, self_information_token(r, static_cast<int>(t)), params, 0.0);
    }
  }
}

CovarianceDiagnostic covariance_diagnostic(std::span<const Rollout> rollouts, double k) {
  if (rollouts.size() < 2)
    throw std::invalid_argument("covariance_diagnostic: need at least 2 rollouts");
  const std::size_t n = rollouts.size();
  std::vector<double> x(n), ya(n), yx(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lp = 0.0;
    for (double v : rollouts[i].logp_old) lp += v;
    const double p = std::exp(lp);
    x[i] = lp;
    ya[i] = p * rollouts[i].advantage;
    yx[i] = p * lp;
  }
  auto cov = [n](const std::vector<double>& u, const std::vector<double>& v) {
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mu += u[i];
      mv += v[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += (u[i] - mu) * (v[i] - mv);
    return c / static_cast<double>(n);
  };
  CovarianceDiagnostic d;
  d.cov_base = cov(x, ya);
  d.cov_entropy_term = cov(x, yx);
  d.cov_total = d.cov_base - k * d.cov_entropy_term;
  return d;
}

}  // namespace eclab::reshape
