#include "eclab/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "eclab/numerics.hpp"

namespace eclab {

FactoredPolicy FactoredPolicy::uniform(int queries, int length, int vocab) {
  FactoredPolicy p;
  p.queries = queries;
  p.length = length;
  p.vocab = vocab;
  p.logits.assign(static_cast<std::size_t>(queries) * length * vocab, 0.0);
  return p;
}

void FactoredPolicy::check_finite() const {
  for (double x : logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("policy logits must be finite");
  }
}

TabularPolicy TabularPolicy::uniform(int states, int actions) {
  TabularPolicy p;
  p.states = states;
  p.actions = actions;
  p.logits.assign(static_cast<std::size_t>(states) * actions, 0.0);
  return p;
}

namespace {

// inverse-CDF draw from softmax(logits / temperature)
Token sample_from_logits(std::span<const double> logits, double temperature, RngStream& rng) {
  std::vector<double> scaled(logits.size());
  for (std::size_t v = 0; v < logits.size(); ++v) scaled[v] = logits[v] / temperature;
  std::vector<double> probs = softmax(scaled);
  const double u = rng.next_double();
  double cum = 0.0;
  for (std::size_t v = 0; v + 1 < probs.size(); ++v) {
    cum += probs[v];
    if (u < cum) return static_cast<Token>(v);
  }
  return static_cast<Token>(probs.size() - 1);
}

double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

void check_surrogate_config(const SurrogateConfig& cfg) {
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0))
    throw std::invalid_argument("surrogate: clip epsilon must lie in (0,1)");
}

}  // namespace

Rollout sample_rollout(const FactoredPolicy& policy, int query, double temperature,
                       RngStream& rng) {
  Rollout r;
  r.query = query;
  r.tokens.resize(policy.length);
  r.logp_old.resize(policy.length);
  for (int t = 0; t < policy.length; ++t) {
    const auto row = policy.row(query, t);
    const Token tok = sample_from_logits(row, temperature, rng);
    r.tokens[t] = tok;
    r.logp_old[t] = log_softmax(row)[tok];  // scoring is always tau = 1
  }
  r.logp_cur = r.logp_old;
  r.shaped_adv.assign(policy.length, 0.0);
  return r;
}

void refresh_current_logprobs(const FactoredPolicy& policy, Rollout& rollout) {
  rollout.logp_cur.resize(rollout.tokens.size());
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    const auto row = policy.row(rollout.query, static_cast<int>(t));
    rollout.logp_cur[t] = log_softmax(row)[rollout.tokens[t]];
  }
}

double sequence_logprob(const FactoredPolicy& policy, const Rollout& rollout) {
  double s = 0.0;
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    const auto row = policy.row(rollout.query, static_cast<int>(t));
    s += log_softmax(row)[rollout.tokens[t]];
  }
  return s;
}

double token_entropy(const FactoredPolicy& policy, int query, int position) {
  return entropy_from_logits(policy.row(query, position));
}

double exact_policy_entropy(const FactoredPolicy& policy) {
  double h = 0.0;
  for (int q = 0; q < policy.queries; ++q)
    for (int t = 0; t < policy.length; ++t) h += token_entropy(policy, q, t);
  return h / static_cast<double>(policy.rows());
}

double sampled_policy_entropy(std::span<const Rollout> rollouts) {
  if (rollouts.empty())
    throw std::invalid_argument("sampled_policy_entropy: rollout set is empty");
  double s = 0.0;
  std::size_t n = 0;
  for (const Rollout& r : rollouts) {
    for (double lp : r.logp_old) s -= lp;
    n += r.logp_old.size();
  }
  return s / static_cast<double>(n);
}

namespace {

// Shared layout for objective/gradient: per-position log-softmax of the
// current policy for one query, plus per-rollout current log-probs.
struct QueryScores {
  std::vector<std::vector<double>> lp_cur_rows;        // [t][v]
  std::vector<std::vector<double>> lp_cur_per_rollout;  // [i][t]
};

QueryScores score_query(const FactoredPolicy& cur, std::span<const Rollout> rollouts,
                        int query) {
  QueryScores s;
  s.lp_cur_rows.resize(cur.length);
  for (int t = 0; t < cur.length; ++t) s.lp_cur_rows[t] = log_softmax(cur.row(query, t));
  s.lp_cur_per_rollout.resize(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    s.lp_cur_per_rollout[i].resize(cur.length);
    for (int t = 0; t < cur.length; ++t)
      s.lp_cur_per_rollout[i][t] = s.lp_cur_rows[t][rollouts[i].tokens[t]];
  }
  return s;
}

double kl_term(std::span<const double> lp_cur, std::span<const double> lp_ref) {
  double kl = 0.0;
  for (std::size_t v = 0; v < lp_cur.size(); ++v)
    kl += std::exp(lp_cur[v]) * (lp_cur[v] - lp_ref[v]);
  return kl;
}

}  // namespace

double surrogate_objective(const FactoredPolicy& cur, const FactoredPolicy& old_snap,
                           const FactoredPolicy& ref, std::span<const Rollout> rollouts,
                           int query, const SurrogateConfig& cfg) {
  check_surrogate_config(cfg);
  if (!cur.same_shape(old_snap) || !cur.same_shape(ref))
    throw std::invalid_argument("surrogate: policy shapes do not match");
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  const QueryScores sc = score_query(cur, rollouts, query);

  double j = 0.0;
  const double inv_n = rollouts.empty() ? 0.0 : 1.0 / static_cast<double>(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const Rollout& r = rollouts[i];
    if (cfg.granularity == Granularity::kSequence) {
      double s_cur = 0.0, s_old = 0.0;
      for (int t = 0; t < cur.length; ++t) {
        s_cur += sc.lp_cur_per_rollout[i][t];
        s_old += r.logp_old[t];
      }
      const double ratio = std::exp(s_cur - s_old);
      const double a = r.shaped_adv[0];
      j += inv_n * std::min(ratio * a, clip(ratio, lo, hi) * a);
    } else {
      for (int t = 0; t < cur.length; ++t) {
        const double ratio = std::exp(sc.lp_cur_per_rollout[i][t] - r.logp_old[t]);
        const double a = r.shaped_adv[t];
        j += inv_n * std::min(ratio * a, clip(ratio, lo, hi) * a);
      }
    }
  }

  if (cfg.kl_beta != 0.0) {
    for (int t = 0; t < cur.length; ++t) {
      const std::vector<double> lp_ref = log_softmax(ref.row(query, t));
      j -= cfg.kl_beta * kl_term(sc.lp_cur_rows[t], lp_ref);
    }
  }
  return j;
}

std::vector<double> surrogate_gradient(const FactoredPolicy& cur, const FactoredPolicy& old_snap,
                                       const FactoredPolicy& ref,
                                       std::span<const Rollout> rollouts, int query,
                                       const SurrogateConfig& cfg) {
  check_surrogate_config(cfg);
  if (!cur.same_shape(old_snap) || !cur.same_shape(ref))
    throw std::invalid_argument("surrogate: policy shapes do not match");
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  const QueryScores sc = score_query(cur, rollouts, query);

  std::vector<double> grad(cur.logits.size(), 0.0);
  const double inv_n = rollouts.empty() ? 0.0 : 1.0 / static_cast<double>(rollouts.size());
  auto grad_row = [&](int t) {
    return std::span<double>(grad).subspan(
        static_cast<std::size_t>(query * cur.length + t) * cur.vocab, cur.vocab);
  };

  // d/dtheta of log pi(o_t) is (1{v = o_t} - pi(v)); the min-term contributes
  // coef * that, with coef = A * ratio on the unclipped branch and 0 when the
  // clip is binding.
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const Rollout& r = rollouts[i];
    if (cfg.granularity == Granularity::kSequence) {
      double s_cur = 0.0, s_old = 0.0;
      for (int t = 0; t < cur.length; ++t) {
        s_cur += sc.lp_cur_per_rollout[i][t];
        s_old += r.logp_old[t];
      }
      const double ratio = std::exp(s_cur - s_old);
      const double a = r.shaped_adv[0];
      const double c1 = ratio * a;
      const double c2 = clip(ratio, lo, hi) * a;
      if (c1 <= c2) {
        const double coef = inv_n * a * ratio;
        for (int t = 0; t < cur.length; ++t) {
          auto g = grad_row(t);
          const auto& lp = sc.lp_cur_rows[t];
          for (int v = 0; v < cur.vocab; ++v) g[v] -= coef * std::exp(lp[v]);
          g[r.tokens[t]] += coef;
        }
      }
    } else {
      for (int t = 0; t < cur.length; ++t) {
        const double ratio = std::exp(sc.lp_cur_per_rollout[i][t] - r.logp_old[t]);
        const double a = r.shaped_adv[t];
        const double c1 = ratio * a;
        const double c2 = clip(ratio, lo, hi) * a;
        if (c1 <= c2) {
          const double coef = inv_n * a * ratio;
          auto g = grad_row(t);
          const auto& lp = sc.lp_cur_rows[t];
          for (int v = 0; v < cur.vocab; ++v) g[v] -= coef * std::exp(lp[v]);
          g[r.tokens[t]] += coef;
        }
      }
    }
  }

  if (cfg.kl_beta != 0.0) {
    // d KL_t / d theta_v = pi(v) * ((lp_cur(v) - lp_ref(v)) - KL_t)
    for (int t = 0; t < cur.length; ++t) {
      const std::vector<double> lp_ref = log_softmax(ref.row(query, t));
      const auto& lp = sc.lp_cur_rows[t];
      const double kl = kl_term(lp, lp_ref);
      auto g = grad_row(t);
      for (int v = 0; v < cur.vocab; ++v)
        g[v] -= cfg.kl_beta * std::exp(lp[v]) * ((lp[v] - lp_ref[v]) - kl);
    }
  }
  return grad;
}

double tabular_surrogate_objective(const TabularPolicy& cur, const TabularPolicy& old_snap,
                                   const TabularPolicy& ref, int state,
                                   std::span<const double> advantages,
                                   const SurrogateConfig& cfg) {
  check_surrogate_config(cfg);
  if (cur.actions != old_snap.actions || cur.actions != ref.actions ||
      static_cast<int>(advantages.size()) != cur.actions)
    throw std::invalid_argument("tabular surrogate: shape mismatch");
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  const std::vector<double> lp_cur = log_softmax(cur.row(state));
  const std::vector<double> lp_old = log_softmax(old_snap.row(state));
  double j = 0.0;
  for (int a = 0; a < cur.actions; ++a) {
    const double w = std::exp(lp_old[a]);
    const double ratio = std::exp(lp_cur[a] - lp_old[a]);
    j += w * std::min(ratio * advantages[a], clip(ratio, lo, hi) * advantages[a]);
  }
  if (cfg.kl_beta != 0.0) {
    const std::vector<double> lp_ref = log_softmax(ref.row(state));
    j -= cfg.kl_beta * kl_term(lp_cur, lp_ref);
  }
  return j;
}

std::vector<double> tabular_surrogate_gradient(const TabularPolicy& cur,
                                               const TabularPolicy& old_snap,
                                               const TabularPolicy& ref, int state,
                                               std::span<const double> advantages,
                                               const SurrogateConfig& cfg) {
  check_surrogate_config(cfg);
  if (cur.actions != old_snap.actions || cur.actions != ref.actions ||
      static_cast<int>(advantages.size()) != cur.actions)
    throw std::invalid_argument("tabular surrogate: shape mismatch");
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  const std::vector<double> lp_cur = log_softmax(cur.row(state));
  const std::vector<double> lp_old = log_softmax(old_snap.row(state));

  std::vector<double> grad(cur.logits.size(), 0.0);
  auto g = std::span<double>(grad).subspan(static_cast<std::size_t>(state) * cur.actions,
                                           cur.actions);
  for (int a = 0; a < cur.actions; ++a) {
    const double w = std::exp(lp_old[a]);
    const double ratio = std::exp(lp_cur[a] - lp_old[a]);
    const double c1 = ratio * advantages[a];
    const double c2 = clip(ratio, lo, hi) * advantages[a];
    if (c1 <= c2) {
      const double coef = w * advantages[a] * ratio;
      for (int v = 0; v < cur.actions; ++v) g[v] -= coef * std::exp(lp_cur[v]);
      g[a] += coef;
    }
  }
  if (cfg.kl_beta != 0.0) {
    const std::vector<double> lp_ref = log_softmax(ref.row(state));
    const double kl = kl_term(lp_cur, lp_ref);
    for (int v = 0; v < cur.actions; ++v)
      g[v] -= cfg.kl_beta * std::exp(lp_cur[v]) * ((lp_cur[v] - lp_ref[v]) - kl);
  }
  return grad;
}

FactoredPolicy apply_gradient_ascent(FactoredPolicy policy, std::span<const double> gradient,
                                     double eta) {
  if (gradient.size() != policy.logits.size())
    throw std::invalid_argument("apply_gradient_ascent: gradient shape mismatch");
  for (std::size_t i = 0; i < gradient.size(); ++i) policy.logits[i] += eta * gradient[i];
  return policy;
}

TabularPolicy apply_gradient_ascent(TabularPolicy policy, std::span<const double> gradient,
                                    double eta) {
  if (gradient.size() != policy.logits.size())
    throw std::invalid_argument("apply_gradient_ascent: gradient shape mismatch");
  for (std::size_t i = 0; i < gradient.size(); ++i) policy.logits[i] += eta * gradient[i];
  return policy;
}

std::string policy_to_text(const FactoredPolicy& policy) {
  std::string out;
  out.reserve(policy.logits.size() * 26 + 64);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "policy v1 %d %d %d\n", policy.queries, policy.length,
                policy.vocab);
  out += buf;
  for (int row = 0; row < policy.rows(); ++row) {
    for (int v = 0; v < policy.vocab; ++v) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    policy.logits[static_cast<std::size_t>(row) * policy.vocab + v]);
      if (v) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FactoredPolicy policy_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic, version;
  FactoredPolicy p;
  if (!(in >> magic >> version >> p.queries >> p.length >> p.vocab) || magic != "policy" ||
      version != "v1")
    throw std::runtime_error("policy snapshot: bad header");
  if (p.queries <= 0 || p.length <= 0 || p.vocab <= 0)
    throw std::runtime_error("policy snapshot: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(p.queries) * p.length * p.vocab;
  p.logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> p.logits[i])) throw std::runtime_error("policy snapshot: truncated logits");
  }
  double extra;
  if (in >> extra) throw std::runtime_error("policy snapshot: trailing data");
  return p;
}

void save_policy(const FactoredPolicy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << policy_to_text(policy);
  if (!out) throw std::runtime_error("write failed: " + path);
}

FactoredPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return policy_from_text(ss.str());
}

}  // namespace eclab
