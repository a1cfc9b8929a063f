#include "eclab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eclab/reshape.hpp"
#include "eclab/numerics.hpp"
#include "eclab/policy.hpp"
#include "eclab/rng.hpp"

namespace eclab {

namespace {

struct Combo {
  double beta;
  bool reshape;
  Granularity granularity;
  bool tabular;
  const char* label;
};

constexpr Combo kCombos[] = {
    {0.0, false, Granularity::kSequence, false, "beta=0 plain seq"},
    {0.04, false, Granularity::kSequence, false, "beta=0.04 plain seq"},
    {0.0, true, Granularity::kSequence, false, "beta=0 reshape seq"},
    {0.04, true, Granularity::kSequence, false, "beta=0.04 reshape seq"},
    {0.0, true, Granularity::kToken, false, "beta=0 reshape token"},
    {0.04, true, Granularity::kToken, false, "beta=0.04 reshape token"},
    {0.0, false, Granularity::kSequence, true, "beta=0 tabular"},
    {0.04, false, Granularity::kSequence, true, "beta=0.04 tabular"},
};

struct FactoredInstance {
  FactoredPolicy cur, old_snap, ref;
  std::vector<Rollout> rollouts;
  int query = 0;
  SurrogateConfig cfg;
};

// rejection margin around the clip boundaries; h nudges ratios by ~1e-5
constexpr double kKinkMargin = 2e-3;

bool factored_has_kink(const FactoredInstance& inst) {
  for (const Rollout& r : inst.rollouts) {
    if (inst.cfg.granularity == Granularity::kSequence) {
      double s_cur = 0.0, s_old = 0.0;
      for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        s_cur += log_softmax(inst.cur.row(inst.query, static_cast<int>(t)))[r.tokens[t]];
        s_old += r.logp_old[t];
      }
      const double ratio = std::exp(s_cur - s_old);
      if (std::abs(ratio - (1.0 - inst.cfg.clip_eps)) < kKinkMargin ||
          std::abs(ratio - (1.0 + inst.cfg.clip_eps)) < kKinkMargin)
        return true;
    } else {
      for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        const double lp =
            log_softmax(inst.cur.row(inst.query, static_cast<int>(t)))[r.tokens[t]];
        const double ratio = std::exp(lp - r.logp_old[t]);
        if (std::abs(ratio - (1.0 - inst.cfg.clip_eps)) < kKinkMargin ||
            std::abs(ratio - (1.0 + inst.cfg.clip_eps)) < kKinkMargin)
          return true;
      }
    }
  }
  return false;
}

FactoredInstance make_factored_instance(const Combo& combo, std::uint64_t seed, int index) {
  for (std::uint64_t salt = 0;; ++salt) {
    RngStream rng = derive_stream(
        seed, {kTagGradcheckInstance, static_cast<std::uint64_t>(index), salt});
    FactoredInstance inst;
    const int queries = rng.next_int(1, 2);
    const int length = rng.next_int(2, 6);
    const int vocab = rng.next_int(3, 8);
    const int n = rng.next_int(2, 6);
    inst.query = rng.next_int(0, queries - 1);
    inst.cfg = SurrogateConfig{combo.beta, 0.2, combo.granularity};

    inst.cur = FactoredPolicy::uniform(queries, length, vocab);
    inst.old_snap = inst.cur;
    inst.ref = inst.cur;
    for (double& x : inst.cur.logits) x = rng.next_normal();
    for (std::size_t i = 0; i < inst.old_snap.logits.size(); ++i)
      inst.old_snap.logits[i] = inst.cur.logits[i] + 0.3 * rng.next_normal();
    for (double& x : inst.ref.logits) x = rng.next_normal();

    for (int i = 0; i < n; ++i) {
      Rollout r = sample_rollout(inst.old_snap, inst.query, 1.0, rng);
      r.advantage = rng.next_normal();
      if (combo.reshape) {
        const double r0 = (rng.next_int(0, 1) ? 1.0 : -1.0) * (5.0 + 45.0 * rng.next_double());
        const reshape::ReshapeParams params{r0, 25.0, 1e9, combo.granularity};
        if (combo.granularity == Granularity::kSequence) {
          const double shaped = reshape::reshape_advantage(
              r.advantage, reshape::self_information_sequence(r), params, 0.0);
          r.shaped_adv.assign(r.tokens.size(), shaped);
        } else {
          r.shaped_adv.resize(r.tokens.size());
          for (std::size_t t = 0; t < r.tokens.size(); ++t)
            r.shaped_adv[t] = reshape::reshape_advantage(
                r.advantage, reshape::self_information_token(r, static_cast<int>(t)), params, 0.0);
        }
      } else {
        r.shaped_adv.assign(r.tokens.size(), r.advantage);
      }
      inst.rollouts.push_back(std::move(r));
    }
    if (!factored_has_kink(inst)) return inst;
  }
}

struct TabularInstance {
  TabularPolicy cur, old_snap, ref;
  std::vector<double> advantages;
  int state = 0;
  SurrogateConfig cfg;
};

TabularInstance make_tabular_instance(const Combo& combo, std::uint64_t seed, int index) {
  for (std::uint64_t salt = 0;; ++salt) {
    RngStream rng = derive_stream(
        seed, {kTagGradcheckInstance, static_cast<std::uint64_t>(index), salt});
    TabularInstance inst;
    const int states = rng.next_int(1, 3);
    const int actions = rng.next_int(2, 8);
    inst.state = rng.next_int(0, states - 1);
    inst.cfg = SurrogateConfig{combo.beta, 0.2, Granularity::kSequence};
    inst.cur = TabularPolicy::uniform(states, actions);
    inst.old_snap = inst.cur;
    inst.ref = inst.cur;
    for (double& x : inst.cur.logits) x = rng.next_normal();
    for (std::size_t i = 0; i < inst.old_snap.logits.size(); ++i)
      inst.old_snap.logits[i] = inst.cur.logits[i] + 0.3 * rng.next_normal();
    for (double& x : inst.ref.logits) x = rng.next_normal();
    inst.advantages.resize(actions);
    for (double& a : inst.advantages) a = rng.next_normal();

    const std::vector<double> lp_cur = log_softmax(inst.cur.row(inst.state));
    const std::vector<double> lp_old = log_softmax(inst.old_snap.row(inst.state));
    bool kink = false;
    for (int a = 0; a < actions; ++a) {
      const double ratio = std::exp(lp_cur[a] - lp_old[a]);
      if (std::abs(ratio - (1.0 - inst.cfg.clip_eps)) < kKinkMargin ||
          std::abs(ratio - (1.0 + inst.cfg.clip_eps)) < kKinkMargin)
        kink = true;
    }
    if (!kink) return inst;
  }
}

double rel_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double scale = 1e-12, worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    scale = std::max({scale, std::abs(analytic[i]), std::abs(fd[i])});
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::abs(analytic[i] - fd[i]));
  return worst / scale;
}

}  // namespace

GradcheckResult run_gradcheck(int instances, double h, std::uint64_t seed) {
  GradcheckResult res;
  res.instances = instances;
  res.step = h;
  std::vector<double> errors(instances, 0.0);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < instances; ++i) {
    const Combo& combo = kCombos[i % (sizeof(kCombos) / sizeof(kCombos[0]))];
    if (!combo.tabular) {
      FactoredInstance inst = make_factored_instance(combo, seed, i);
      const std::vector<double> analytic = surrogate_gradient(
          inst.cur, inst.old_snap, inst.ref, inst.rollouts, inst.query, inst.cfg);
      std::vector<double> fd(analytic.size());
      FactoredPolicy probe = inst.cur;
      for (std::size_t p = 0; p < fd.size(); ++p) {
        const double keep = probe.logits[p];
        probe.logits[p] = keep + h;
        const double jp = surrogate_objective(probe, inst.old_snap, inst.ref, inst.rollouts,
                                              inst.query, inst.cfg);
        probe.logits[p] = keep - h;
        const double jm = surrogate_objective(probe, inst.old_snap, inst.ref, inst.rollouts,
                                              inst.query, inst.cfg);
        probe.logits[p] = keep;
        fd[p] = (jp - jm) / (2.0 * h);
      }
      errors[i] = rel_error(analytic, fd);
    } else {
      TabularInstance inst = make_tabular_instance(combo, seed, i);
      const std::vector<double> analytic = tabular_surrogate_gradient(
          inst.cur, inst.old_snap, inst.ref, inst.state, inst.advantages, inst.cfg);
      std::vector<double> fd(analytic.size());
      TabularPolicy probe = inst.cur;
      for (std::size_t p = 0; p < fd.size(); ++p) {
        const double keep = probe.logits[p];
        probe.logits[p] = keep + h;
        const double jp = tabular_surrogate_objective(probe, inst.old_snap, inst.ref, inst.state,
                                                      inst.advantages, inst.cfg);
        probe.logits[p] = keep - h;
        const double jm = tabular_surrogate_objective(probe, inst.old_snap, inst.ref, inst.state,
                                                      inst.advantages, inst.cfg);
        probe.logits[p] = keep;
        fd[p] = (jp - jm) / (2.0 * h);
      }
      errors[i] = rel_error(analytic, fd);
    }
  }

  double sum = 0.0;
  for (int i = 0; i < instances; ++i) {
    sum += errors[i];
    if (errors[i] > res.max_rel_error) {
      res.max_rel_error = errors[i];
      res.worst_instance = i;
      res.worst_label = kCombos[i % (sizeof(kCombos) / sizeof(kCombos[0]))].label;
    }
  }
  res.mean_rel_error = instances > 0 ? sum / instances : 0.0;
  return res;
}

}  // namespace eclab
