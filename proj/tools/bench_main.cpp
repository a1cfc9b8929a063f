// Benchmark comparing the OpenMP kernels against the serial references.
// Both paths must produce identical results; this only measures wall time.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "eclab/serial_ref.hpp"

using namespace eclab;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %.2fx\n", name, serial_ms,
              parallel_ms, parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  envs::GroundingConfig gc;
  const envs::GroundingEnv env(gc);
  const FactoredPolicy policy = env.initial_policy();

  grpo::TrainConfig cfg;
  cfg.rollouts = 64;  // oversized groups to give the kernels real work
  cfg.steps = 1;
  cfg.seed = 7;

  {
    const std::vector<int> queries = grpo::batch_queries(env.num_queries(), 0, 0);
    const int reps = 40;
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i)
      (void)serial_ref::collect_step_groups(policy, env, queries, cfg, i);
    const double serial_ms = ms_since(t0) / reps;
    t0 = Clock::now();
    for (int i = 0; i < reps; ++i)
      (void)grpo::collect_step_groups(policy, env, queries, cfg, i);
    const double parallel_ms = ms_since(t0) / reps;
    report("rollout collection", serial_ms, parallel_ms);
  }

  {
    const int reps = 20;
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i)
      (void)serial_ref::train_step(policy, policy, env, cfg, i);
    const double serial_ms = ms_since(t0) / reps;
    t0 = Clock::now();
    for (int i = 0; i < reps; ++i) (void)grpo::train_step(policy, policy, env, cfg, i);
    const double parallel_ms = ms_since(t0) / reps;
    report("train step", serial_ms, parallel_ms);
  }

  {
    const int instances = 20000;
    auto t0 = Clock::now();
    (void)serial_ref::verify_theorem(instances, 1e-3, 11);
    const double serial_ms = ms_since(t0);
    t0 = Clock::now();
    (void)entropy::verify_theorem(instances, 1e-3, 11);
    const double parallel_ms = ms_since(t0);
    report("theorem verification", serial_ms, parallel_ms);
  }

  {
    auto t0 = Clock::now();
    (void)serial_ref::degeneracy_report(env, policy, 0, 0.1);
    const double serial_ms = ms_since(t0);
    t0 = Clock::now();
    (void)entropy::degeneracy_report(env, policy, 0, 0.1);
    const double parallel_ms = ms_since(t0);
    report("degeneracy enumeration", serial_ms, parallel_ms);
  }

  return 0;
}
