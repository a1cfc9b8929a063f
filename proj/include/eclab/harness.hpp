#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eclab/config.hpp"
#include "eclab/entropy_lab.hpp"
#include "eclab/gradcheck.hpp"
#include "eclab/telemetry.hpp"

namespace eclab::harness {

struct RunOutput {
  std::filesystem::path dir;
  std::vector<StepRecord> records;
  FactoredPolicy initial_policy;
  FactoredPolicy final_policy;
};

// One training run: telemetry.csv, policy_initial.txt, policy_final.txt and
// periodic snapshot_step_K.txt files under `out`. Byte-identical outputs for
// identical (config, seed). Refuses to overwrite existing outputs unless
// `overwrite` is set.
RunOutput run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                       const std::filesystem::path& out, bool overwrite);

// as run_training but against a caller-supplied environment and train config
RunOutput run_training_on_env(const grpo::TrainConfig& train, const envs::Environment& env,
                              std::uint64_t seed, const std::filesystem::path& out,
                              bool overwrite, int snapshot_every,
                              const std::string& config_echo);

struct ArmSummary {
  std::string name;
  std::vector<double> final_entropy_per_seed;    // final-window mean, one per seed
  std::vector<double> initial_entropy_per_seed;  // entropy at step 0
  double final_mean = 0.0;
  double final_se = 0.0;  // across-seed standard error
};

// final-window length: 10% of the records, at least one
std::size_t final_window(std::size_t records);
double final_window_mean(std::span<const double> series);

struct CompareOutput {
  ArmSummary grounding;
  ArmSummary reasoning;
  double entropy_ratio = 0.0;             // grounding final / reasoning final
  double reasoning_collapse_ratio = 0.0;  // reasoning final / reasoning initial (seed mean)
};

// Matched grounding-vs-reasoning arms over the configured seed list; writes
// per-run outputs, a summary and an entropy chart. Needs >= 2 seeds.
CompareOutput run_compare_rewards(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                  bool overwrite);

struct SweepOutput {
  std::vector<ArmSummary> arms;  // in config order
  bool ordered = false;          // entropies follow the 1/r0 ordering
  bool separated = false;        // every adjacent gap exceeds its standard error
  std::string verdict;
};

// Reshape arms (r0 values plus "off") on the grounding preset. A verdict is
// produced when at least two arms run.
SweepOutput run_sweep_r0(const ExperimentConfig& cfg, const std::filesystem::path& out,
                         bool overwrite);

// Theorem error statistics; persists report.json and report.txt.
entropy::TheoremStats run_verify_theorem(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out, bool overwrite);

// Finite-difference gradient check; persists report.json. h is pinned at 1e-5.
GradcheckResult run_gradcheck_report(const ExperimentConfig& cfg,
                                     const std::filesystem::path& out, bool overwrite);

// Render one SVG per telemetry column (a polyline per input file) plus a
// plain-text summary of final-window statistics.
void emit_report(const std::vector<std::filesystem::path>& csv_paths,
                 const std::filesystem::path& out);

}  // namespace eclab::harness
