#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eclab::harness {

// One row per training step. All fields are finite; when a step has no
// positive-advantage rollout the token-class probability and self-information
// columns fall back to 0.
struct StepRecord {
  int step = 0;
  double entropy_exact = 0.0;    // exact policy entropy of the sampling snapshot
  double entropy_sampled = 0.0;  // Monte-Carlo estimate from the step's rollouts
  double reward_mean = 0.0;
  double reward_pop_std = 0.0;
  double r_std_gate = 0.0;       // mean sum-form spread over the step's groups
  double gate_open_frac = 0.0;   // fraction of groups with spread below the gate
  double selfinfo_pos_mean = 0.0;
  double kl_mean = 0.0;          // mean KL to the reference over batch queries
  double prob_numeric_mean = 0.0;
  double prob_other_mean = 0.0;
  double high_entropy_count = 0.0;  // positions at >= 2x mean entropy
  double eval_score = 0.0;          // greedy decode against clean ground truth
};

// fixed column order; every cell is numeric, rendered at 17 significant digits
std::span<const std::string> csv_columns();

std::string csv_header();
std::string csv_row(const StepRecord& record);
std::string format_g17(double value);

void write_csv(const std::filesystem::path& path, std::span<const StepRecord> records);

struct Telemetry {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;  // throws if missing
};

// strict reader: header must match the schema exactly
Telemetry read_csv(const std::filesystem::path& path);

}  // namespace eclab::harness
