#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eclab/envs.hpp"
#include "eclab/grpo.hpp"

namespace eclab::harness {

enum class EnvKind { kGrounding, kReasoning, kNumericBandit };

// Full experiment description: training hyperparameters, environment
// selection, and run bookkeeping. Parsed from a line-oriented
// `key = value` file with [train], [env] and [experiment] sections;
// unknown keys and sections are hard errors.
struct ExperimentConfig {
  grpo::TrainConfig train;

  EnvKind env_kind = EnvKind::kGrounding;
  envs::GroundingConfig grounding;  // grounding and reasoning share these keys
  envs::BanditConfig bandit;

  std::string preset = "desk";  // "desk" or "large-model"
  std::string out_dir = "runs/out";
  std::vector<std::uint64_t> seeds = {1};
  int snapshot_every = 0;  // 0 = initial/final snapshots only

  std::vector<std::string> r0_arms = {"10", "-50", "off"};

  int theorem_instances = 200;
  double theorem_eta = 1e-3;
  int gradcheck_instances = 60;

  void validate() const;
  // construct the selected environment
  std::unique_ptr<envs::Environment> make_env() const;
  // the reasoning-regime twin of a grounding config (same vocabulary,
  // queries and anchors; binary reward)
  std::unique_ptr<envs::Environment> make_reasoning_twin() const;

  // deterministic text echo of every resolved value
  std::string describe() const;
};

// Built-in defaults (the desk preset), optionally overridden by a config file.
ExperimentConfig default_config();
ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// "3" -> {3}; "1..5" -> {1,2,3,4,5}
std::vector<std::uint64_t> parse_seed_range(const std::string& spec);

}  // namespace eclab::harness
