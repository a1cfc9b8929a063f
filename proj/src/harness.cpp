#include "eclab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "eclab/reshape.hpp"
#include "eclab/numerics.hpp"
#include "eclab/svg.hpp"

namespace eclab::harness {

namespace fs = std::filesystem;

namespace {

void refuse_existing(const fs::path& file, bool overwrite) {
  if (!overwrite && fs::exists(file))
    throw std::runtime_error("output exists (pass --overwrite to replace): " + file.string());
}

StepRecord make_record(int step, const FactoredPolicy& sampling_policy,
                       const FactoredPolicy& reference, const envs::Environment& env,
                       const grpo::TrainConfig& cfg,
                       const std::vector<grpo::RolloutGroup>& groups) {
  StepRecord rec;
  rec.step = step;
  rec.entropy_exact = exact_policy_entropy(sampling_policy);

  std::vector<Rollout> all;
  for (const grpo::RolloutGroup& g : groups)
    all.insert(all.end(), g.rollouts.begin(), g.rollouts.end());
  rec.entropy_sampled = sampled_policy_entropy(all);

  std::vector<double> rewards;
  rewards.reserve(all.size());
  for (const Rollout& r : all) rewards.push_back(r.reward.total);
  rec.reward_mean = mean(rewards);
  rec.reward_pop_std = population_std(rewards);

  double gate_sum = 0.0;
  int gate_open = 0;
  for (const grpo::RolloutGroup& g : groups) {
    gate_sum += g.r_std_gate;
    if (g.r_std_gate < cfg.delta_gate) ++gate_open;
  }
  rec.r_std_gate = gate_sum / static_cast<double>(groups.size());
  rec.gate_open_frac = static_cast<double>(gate_open) / static_cast<double>(groups.size());

  double si_sum = 0.0;
  int si_n = 0;
  for (const Rollout& r : all) {
    if (r.advantage > 0.0) {
      si_sum += reshape::self_information_sequence(r);
      ++si_n;
    }
  }
  rec.selfinfo_pos_mean = si_n ? si_sum / si_n : 0.0;

  double kl_sum = 0.0;
  for (const grpo::RolloutGroup& g : groups)
    kl_sum += grpo::kl_to_reference(sampling_policy, reference, g.query);
  rec.kl_mean = kl_sum / static_cast<double>(groups.size());

  const auto cls = entropy::token_class_probability(all, env.vocab());
  rec.prob_numeric_mean = cls ? cls->numeric_mean : 0.0;
  rec.prob_other_mean = cls ? cls->other_mean : 0.0;

  const auto hi =
      entropy::high_entropy_token_report(sampling_policy, 2.0, env.position_classes());
  rec.high_entropy_count = static_cast<double>(hi.flagged_total);

  rec.eval_score = env.evaluate(sampling_policy, envs::EvalMode::kGreedy).mean_score;
  return rec;
}

std::string snapshot_name(int step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "snapshot_step_%06d.txt", step);
  return buf;
}

double standard_error(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return sample_std(xs) / std::sqrt(static_cast<double>(xs.size()));
}

ArmSummary summarize_arm(const std::string& name, const std::vector<RunOutput>& runs) {
  ArmSummary arm;
  arm.name = name;
  for (const RunOutput& run : runs) {
    std::vector<double> entropy;
    entropy.reserve(run.records.size());
    for (const StepRecord& r : run.records) entropy.push_back(r.entropy_exact);
    arm.final_entropy_per_seed.push_back(final_window_mean(entropy));
    arm.initial_entropy_per_seed.push_back(entropy.empty() ? 0.0 : entropy.front());
  }
  arm.final_mean = mean(arm.final_entropy_per_seed);
  arm.final_se = standard_error(arm.final_entropy_per_seed);
  return arm;
}

std::vector<double> seed_mean_entropy_curve(const std::vector<RunOutput>& runs) {
  std::size_t n = 0;
  for (const RunOutput& run : runs) n = std::max(n, run.records.size());
  std::vector<double> curve(n, 0.0);
  if (n == 0) return curve;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    int c = 0;
    for (const RunOutput& run : runs) {
      if (i < run.records.size()) {
        s += run.records[i].entropy_exact;
        ++c;
      }
    }
    curve[i] = c ? s / c : 0.0;
  }
  return curve;
}

}  // namespace

std::size_t final_window(std::size_t records) {
  const std::size_t w = static_cast<std::size_t>(
      std::lround(0.1 * static_cast<double>(records)));
  return std::max<std::size_t>(1, w);
}

double final_window_mean(std::span<const double> series) {
  if (series.empty()) return 0.0;
  const std::size_t w = std::min(series.size(), final_window(series.size()));
  double s = 0.0;
  for (std::size_t i = series.size() - w; i < series.size(); ++i) s += series[i];
  return s / static_cast<double>(w);
}

RunOutput run_training_on_env(const grpo::TrainConfig& train, const envs::Environment& env,
                              std::uint64_t seed, const fs::path& out, bool overwrite,
                              int snapshot_every, const std::string& config_echo) {
  grpo::TrainConfig cfg = train;
  cfg.seed = seed;
  cfg.validate();

  fs::create_directories(out);
  refuse_existing(out / "telemetry.csv", overwrite);
  // drop snapshots left over from a previous, possibly longer run
  for (const auto& entry : fs::directory_iterator(out)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("snapshot_step_", 0) == 0) fs::remove(entry.path());
  }

  RunOutput result;
  result.dir = out;
  result.initial_policy = env.initial_policy();
  const FactoredPolicy reference = result.initial_policy;  // frozen at training start

  save_policy(result.initial_policy, (out / "policy_initial.txt").string());
  if (!config_echo.empty()) write_text_file(out / "run_info.txt", config_echo);

  FactoredPolicy policy = result.initial_policy;
  result.records.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    if (snapshot_every > 0 && step % snapshot_every == 0)
      save_policy(policy, (out / snapshot_name(step)).string());
    grpo::StepResult sr = grpo::train_step(policy, reference, env, cfg, step);
    result.records.push_back(make_record(step, policy, reference, env, cfg, sr.groups));
    policy = std::move(sr.policy);
  }
  result.final_policy = policy;
  save_policy(result.final_policy, (out / "policy_final.txt").string());
  write_csv(out / "telemetry.csv", result.records);
  return result;
}

RunOutput run_training(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out,
                       bool overwrite) {
  cfg.validate();
  const std::unique_ptr<envs::Environment> env = cfg.make_env();
  return run_training_on_env(cfg.train, *env, seed, out, overwrite, cfg.snapshot_every,
                             cfg.describe());
}

CompareOutput run_compare_rewards(const ExperimentConfig& cfg, const fs::path& out,
                                  bool overwrite) {
  cfg.validate();
  if (cfg.env_kind != EnvKind::kGrounding)
    throw std::invalid_argument("compare-rewards: env.type must be grounding");
  if (cfg.seeds.size() < 2)
    throw std::invalid_argument("compare-rewards: need at least 2 seeds");

  fs::create_directories(out);
  refuse_existing(out / "summary.txt", overwrite);

  const std::unique_ptr<envs::Environment> grounding_env = cfg.make_env();
  const std::unique_ptr<envs::Environment> reasoning_env = cfg.make_reasoning_twin();

  std::vector<RunOutput> grounding_runs, reasoning_runs;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string leaf = "seed_" + std::to_string(seed);
    grounding_runs.push_back(run_training_on_env(cfg.train, *grounding_env, seed,
                                                 out / "grounding" / leaf, overwrite,
                                                 cfg.snapshot_every, ""));
    reasoning_runs.push_back(run_training_on_env(cfg.train, *reasoning_env, seed,
                                                 out / "reasoning" / leaf, overwrite,
                                                 cfg.snapshot_every, ""));
  }

  CompareOutput result;
  result.grounding = summarize_arm("grounding", grounding_runs);
  result.reasoning = summarize_arm("reasoning", reasoning_runs);
  result.entropy_ratio = result.reasoning.final_mean > 0.0
                             ? result.grounding.final_mean / result.reasoning.final_mean
                             : std::numeric_limits<double>::infinity();
  {
    std::vector<double> ratios;
    for (std::size_t i = 0; i < reasoning_runs.size(); ++i) {
      const double init = result.reasoning.initial_entropy_per_seed[i];
      ratios.push_back(init > 0.0 ? result.reasoning.final_entropy_per_seed[i] / init : 0.0);
    }
    result.reasoning_collapse_ratio = mean(ratios);
  }

  std::string summary;
  summary += "compare-rewards: matched grounding vs reasoning arms\n";
  summary += "seeds: " + std::to_string(cfg.seeds.size()) + "\n";
  summary += "final window: last " +
             std::to_string(final_window(grounding_runs[0].records.size())) + " of " +
             std::to_string(grounding_runs[0].records.size()) + " steps\n";
  for (const ArmSummary* arm : {&result.grounding, &result.reasoning}) {
    summary += arm->name + ": final entropy mean " + format_g17(arm->final_mean) + " (se " +
               format_g17(arm->final_se) + ")\n";
  }
  summary += "entropy ratio grounding/reasoning: " + format_g17(result.entropy_ratio) + "\n";
  summary += "reasoning final/initial entropy: " +
             format_g17(result.reasoning_collapse_ratio) + "\n";
  write_text_file(out / "summary.txt", summary);

  const std::vector<Series> series = {
      {"grounding", seed_mean_entropy_curve(grounding_runs)},
      {"reasoning", seed_mean_entropy_curve(reasoning_runs)}};
  const int window = default_smooth_window(series[0].values.size());
  write_text_file(out / "entropy.svg",
                  render_line_chart("policy entropy (seed mean)", series, window));
  return result;
}

SweepOutput run_sweep_r0(const ExperimentConfig& cfg, const fs::path& out, bool overwrite) {
  cfg.validate();
  if (cfg.env_kind != EnvKind::kGrounding)
    throw std::invalid_argument("sweep-r0: env.type must be grounding");
  if (cfg.r0_arms.size() >= 2 && cfg.seeds.size() < 2)
    throw std::invalid_argument("sweep-r0: need at least 2 seeds for an ordering verdict");

  fs::create_directories(out);
  refuse_existing(out / "summary.txt", overwrite);

  const std::unique_ptr<envs::Environment> env = cfg.make_env();

  SweepOutput result;
  std::vector<std::vector<RunOutput>> runs_per_arm;
  std::vector<Series> series;
  for (const std::string& arm_label : cfg.r0_arms) {
    grpo::TrainConfig train = cfg.train;
    if (arm_label == "off") {
      train.reshape = false;
    } else {
      train.reshape = true;
      train.r0 = std::stod(arm_label);
    }
    std::vector<RunOutput> runs;
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path dir = out / ("r0_" + arm_label) / ("seed_" + std::to_string(seed));
      runs.push_back(
          run_training_on_env(train, *env, seed, dir, overwrite, cfg.snapshot_every, ""));
    }
    result.arms.push_back(summarize_arm(arm_label, runs));
    series.push_back({"r0=" + arm_label, seed_mean_entropy_curve(runs)});
    runs_per_arm.push_back(std::move(runs));
  }

  // Expected ordering: entropy decreases with 1/r0 ("off" sits at 0).
  if (result.arms.size() >= 2) {
    std::vector<std::size_t> order(result.arms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto inv_r0 = [&](const std::string& label) {
      return label == "off" ? 0.0 : 1.0 / std::stod(label);
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return inv_r0(result.arms[a].name) > inv_r0(result.arms[b].name);
    });
    result.ordered = true;
    result.separated = true;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const ArmSummary& lo = result.arms[order[i]];
      const ArmSummary& hi = result.arms[order[i + 1]];
      const double gap = hi.final_mean - lo.final_mean;
      if (!(gap > 0.0)) result.ordered = false;
      // arms run on matched seeds, so the gap's standard error comes from the
      // paired per-seed differences
      std::vector<double> diffs(lo.final_entropy_per_seed.size());
      for (std::size_t s = 0; s < diffs.size(); ++s)
        diffs[s] = hi.final_entropy_per_seed[s] - lo.final_entropy_per_seed[s];
      const double se_gap = standard_error(diffs);
      if (!(gap > se_gap)) result.separated = false;
    }
    std::string expected;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i) expected += " < ";
      expected += "r0=" + result.arms[order[i]].name;
    }
    result.verdict = std::string(result.ordered && result.separated ? "PASS" : "FAIL") +
                     ": expected entropy order " + expected +
                     (result.ordered ? " holds" : " violated") +
                     (result.separated ? " with standard-error separation"
                                       : " (gaps within standard error)");
  } else {
    result.verdict = "single arm, verdict absent";
  }

  std::string summary;
  summary += "sweep-r0 on the grounding preset\n";
  summary += "seeds: " + std::to_string(cfg.seeds.size()) + "\n";
  for (const ArmSummary& arm : result.arms) {
    summary += "r0=" + arm.name + ": final entropy mean " + format_g17(arm.final_mean) +
               " (se " + format_g17(arm.final_se) + ")\n";
  }
  summary += "verdict: " + result.verdict + "\n";
  write_text_file(out / "summary.txt", summary);

  const int window =
      default_smooth_window(series.empty() ? 0 : series[0].values.size());
  write_text_file(out / "entropy.svg",
                  render_line_chart("policy entropy by r0 (seed mean)", series, window));
  return result;
}

entropy::TheoremStats run_verify_theorem(const ExperimentConfig& cfg, const fs::path& out,
                                         bool overwrite) {
  cfg.validate();
  fs::create_directories(out);
  refuse_existing(out / "report.json", overwrite);
  const entropy::TheoremStats stats =
      entropy::verify_theorem(cfg.theorem_instances, cfg.theorem_eta, cfg.seeds.front());

  nlohmann::ordered_json j;
  j["instances"] = stats.instances;
  j["eta"] = stats.eta;
  j["mean_error_full"] = stats.mean_error_full;
  j["max_error_full"] = stats.max_error_full;
  j["mean_error_half"] = stats.mean_error_half;
  j["max_error_half"] = stats.max_error_half;
  j["decay_ratio"] = stats.decay_ratio;
  write_text_file(out / "report.json", j.dump(2) + "\n");

  std::string text;
  text += "entropy-change forecast check\n";
  text += "instances: " + std::to_string(stats.instances) + "\n";
  text += "eta: " + format_g17(stats.eta) + "\n";
  text += "mean |exact dH - predicted dH| at eta:   " + format_g17(stats.mean_error_full) + "\n";
  text += "mean |exact dH - predicted dH| at eta/2: " + format_g17(stats.mean_error_half) + "\n";
  text += "error decay ratio (expect ~4): " + format_g17(stats.decay_ratio) + "\n";
  write_text_file(out / "report.txt", text);
  return stats;
}

GradcheckResult run_gradcheck_report(const ExperimentConfig& cfg, const fs::path& out,
                                     bool overwrite) {
  cfg.validate();
  fs::create_directories(out);
  refuse_existing(out / "report.json", overwrite);
  const GradcheckResult res = run_gradcheck(cfg.gradcheck_instances, 1e-5, cfg.seeds.front());

  nlohmann::ordered_json j;
  j["instances"] = res.instances;
  j["h"] = res.step;
  j["max_rel_error"] = res.max_rel_error;
  j["mean_rel_error"] = res.mean_rel_error;
  j["worst_instance"] = res.worst_instance;
  j["worst_label"] = res.worst_label;
  write_text_file(out / "report.json", j.dump(2) + "\n");
  return res;
}

void emit_report(const std::vector<fs::path>& csv_paths, const fs::path& out) {
  if (csv_paths.empty()) throw std::invalid_argument("report: no telemetry files given");
  fs::create_directories(out);

  std::vector<Telemetry> files;
  std::vector<std::string> labels;
  for (const fs::path& p : csv_paths) {
    files.push_back(read_csv(p));
    fs::path label = p;
    label.replace_extension("");
    labels.push_back(label.filename().string() == "telemetry" && p.has_parent_path()
                         ? p.parent_path().filename().string()
                         : label.filename().string());
  }

  std::string summary;
  std::size_t max_rows = 0;
  for (const Telemetry& t : files) max_rows = std::max(max_rows, t.rows.size());
  if (max_rows == 0) summary += "no steps\n";

  for (const std::string& column : csv_columns()) {
    if (column == "step") continue;
    std::vector<Series> series;
    for (std::size_t f = 0; f < files.size(); ++f)
      series.push_back({labels[f], files[f].column(column)});
    const int window = default_smooth_window(max_rows);
    write_text_file(out / ("report_" + column + ".svg"),
                    render_line_chart(column, series, window));
    for (std::size_t f = 0; f < files.size(); ++f) {
      if (files[f].rows.empty()) continue;
      summary += labels[f] + " " + column + ": final-window mean " +
                 format_g17(final_window_mean(series[f].values)) + "\n";
    }
  }
  if (summary.empty()) summary = "no steps\n";
  write_text_file(out / "summary.txt", summary);
}

}  // namespace eclab::harness
