// eclab command line: training runs, the entropy experiments, and reports.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eclab/harness.hpp"

namespace fs = std::filesystem;
using namespace eclab;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string seed_spec;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_seeds) {
  cmd->add_option("--config", flags.config_path, "experiment config file (key = value)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  if (with_seeds) {
    cmd->add_option("--seed", flags.seed_spec, "single master seed");
    cmd->add_option("--seeds", flags.seed_spec, "seed range N..M");
  }
  cmd->add_flag("--overwrite", flags.overwrite, "replace existing outputs");
}

harness::ExperimentConfig load_config(const CommonFlags& flags) {
  harness::ExperimentConfig cfg = flags.config_path.empty()
                                      ? harness::default_config()
                                      : harness::parse_config_file(flags.config_path);
  if (!flags.seed_spec.empty()) cfg.seeds = harness::parse_seed_range(flags.seed_spec);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropy-dynamics laboratory for group-relative policy optimization"};
  app.require_subcommand(1);

  CommonFlags train_flags, compare_flags, sweep_flags, theorem_flags, grad_flags, report_flags;
  std::vector<std::string> report_csvs;

  CLI::App* cmd_train = app.add_subcommand("train", "single training run with CSV telemetry");
  add_common(cmd_train, train_flags, true);

  CLI::App* cmd_compare =
      app.add_subcommand("compare-rewards", "matched grounding vs reasoning arms");
  add_common(cmd_compare, compare_flags, true);

  CLI::App* cmd_sweep = app.add_subcommand("sweep-r0", "reshape arms r0 = {...} plus off");
  add_common(cmd_sweep, sweep_flags, true);

  CLI::App* cmd_theorem =
      app.add_subcommand("verify-theorem", "entropy-change forecast error statistics");
  add_common(cmd_theorem, theorem_flags, true);

  CLI::App* cmd_grad =
      app.add_subcommand("gradcheck", "analytic gradients vs central finite differences");
  add_common(cmd_grad, grad_flags, true);

  CLI::App* cmd_report = app.add_subcommand("report", "render SVG charts from telemetry CSVs");
  cmd_report->add_option("csv", report_csvs, "telemetry.csv paths")->required();
  add_common(cmd_report, report_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      const harness::ExperimentConfig cfg = load_config(train_flags);
      for (std::uint64_t seed : cfg.seeds) {
        const fs::path out = cfg.seeds.size() == 1
                                 ? fs::path(cfg.out_dir)
                                 : fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
        const harness::RunOutput run =
            harness::run_training(cfg, seed, out, train_flags.overwrite);
        std::printf("train: seed %llu, %zu steps -> %s\n",
                    static_cast<unsigned long long>(seed), run.records.size(),
                    run.dir.string().c_str());
        if (!run.records.empty())
          std::printf("  final entropy %.6f, final mean reward %.6f, eval %.6f\n",
                      run.records.back().entropy_exact, run.records.back().reward_mean,
                      run.records.back().eval_score);
      }
    } else if (cmd_compare->parsed()) {
      const harness::ExperimentConfig cfg = load_config(compare_flags);
      const harness::CompareOutput out =
          harness::run_compare_rewards(cfg, cfg.out_dir, compare_flags.overwrite);
      std::printf("grounding final entropy %.6f (se %.6f)\n", out.grounding.final_mean,
                  out.grounding.final_se);
      std::printf("reasoning final entropy %.6f (se %.6f)\n", out.reasoning.final_mean,
                  out.reasoning.final_se);
      std::printf("entropy ratio %.3f, reasoning final/initial %.3f\n", out.entropy_ratio,
                  out.reasoning_collapse_ratio);
    } else if (cmd_sweep->parsed()) {
      const harness::ExperimentConfig cfg = load_config(sweep_flags);
      const harness::SweepOutput out =
          harness::run_sweep_r0(cfg, cfg.out_dir, sweep_flags.overwrite);
      for (const harness::ArmSummary& arm : out.arms)
        std::printf("r0=%s: final entropy %.6f (se %.6f)\n", arm.name.c_str(), arm.final_mean,
                    arm.final_se);
      std::printf("%s\n", out.verdict.c_str());
    } else if (cmd_theorem->parsed()) {
      const harness::ExperimentConfig cfg = load_config(theorem_flags);
      const entropy::TheoremStats stats =
          harness::run_verify_theorem(cfg, cfg.out_dir, theorem_flags.overwrite);
      std::printf("instances %d, eta %g\n", stats.instances, stats.eta);
      std::printf("mean error at eta %.3e, at eta/2 %.3e, decay ratio %.3f\n",
                  stats.mean_error_full, stats.mean_error_half, stats.decay_ratio);
    } else if (cmd_grad->parsed()) {
      const harness::ExperimentConfig cfg = load_config(grad_flags);
      const GradcheckResult res =
          harness::run_gradcheck_report(cfg, cfg.out_dir, grad_flags.overwrite);
      std::printf("gradcheck: %d instances, h=%g, max rel error %.3e (%s)\n", res.instances,
                  res.step, res.max_rel_error, res.worst_label.c_str());
      if (res.max_rel_error > 1e-4) {
        std::fprintf(stderr, "error: gradcheck max relative error %.3e exceeds 1e-4\n",
                     res.max_rel_error);
        return 1;
      }
    } else if (cmd_report->parsed()) {
      std::vector<fs::path> paths(report_csvs.begin(), report_csvs.end());
      const fs::path out = report_flags.out_dir.empty() ? fs::path("report")
                                                        : fs::path(report_flags.out_dir);
      harness::emit_report(paths, out);
      std::printf("report written to %s\n", out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
