#include "eclab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "eclab/telemetry.hpp"

namespace eclab::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_key(const std::string& origin, int line, const std::string& msg) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not a number: " + v);
  return x;
}

long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: " + v);
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("not a flag (on/off): " + v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  if (name == "desk") {
    // tabular-friendly defaults; identical to the constructor values
    cfg.train.learning_rate = 2.0;
  } else if (name == "large-model") {
    // the published recipe for billion-parameter fine-tuning; far too small a
    // step size for tabular logit tables, kept for reference
    cfg.train.learning_rate = 1e-6;
    cfg.train.kl_beta = 0.04;
    cfg.train.rollouts = 8;
    cfg.train.temperature = 1.0;
    cfg.train.iterations = 1;
  } else {
    throw std::invalid_argument("experiment.preset: unknown preset '" + name + "'");
  }
  cfg.preset = name;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  switch (env_kind) {
    case EnvKind::kGrounding: grounding.validate(); break;
    case EnvKind::kReasoning: grounding.validate(); break;
    case EnvKind::kNumericBandit: bandit.validate(); break;
  }
  if (seeds.empty()) throw std::invalid_argument("experiment.seeds: empty seed list");
  if (snapshot_every < 0)
    throw std::invalid_argument("experiment.snapshot_every: must be >= 0");
  if (theorem_instances < 10)
    throw std::invalid_argument("experiment.theorem_instances: must be >= 10");
  if (!(theorem_eta > 0.0)) throw std::invalid_argument("experiment.theorem_eta: must be > 0");
  if (gradcheck_instances < 1)
    throw std::invalid_argument("experiment.gradcheck_instances: must be >= 1");
  if (r0_arms.empty()) throw std::invalid_argument("experiment.r0_arms: empty arm list");
  for (const std::string& arm : r0_arms) {
    if (arm == "off") continue;
    const double r0 = parse_double(arm);
    if (!(std::abs(r0) > 1.0))
      throw std::invalid_argument("experiment.r0_arms: |r0| must be > 1, got " + arm);
  }
}

std::unique_ptr<envs::Environment> ExperimentConfig::make_env() const {
  switch (env_kind) {
    case EnvKind::kGrounding: return std::make_unique<envs::GroundingEnv>(grounding);
    case EnvKind::kReasoning: {
      envs::ReasoningConfig rc{grounding.grid,         grounding.num_queries,
                               grounding.noun_count,   grounding.anchor_sigma,
                               grounding.struct_boost, grounding.noun_boost,
                               grounding.queries};
      return std::make_unique<envs::ReasoningEnv>(rc);
    }
    case EnvKind::kNumericBandit: return std::make_unique<envs::NumericBanditEnv>(bandit);
  }
  throw std::logic_error("unreachable env kind");
}

std::unique_ptr<envs::Environment> ExperimentConfig::make_reasoning_twin() const {
  envs::ReasoningConfig rc{grounding.grid,         grounding.num_queries,
                           grounding.noun_count,   grounding.anchor_sigma,
                           grounding.struct_boost, grounding.noun_boost,
                           grounding.queries};
  return std::make_unique<envs::ReasoningEnv>(rc);
}

std::string ExperimentConfig::describe() const {
  std::string s;
  auto put = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  s += "[train]\n";
  put("rollouts", std::to_string(train.rollouts));
  put("temperature", format_g17(train.temperature));
  put("iterations", std::to_string(train.iterations));
  put("kl_beta", format_g17(train.kl_beta));
  put("clip_eps", format_g17(train.clip_eps));
  put("learning_rate", format_g17(train.learning_rate));
  put("steps", std::to_string(train.steps));
  put("queries_per_batch", std::to_string(train.queries_per_batch));
  put("reshape", train.reshape ? "on" : "off");
  put("r0", format_g17(train.r0));
  put("l0", format_g17(train.l0));
  put("delta_gate", std::isinf(train.delta_gate) ? "inf" : format_g17(train.delta_gate));
  put("granularity", train.granularity == Granularity::kSequence ? "sequence" : "token");
  put("std_floor", format_g17(train.std_floor));
  put("seed", std::to_string(train.seed));
  s += "[env]\n";
  switch (env_kind) {
    case EnvKind::kGrounding: put("type", "grounding"); break;
    case EnvKind::kReasoning: put("type", "reasoning"); break;
    case EnvKind::kNumericBandit: put("type", "numeric_bandit"); break;
  }
  if (env_kind == EnvKind::kNumericBandit) {
    put("actions", std::to_string(bandit.max_action + 1));
    put("target", std::to_string(bandit.target));
    put("lambda", format_g17(bandit.lambda));
  } else {
    put("grid", std::to_string(grounding.grid));
    put("queries", std::to_string(grounding.num_queries));
    put("jitter", std::to_string(grounding.jitter));
    put("nouns", std::to_string(grounding.noun_count));
    put("anchor_sigma", format_g17(grounding.anchor_sigma));
    put("struct_boost", format_g17(grounding.struct_boost));
    put("noun_boost", format_g17(grounding.noun_boost));
  }
  s += "[experiment]\n";
  put("preset", preset);
  put("out", out_dir);
  {
    std::string list;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (i) list += ",";
      list += std::to_string(seeds[i]);
    }
    put("seeds", list);
  }
  put("snapshot_every", std::to_string(snapshot_every));
  {
    std::string list;
    for (std::size_t i = 0; i < r0_arms.size(); ++i) {
      if (i) list += ",";
      list += r0_arms[i];
    }
    put("r0_arms", list);
  }
  put("theorem_instances", std::to_string(theorem_instances));
  put("theorem_eta", format_g17(theorem_eta));
  put("gradcheck_instances", std::to_string(gradcheck_instances));
  return s;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  const auto dots = spec.find("..");
  std::vector<std::uint64_t> seeds;
  if (dots == std::string::npos) {
    seeds.push_back(static_cast<std::uint64_t>(parse_int(spec)));
    return seeds;
  }
  const long long lo = parse_int(spec.substr(0, dots));
  const long long hi = parse_int(spec.substr(dots + 2));
  if (hi < lo) throw std::invalid_argument("seed range is reversed: " + spec);
  for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  return seeds;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg = default_config();

  // Apply the preset before any other key, wherever it appears in the file,
  // so explicit keys always win over preset values.
  {
    std::istringstream scan(text);
    std::string line;
    std::string section;
    while (std::getline(scan, line)) {
      std::string s = trim(line);
      const auto hash = s.find('#');
      if (hash != std::string::npos) s = trim(s.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[' && s.back() == ']') {
        section = s.substr(1, s.size() - 2);
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) continue;
      if (section == "experiment" && trim(s.substr(0, eq)) == "preset")
        apply_preset(cfg, trim(s.substr(eq + 1)));
    }
  }

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') bad_key(origin, lineno, "malformed section header: " + s);
      section = s.substr(1, s.size() - 2);
      if (section != "train" && section != "env" && section != "experiment")
        bad_key(origin, lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) bad_key(origin, lineno, "expected 'key = value': " + s);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) bad_key(origin, lineno, "expected 'key = value': " + s);

    try {
      if (section == "train") {
        if (key == "rollouts") cfg.train.rollouts = static_cast<int>(parse_int(value));
        else if (key == "temperature") cfg.train.temperature = parse_double(value);
        else if (key == "iterations") cfg.train.iterations = static_cast<int>(parse_int(value));
        else if (key == "kl_beta") cfg.train.kl_beta = parse_double(value);
        else if (key == "clip_eps") cfg.train.clip_eps = parse_double(value);
        else if (key == "learning_rate") cfg.train.learning_rate = parse_double(value);
        else if (key == "steps") cfg.train.steps = static_cast<int>(parse_int(value));
        else if (key == "queries_per_batch")
          cfg.train.queries_per_batch = static_cast<int>(parse_int(value));
        else if (key == "reshape") cfg.train.reshape = parse_bool(value);
        else if (key == "r0") cfg.train.r0 = parse_double(value);
        else if (key == "l0") cfg.train.l0 = parse_double(value);
        else if (key == "delta_gate") cfg.train.delta_gate = parse_double(value);
        else if (key == "granularity") {
          if (value == "sequence") cfg.train.granularity = Granularity::kSequence;
          else if (value == "token") cfg.train.granularity = Granularity::kToken;
          else bad_key(origin, lineno, "train.granularity: expected sequence|token");
        } else if (key == "std_floor") cfg.train.std_floor = parse_double(value);
        else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(parse_int(value));
        else bad_key(origin, lineno, "unknown key train." + key);
      } else if (section == "env") {
        if (key == "type") {
          if (value == "grounding") cfg.env_kind = EnvKind::kGrounding;
          else if (value == "reasoning") cfg.env_kind = EnvKind::kReasoning;
          else if (value == "numeric_bandit") cfg.env_kind = EnvKind::kNumericBandit;
          else bad_key(origin, lineno, "env.type: unknown environment '" + value + "'");
        } else if (key == "grid") cfg.grounding.grid = static_cast<int>(parse_int(value));
        else if (key == "queries")
          cfg.grounding.num_queries = static_cast<int>(parse_int(value));
        else if (key == "jitter") cfg.grounding.jitter = static_cast<int>(parse_int(value));
        else if (key == "nouns") cfg.grounding.noun_count = static_cast<int>(parse_int(value));
        else if (key == "anchor_sigma") cfg.grounding.anchor_sigma = parse_double(value);
        else if (key == "struct_boost") cfg.grounding.struct_boost = parse_double(value);
        else if (key == "noun_boost") cfg.grounding.noun_boost = parse_double(value);
        else if (key == "actions") {
          cfg.bandit.max_action = static_cast<int>(parse_int(value)) - 1;
        } else if (key == "target") cfg.bandit.target = static_cast<int>(parse_int(value));
        else if (key == "lambda") cfg.bandit.lambda = parse_double(value);
        else bad_key(origin, lineno, "unknown key env." + key);
      } else if (section == "experiment") {
        if (key == "preset") { /* applied in the pre-pass */ }
        else if (key == "out") cfg.out_dir = value;
        else if (key == "seeds") cfg.seeds = parse_seed_range(value);
        else if (key == "snapshot_every")
          cfg.snapshot_every = static_cast<int>(parse_int(value));
        else if (key == "r0_arms") cfg.r0_arms = split_list(value);
        else if (key == "theorem_instances")
          cfg.theorem_instances = static_cast<int>(parse_int(value));
        else if (key == "theorem_eta") cfg.theorem_eta = parse_double(value);
        else if (key == "gradcheck_instances")
          cfg.gradcheck_instances = static_cast<int>(parse_int(value));
        else bad_key(origin, lineno, "unknown key experiment." + key);
      } else {
        bad_key(origin, lineno, "key outside of any section: " + key);
      }
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      if (msg.find(origin) == 0) throw;  // already annotated
      bad_key(origin, lineno, key + ": " + msg);
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.filename().string());
}

}  // namespace eclab::harness
