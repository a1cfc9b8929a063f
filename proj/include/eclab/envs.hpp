#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "eclab/geometry.hpp"
#include "eclab/policy.hpp"
#include "eclab/rewards.hpp"
#include "eclab/rng.hpp"
#include "eclab/tokens.hpp"

namespace eclab::envs {

enum class EvalMode { kGreedy, kExpected };

struct EvalResult {
  double mean_score = 0.0;        // mean clean-gt IoU / accuracy over queries
  double exact_match_rate = 0.0;  // greedy output equals the clean target
};

// A synthetic reward regime. Environments are immutable after construction;
// reward evaluation draws only from the caller-provided stream, so rollouts
// can be scored from any number of workers.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual const Vocab& vocab() const = 0;
  virtual int num_queries() const = 0;
  virtual int seq_length() const = 0;
  virtual std::span<const TokenClass> position_classes() const = 0;

  // score one sampled sequence; the stream supplies any per-episode noise
  virtual rewards::RewardBreakdown reward(int query, std::span<const Token> tokens,
                                          RngStream& rng) const = 0;

  // Starting policy modelling a pretrained model: template structure nearly
  // locked in, answer slots softly anchored near the target values.
  virtual FactoredPolicy initial_policy() const = 0;

  virtual EvalResult evaluate(const FactoredPolicy& policy, EvalMode mode) const = 0;

  // Enumerable candidate-answer space (answer-token combinations). Values are
  // deterministic: noisy regimes report the exact expectation over the noise.
  virtual long long candidate_count() const = 0;
  virtual double candidate_value(int query, long long index) const = 0;
  // the same candidate scored against the clean ground truth (no noise)
  virtual double candidate_clean_value(int query, long long index) const = 0;
  // log-probability of emitting the candidate's answer tokens
  virtual double candidate_logprob(const FactoredPolicy& policy, int query,
                                   long long index) const = 0;
};

struct GroundingQuery {
  geom::BoundingBox gt;
  int noun = 0;
};

struct GroundingConfig {
  int grid = 16;
  int num_queries = 8;
  int jitter = 2;  // max per-edge perturbation of the ground truth, per episode
  int noun_count = 8;
  double anchor_sigma = 2.0;   // width of the coordinate anchor in the initial policy
  double struct_boost = 8.0;   // logit margin of template tokens over off-template ones
  double noun_boost = 3.0;     // logit margin of the query's noun over other nouns
  int jitter_retries = 100;
  std::vector<GroundingQuery> queries;  // generated deterministically when empty

  void validate() const;  // throws std::invalid_argument naming the offending key
};

// IoU + format rewards with per-episode annotation jitter.
class GroundingEnv : public Environment {
 public:
  explicit GroundingEnv(GroundingConfig cfg);

  std::string_view name() const override { return "grounding"; }
  const Vocab& vocab() const override { return vocab_; }
  int num_queries() const override { return static_cast<int>(cfg_.queries.size()); }
  int seq_length() const override { return kTemplateLength; }
  std::span<const TokenClass> position_classes() const override { return position_classes_; }

  rewards::RewardBreakdown reward(int query, std::span<const Token> tokens,
                                  RngStream& rng) const override;
  FactoredPolicy initial_policy() const override;
  EvalResult evaluate(const FactoredPolicy& policy, EvalMode mode) const override;

  long long candidate_count() const override;
  double candidate_value(int query, long long index) const override;
  double candidate_clean_value(int query, long long index) const override;
  double candidate_logprob(const FactoredPolicy& policy, int query,
                           long long index) const override;

  const GroundingConfig& config() const { return cfg_; }
  // all jitter offsets of the clean box that keep it valid; uniform under
  // the resample-until-valid rule
  std::span<const geom::BoundingBox> valid_jitters(int query) const {
    return valid_jitters_[query];
  }
  geom::BoundingBox draw_jittered_gt(int query, RngStream& rng) const;

  static constexpr int kTemplateLength = 11;
  static constexpr int kAnswerSlot0 = 5;  // positions 5..8 hold x1 y1 x2 y2

 private:
  GroundingConfig cfg_;
  Vocab vocab_;
  std::vector<TokenClass> position_classes_;
  std::vector<std::vector<geom::BoundingBox>> valid_jitters_;
};

struct ReasoningConfig {
  int grid = 16;
  int num_queries = 8;
  int noun_count = 8;
  double anchor_sigma = 2.0;
  double struct_boost = 8.0;
  double noun_boost = 3.0;
  std::vector<GroundingQuery> queries;  // targets; generated when empty

  void validate() const;
};

// Binary exact-sequence-match reward: 1 iff every token equals the target.
class ReasoningEnv : public Environment {
 public:
  explicit ReasoningEnv(ReasoningConfig cfg);

  std::string_view name() const override { return "reasoning"; }
  const Vocab& vocab() const override { return vocab_; }
  int num_queries() const override { return static_cast<int>(targets_.size()); }
  int seq_length() const override { return GroundingEnv::kTemplateLength; }
  std::span<const TokenClass> position_classes() const override { return position_classes_; }

  rewards::RewardBreakdown reward(int query, std::span<const Token> tokens,
                                  RngStream& rng) const override;
  FactoredPolicy initial_policy() const override;
  EvalResult evaluate(const FactoredPolicy& policy, EvalMode mode) const override;

  long long candidate_count() const override;
  double candidate_value(int query, long long index) const override;
  double candidate_clean_value(int query, long long index) const override;
  double candidate_logprob(const FactoredPolicy& policy, int query,
                           long long index) const override;

  std::span<const Token> target(int query) const { return targets_[query]; }

 private:
  ReasoningConfig cfg_;
  Vocab vocab_;
  std::vector<TokenClass> position_classes_;
  std::vector<std::vector<Token>> targets_;
};

struct BanditConfig {
  int max_action = 40;  // actions 0..max_action
  int target = 20;
  double lambda = 0.05;

  void validate() const;
};

// Single-position numeric environment with the smooth-decay reward.
class NumericBanditEnv : public Environment {
 public:
  explicit NumericBanditEnv(BanditConfig cfg);

  std::string_view name() const override { return "numeric_bandit"; }
  const Vocab& vocab() const override { return vocab_; }
  int num_queries() const override { return 1; }
  int seq_length() const override { return 1; }
  std::span<const TokenClass> position_classes() const override { return position_classes_; }

  rewards::RewardBreakdown reward(int query, std::span<const Token> tokens,
                                  RngStream& rng) const override;
  FactoredPolicy initial_policy() const override;
  EvalResult evaluate(const FactoredPolicy& policy, EvalMode mode) const override;

  long long candidate_count() const override;
  double candidate_value(int query, long long index) const override;
  double candidate_clean_value(int query, long long index) const override;
  double candidate_logprob(const FactoredPolicy& policy, int query,
                           long long index) const override;

  // reward for one action; rejects out-of-range actions
  double action_reward(int action) const;

  const BanditConfig& config() const { return cfg_; }

 private:
  BanditConfig cfg_;
  Vocab vocab_;
  std::vector<TokenClass> position_classes_;
};

// deterministic default query set for a grid; sizes and offsets vary per query
std::vector<GroundingQuery> default_queries(int grid, int count, int noun_count);

// the 11-token sequence [<think> noun </think> <answer> { x1 y1 x2 y2 } </answer>]
std::vector<Token> template_sequence(const Vocab& vocab, int noun, const geom::BoundingBox& box);

}  // namespace eclab::envs
