#include "eclab/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "eclab/numerics.hpp"

namespace eclab::envs {

namespace {

constexpr std::size_t kAnswerDigits = 4;

long long pow_ll(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::array<int, 4> decode_tuple(long long index, int base) {
  std::array<int, 4> d{};
  for (int k = 3; k >= 0; --k) {
    d[k] = static_cast<int>(index % base);
    index /= base;
  }
  return d;
}

std::vector<TokenClass> template_position_classes() {
  using TC = TokenClass;
  return {TC::kStructural, TC::kNoun,    TC::kStructural, TC::kStructural,
          TC::kStructural, TC::kNumeric, TC::kNumeric,    TC::kNumeric,
          TC::kNumeric,    TC::kStructural, TC::kStructural};
}

// Anchored starting policy shared by the grounding and reasoning regimes.
// Template tokens sit struct_boost logits above everything else; the four
// coordinate slots carry a Gaussian logit bump centred on the target values.
FactoredPolicy anchored_policy(const Vocab& vocab, std::span<const GroundingQuery> queries,
                               double struct_boost, double noun_boost, double anchor_sigma) {
  const int q_count = static_cast<int>(queries.size());
  const int length = GroundingEnv::kTemplateLength;
  FactoredPolicy p = FactoredPolicy::uniform(q_count, length, vocab.size());
  for (double& x : p.logits) x = -struct_boost;

  const Token structural_slots[length] = {
      Vocab::kThinkOpen, -1, Vocab::kThinkClose, Vocab::kAnswerOpen, Vocab::kBraceOpen,
      -1, -1, -1, -1, Vocab::kBraceClose, Vocab::kAnswerClose};

  for (int q = 0; q < q_count; ++q) {
    const GroundingQuery& query = queries[q];
    const int coords[4] = {query.gt.x1, query.gt.y1, query.gt.x2, query.gt.y2};
    for (int t = 0; t < length; ++t) {
      auto row = p.row(q, t);
      if (structural_slots[t] >= 0) {
        row[structural_slots[t]] = 0.0;
      } else if (t == 1) {
        for (int i = 0; i < vocab.noun_count; ++i) row[vocab.noun(i)] = 0.0;
        row[vocab.noun(query.noun)] = noun_boost;
      } else {
        const int c = coords[t - GroundingEnv::kAnswerSlot0];
        for (int v = 0; v < vocab.numeric_count; ++v) {
          const double d = (v - c) / anchor_sigma;
          row[vocab.numeric(v)] = -0.5 * d * d;
        }
      }
    }
  }
  return p;
}

std::vector<Token> greedy_tokens(const FactoredPolicy& policy, int query) {
  std::vector<Token> toks(policy.length);
  for (int t = 0; t < policy.length; ++t) {
    const auto row = policy.row(query, t);
    toks[t] = static_cast<Token>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return toks;
}

void validate_queries(const std::vector<GroundingQuery>& queries, int grid, int noun_count,
                      const char* env_name) {
  if (queries.empty())
    throw std::invalid_argument(std::string(env_name) + ": query set is empty");
  for (const GroundingQuery& q : queries) {
    if (!geom::is_valid(q.gt, grid))
      throw std::invalid_argument(std::string(env_name) + ": invalid ground-truth box");
    if (q.noun < 0 || q.noun >= noun_count)
      throw std::invalid_argument(std::string(env_name) + ": noun index out of range");
  }
}

}  // namespace

std::vector<Token> template_sequence(const Vocab& vocab, int noun,
                                     const geom::BoundingBox& box) {
  return {Vocab::kThinkOpen,      vocab.noun(noun),       Vocab::kThinkClose,
          Vocab::kAnswerOpen,     Vocab::kBraceOpen,      vocab.numeric(box.x1),
          vocab.numeric(box.y1),  vocab.numeric(box.x2),  vocab.numeric(box.y2),
          Vocab::kBraceClose,     Vocab::kAnswerClose};
}

std::vector<GroundingQuery> default_queries(int grid, int count, int noun_count) {
  // sizes large relative to the grid, so many candidate boxes score near the
  // optimum and the near-optimal set stays wide
  static constexpr int kSizes[][2] = {{12, 12}, {13, 11}, {11, 13}, {14, 12},
                                      {12, 14}, {13, 13}, {12, 11}, {11, 12}};
  std::vector<GroundingQuery> out;
  out.reserve(count);
  for (int q = 0; q < count; ++q) {
    const auto& wh = kSizes[q % 8];
    int w = std::min(wh[0], grid - 1);
    int h = std::min(wh[1], grid - 1);
    const int x1 = (q * 5) % (grid - w + 1);
    const int y1 = (q * 3 + 2) % (grid - h + 1);
    out.push_back({geom::BoundingBox{x1, y1, x1 + w, y1 + h}, q % noun_count});
  }
  return out;
}

void GroundingConfig::validate() const {
  if (grid < 2) throw std::invalid_argument("env.grid: must be >= 2");
  if (num_queries < 1) throw std::invalid_argument("env.queries: must be >= 1");
  if (jitter < 0) throw std::invalid_argument("env.jitter: must be >= 0");
  if (noun_count < 1) throw std::invalid_argument("env.nouns: must be >= 1");
  if (!(anchor_sigma > 0.0)) throw std::invalid_argument("env.anchor_sigma: must be > 0");
  if (jitter_retries < 1) throw std::invalid_argument("env.jitter_retries: must be >= 1");
}

GroundingEnv::GroundingEnv(GroundingConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.queries.empty())
    cfg_.queries = default_queries(cfg_.grid, cfg_.num_queries, cfg_.noun_count);
  cfg_.num_queries = static_cast<int>(cfg_.queries.size());
  validate_queries(cfg_.queries, cfg_.grid, cfg_.noun_count, "grounding");
  vocab_ = Vocab::with_template(cfg_.grid, cfg_.noun_count);
  position_classes_ = template_position_classes();

  valid_jitters_.resize(cfg_.queries.size());
  const int j = cfg_.jitter;
  for (std::size_t q = 0; q < cfg_.queries.size(); ++q) {
    const geom::BoundingBox& gt = cfg_.queries[q].gt;
    for (int d0 = -j; d0 <= j; ++d0)
      for (int d1 = -j; d1 <= j; ++d1)
        for (int d2 = -j; d2 <= j; ++d2)
          for (int d3 = -j; d3 <= j; ++d3) {
            const geom::BoundingBox b{gt.x1 + d0, gt.y1 + d1, gt.x2 + d2, gt.y2 + d3};
            if (geom::is_valid(b, cfg_.grid)) valid_jitters_[q].push_back(b);
          }
  }
}

geom::BoundingBox GroundingEnv::draw_jittered_gt(int query, RngStream& rng) const {
  const geom::BoundingBox& gt = cfg_.queries[query].gt;
  const int j = cfg_.jitter;
  if (j == 0) return gt;
  for (int attempt = 0; attempt < cfg_.jitter_retries; ++attempt) {
    const geom::BoundingBox b{gt.x1 + rng.next_int(-j, j), gt.y1 + rng.next_int(-j, j),
                              gt.x2 + rng.next_int(-j, j), gt.y2 + rng.next_int(-j, j)};
    if (geom::is_valid(b, cfg_.grid)) return b;
  }
  return gt;
}

rewards::RewardBreakdown GroundingEnv::reward(int query, std::span<const Token> tokens,
                                              RngStream& rng) const {
  const geom::BoundingBox jgt = draw_jittered_gt(query, rng);
  const auto box = rewards::extract_box(tokens, cfg_.grid, vocab_);
  const double acc = rewards::accuracy_reward(box, jgt);
  const int fmt = rewards::format_reward(tokens, vocab_);
  return rewards::RewardBreakdown::make(acc, fmt);
}

FactoredPolicy GroundingEnv::initial_policy() const {
  return anchored_policy(vocab_, cfg_.queries, cfg_.struct_boost, cfg_.noun_boost,
                         cfg_.anchor_sigma);
}

long long GroundingEnv::candidate_count() const { return pow_ll(cfg_.grid + 1, kAnswerDigits); }

double GroundingEnv::candidate_value(int query, long long index) const {
  const auto d = decode_tuple(index, cfg_.grid + 1);
  const geom::BoundingBox box{d[0], d[1], d[2], d[3]};
  if (!geom::is_valid(box, cfg_.grid)) return 0.0;
  const auto& jits = valid_jitters_[query];
  double s = 0.0;
  for (const geom::BoundingBox& jgt : jits) s += geom::iou(box, jgt);
  return s / static_cast<double>(jits.size());
}

double GroundingEnv::candidate_clean_value(int query, long long index) const {
  const auto d = decode_tuple(index, cfg_.grid + 1);
  const geom::BoundingBox box{d[0], d[1], d[2], d[3]};
  if (!geom::is_valid(box, cfg_.grid)) return 0.0;
  return geom::iou(box, cfg_.queries[query].gt);
}

double GroundingEnv::candidate_logprob(const FactoredPolicy& policy, int query,
                                       long long index) const {
  const auto d = decode_tuple(index, cfg_.grid + 1);
  double lp = 0.0;
  for (int k = 0; k < 4; ++k) {
    const auto row = policy.row(query, kAnswerSlot0 + k);
    lp += log_softmax(row)[vocab_.numeric(d[k])];
  }
  return lp;
}

EvalResult GroundingEnv::evaluate(const FactoredPolicy& policy, EvalMode mode) const {
  EvalResult res;
  const int nq = num_queries();
  if (mode == EvalMode::kGreedy) {
    for (int q = 0; q < nq; ++q) {
      const auto toks = greedy_tokens(policy, q);
      const auto box = rewards::extract_box(toks, cfg_.grid, vocab_);
      res.mean_score += rewards::accuracy_reward(box, cfg_.queries[q].gt);
      res.exact_match_rate += (box.has_value() && *box == cfg_.queries[q].gt) ? 1.0 : 0.0;
    }
  } else {
    // exact expectation over the answer-slot distribution, conditioned on a
    // well-formed template emission (each slot renormalized over numerics)
    const long long n = candidate_count();
    const int base = cfg_.grid + 1;
    for (int q = 0; q < nq; ++q) {
      std::array<std::vector<double>, 4> slot;
      for (int k = 0; k < 4; ++k) {
        const std::vector<double> p = softmax(policy.row(q, kAnswerSlot0 + k));
        slot[k].resize(base);
        double mass = 0.0;
        for (int v = 0; v < base; ++v) mass += p[vocab_.numeric(v)];
        for (int v = 0; v < base; ++v) slot[k][v] = p[vocab_.numeric(v)] / mass;
      }
      double score = 0.0, match = 0.0;
      for (long long i = 0; i < n; ++i) {
        const auto d = decode_tuple(i, base);
        const double p = slot[0][d[0]] * slot[1][d[1]] * slot[2][d[2]] * slot[3][d[3]];
        const double v = candidate_clean_value(q, i);
        score += p * v;
        if (v >= 1.0 - 1e-12) match += p;
      }
      res.mean_score += score;
      res.exact_match_rate += match;
    }
  }
  res.mean_score /= nq;
  res.exact_match_rate /= nq;
  return res;
}

void ReasoningConfig::validate() const {
  if (grid < 2) throw std::invalid_argument("env.grid: must be >= 2");
  if (num_queries < 1) throw std::invalid_argument("env.queries: must be >= 1");
  if (noun_count < 1) throw std::invalid_argument("env.nouns: must be >= 1");
  if (!(anchor_sigma > 0.0)) throw std::invalid_argument("env.anchor_sigma: must be > 0");
}

ReasoningEnv::ReasoningEnv(ReasoningConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.queries.empty())
    cfg_.queries = default_queries(cfg_.grid, cfg_.num_queries, cfg_.noun_count);
  cfg_.num_queries = static_cast<int>(cfg_.queries.size());
  validate_queries(cfg_.queries, cfg_.grid, cfg_.noun_count, "reasoning");
  vocab_ = Vocab::with_template(cfg_.grid, cfg_.noun_count);
  position_classes_ = template_position_classes();
  targets_.reserve(cfg_.queries.size());
  for (const GroundingQuery& q : cfg_.queries)
    targets_.push_back(template_sequence(vocab_, q.noun, q.gt));
}

rewards::RewardBreakdown ReasoningEnv::reward(int query, std::span<const Token> tokens,
                                              RngStream&) const {
  const auto& target = targets_[query];
  const bool match = tokens.size() == target.size() &&
                     std::equal(tokens.begin(), tokens.end(), target.begin());
  return rewards::RewardBreakdown::make(match ? 1.0 : 0.0, 0.0);
}

FactoredPolicy ReasoningEnv::initial_policy() const {
  return anchored_policy(vocab_, cfg_.queries, cfg_.struct_boost, cfg_.noun_boost,
                         cfg_.anchor_sigma);
}

long long ReasoningEnv::candidate_count() const { return pow_ll(cfg_.grid + 1, kAnswerDigits); }

double ReasoningEnv::candidate_value(int query, long long index) const {
  const auto d = decode_tuple(index, cfg_.grid + 1);
  const geom::BoundingBox& gt = cfg_.queries[query].gt;
  return (d[0] == gt.x1 && d[1] == gt.y1 && d[2] == gt.x2 && d[3] == gt.y2) ? 1.0 : 0.0;
}

double ReasoningEnv::candidate_clean_value(int query, long long index) const {
  return candidate_value(query, index);
}

double ReasoningEnv::candidate_logprob(const FactoredPolicy& policy, int query,
                                       long long index) const {
  const auto d = decode_tuple(index, cfg_.grid + 1);
  double lp = 0.0;
  for (int k = 0; k < 4; ++k) {
    const auto row = policy.row(query, GroundingEnv::kAnswerSlot0 + k);
    lp += log_softmax(row)[vocab_.numeric(d[k])];
  }
  return lp;
}

EvalResult ReasoningEnv::evaluate(const FactoredPolicy& policy, EvalMode mode) const {
  EvalResult res;
  const int nq = num_queries();
  for (int q = 0; q < nq; ++q) {
    if (mode == EvalMode::kGreedy) {
      const auto toks = greedy_tokens(policy, q);
      const bool match = toks == targets_[q];
      res.mean_score += match ? 1.0 : 0.0;
      res.exact_match_rate += match ? 1.0 : 0.0;
    } else {
      // conditional probability of the target answer tuple, each slot
      // renormalized over numerics
      const geom::BoundingBox& gt = cfg_.queries[q].gt;
      const int coords[4] = {gt.x1, gt.y1, gt.x2, gt.y2};
      double p = 1.0;
      for (int k = 0; k < 4; ++k) {
        const std::vector<double> probs =
            softmax(policy.row(q, GroundingEnv::kAnswerSlot0 + k));
        double mass = 0.0;
        for (int v = 0; v < cfg_.grid + 1; ++v) mass += probs[vocab_.numeric(v)];
        p *= probs[vocab_.numeric(coords[k])] / mass;
      }
      res.mean_score += p;
      res.exact_match_rate += p;
    }
  }
  res.mean_score /= nq;
  res.exact_match_rate /= nq;
  return res;
}

void BanditConfig::validate() const {
  if (max_action < 1) throw std::invalid_argument("env.actions: must span at least 2 actions");
  if (target < 0 || target > max_action)
    throw std::invalid_argument("env.target: out of action range");
  if (!(lambda > 0.0)) throw std::invalid_argument("env.lambda: must be > 0");
}

NumericBanditEnv::NumericBanditEnv(BanditConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  vocab_ = Vocab::numeric_only(cfg_.max_action + 1);
  position_classes_ = {TokenClass::kNumeric};
}

double NumericBanditEnv::action_reward(int action) const {
  if (action < 0 || action > cfg_.max_action)
    throw std::out_of_range("numeric bandit: action out of range");
  return rewards::numeric_decay_reward(action, cfg_.target, cfg_.lambda);
}

rewards::RewardBreakdown NumericBanditEnv::reward(int, std::span<const Token> tokens,
                                                  RngStream&) const {
  const int action = vocab_.numeric_value(tokens[0]);
  return rewards::RewardBreakdown::make(action_reward(action), 0.0);
}

FactoredPolicy NumericBanditEnv::initial_policy() const {
  return FactoredPolicy::uniform(1, 1, vocab_.size());
}

long long NumericBanditEnv::candidate_count() const { return cfg_.max_action + 1; }

double NumericBanditEnv::candidate_value(int, long long index) const {
  return action_reward(static_cast<int>(index));
}

double NumericBanditEnv::candidate_clean_value(int query, long long index) const {
  return candidate_value(query, index);
}

double NumericBanditEnv::candidate_logprob(const FactoredPolicy& policy, int query,
                                           long long index) const {
  const auto row = policy.row(query, 0);
  return log_softmax(row)[static_cast<Token>(index)];
}

EvalResult NumericBanditEnv::evaluate(const FactoredPolicy& policy, EvalMode mode) const {
  EvalResult res;
  if (mode == EvalMode::kGreedy) {
    const auto row = policy.row(0, 0);
    const int action =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    res.mean_score = action_reward(action);
    res.exact_match_rate = action == cfg_.target ? 1.0 : 0.0;
  } else {
    const std::vector<double> p = softmax(policy.row(0, 0));
    for (int a = 0; a <= cfg_.max_action; ++a) res.mean_score += p[a] * action_reward(a);
    res.exact_match_rate = p[cfg_.target];
  }
  return res;
}

}  // namespace eclab::envs
