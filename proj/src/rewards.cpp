#include "eclab/rewards.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace eclab::rewards {

double accuracy_reward(const std::optional<geom::BoundingBox>& predicted,
                       const geom::BoundingBox& gt) {
  if (!predicted.has_value()) return 0.0;
  return geom::iou(*predicted, gt);
}

int format_reward(std::span<const Token> tokens, const Vocab& vocab) {
  if (vocab.structural_count != 6) return 0;  // vocabulary has no template tags
  std::size_t i = 0;
  const std::size_t n = tokens.size();
  auto expect = [&](Token want) {
    if (i >= n || tokens[i] != want) return false;
    ++i;
    return true;
  };

  if (!expect(Vocab::kThinkOpen)) return 0;
  while (i < n && !vocab.is_structural(tokens[i])) ++i;  // free think slot
  if (!expect(Vocab::kThinkClose)) return 0;
  if (!expect(Vocab::kAnswerOpen)) return 0;
  if (!expect(Vocab::kBraceOpen)) return 0;
  for (int k = 0; k < 4; ++k) {
    if (i >= n || !vocab.is_numeric(tokens[i])) return 0;
    ++i;
  }
  if (!expect(Vocab::kBraceClose)) return 0;
  if (!expect(Vocab::kAnswerClose)) return 0;
  return i == n ? 1 : 0;
}

std::optional<geom::BoundingBox> extract_box(std::span<const Token> tokens, int grid,
                                             const Vocab& vocab) {
  if (format_reward(tokens, vocab) != 1) return std::nullopt;
  // format guarantees a unique '{' followed by exactly four numerics
  std::size_t i = 0;
  while (tokens[i] != Vocab::kBraceOpen) ++i;
  const int x1 = vocab.numeric_value(tokens[i + 1]);
  const int y1 = vocab.numeric_value(tokens[i + 2]);
  const int x2 = vocab.numeric_value(tokens[i + 3]);
  const int y2 = vocab.numeric_value(tokens[i + 4]);
  const geom::BoundingBox box{x1, y1, x2, y2};
  if (!geom::is_valid(box, grid)) return std::nullopt;
  return box;
}

int reasoning_reward(long long answer, long long target) { return answer == target ? 1 : 0; }

double numeric_decay_reward(long long answer, long long target, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("numeric_decay_reward: lambda must be > 0");
  const double dist = std::abs(static_cast<double>(answer - target));
  return std::max(0.0, 1.0 - lambda * dist);
}

}  // namespace eclab::rewards
