#pragma once

#include <optional>
#include <span>

#include "eclab/geometry.hpp"
#include "eclab/tokens.hpp"

namespace eclab::rewards {

// accuracy in [0,1], format in {0,1}, total = accuracy + format
struct RewardBreakdown {
  double accuracy = 0.0;
  double format = 0.0;
  double total = 0.0;

  static RewardBreakdown make(double accuracy, double format) {
    return RewardBreakdown{accuracy, format, accuracy + format};
  }
};

// IoU against the ground truth; 0 when the output was unparseable
double accuracy_reward(const std::optional<geom::BoundingBox>& predicted,
                       const geom::BoundingBox& gt);

// 1 iff the sequence matches
//   <think> FREE* </think> <answer> { NUM NUM NUM NUM } </answer>
// with nothing outside the slots. FREE tokens are any non-structural tokens.
int format_reward(std::span<const Token> tokens, const Vocab& vocab);

// The four answer-slot numerics as (x1,y1,x2,y2), present only when the
// format matches and the box invariants hold on [0, grid].
std::optional<geom::BoundingBox> extract_box(std::span<const Token> tokens, int grid,
                                             const Vocab& vocab);

// binary exact-match reward
int reasoning_reward(long long answer, long long target);

// max(0, 1 - lambda * |answer - target|); rejects lambda <= 0
double numeric_decay_reward(long long answer, long long target, double lambda);

}  // namespace eclab::rewards
