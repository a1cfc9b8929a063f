#pragma once

#include <cassert>
#include <cstdint>
#include <string>

namespace eclab {

using Token = std::int32_t;

enum class TokenClass { kStructural, kNoun, kNumeric };

// Token id layout: structural tags first, then noun tokens, then numeric
// tokens for the values 0..numeric_count-1. The partition covers the
// vocabulary exactly once. Environments without a think/answer template
// (the numeric bandit) use a numerics-only vocabulary.
struct Vocab {
  int structural_count = 0;
  int noun_count = 0;
  int numeric_count = 0;

  // structural tag ids, valid when structural_count == 6
  static constexpr Token kThinkOpen = 0;
  static constexpr Token kThinkClose = 1;
  static constexpr Token kAnswerOpen = 2;
  static constexpr Token kAnswerClose = 3;
  static constexpr Token kBraceOpen = 4;
  static constexpr Token kBraceClose = 5;

  static Vocab with_template(int grid, int nouns) { return Vocab{6, nouns, grid + 1}; }
  static Vocab numeric_only(int count) { return Vocab{0, 0, count}; }

  int size() const { return structural_count + noun_count + numeric_count; }

  Token noun(int i) const {
    assert(i >= 0 && i < noun_count);
    return structural_count + i;
  }
  Token numeric(int value) const {
    assert(value >= 0 && value < numeric_count);
    return structural_count + noun_count + value;
  }

  bool is_structural(Token t) const { return t >= 0 && t < structural_count; }
  bool is_noun(Token t) const { return t >= structural_count && t < structural_count + noun_count; }
  bool is_numeric(Token t) const { return t >= structural_count + noun_count && t < size(); }

  int numeric_value(Token t) const {
    assert(is_numeric(t));
    return t - structural_count - noun_count;
  }

  TokenClass token_class(Token t) const {
    if (is_structural(t)) return TokenClass::kStructural;
    if (is_noun(t)) return TokenClass::kNoun;
    return TokenClass::kNumeric;
  }

  std::string spell(Token t) const;
};

}  // namespace eclab
