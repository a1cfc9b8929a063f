#include "eclab/tokens.hpp"

namespace eclab {

std::string Vocab::spell(Token t) const {
  if (is_structural(t)) {
    switch (t) {
      case kThinkOpen: return "<think>";
      case kThinkClose: return "</think>";
      case kAnswerOpen: return "<answer>";
      case kAnswerClose: return "</answer>";
      case kBraceOpen: return "{";
      case kBraceClose: return "}";
      default: return "?";
    }
  }
  if (is_noun(t)) return "noun_" + std::to_string(t - structural_count);
  if (is_numeric(t)) return std::to_string(numeric_value(t));
  return "?";
}

}  // namespace eclab
