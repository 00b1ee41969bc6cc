#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ciat/eval/bleu.hpp"

namespace ciat::fixtures {

struct BleuCase {
  std::string name;
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  eval::BleuOptions options;
  double expected;
};

// Scores worked out by hand from clipped n-gram counts and lengths.
inline std::vector<BleuCase> bleu_cases() {
  const auto geo = [](double p1, double p2, double p3, double p4) { return std::pow(p1 * p2 * p3 * p4, 0.25); };
  eval::BleuOptions smooth;
  smooth.smooth = true;
  return {
      {"identical", {"the cat sat on the mat"}, {"the cat sat on the mat"}, {}, 100.0},
      {"repeated_unigram", {"the the the the the"}, {"the cat sat"}, {}, 0.0},
      {"one_substitution", {"the cat sat on the mat"}, {"the cat sat on a mat"}, {},
       100.0 * geo(5.0 / 6, 3.0 / 5, 2.0 / 4, 1.0 / 3)},
      {"short_prefix", {"the cat sat on"}, {"the cat sat on the mat"}, {}, 100.0 * std::exp(1.0 - 6.0 / 4)},
      {"two_sentences", {"a b c d", "e f g h"}, {"a b c d", "e f x h"}, {},
       100.0 * geo(7.0 / 8, 4.0 / 6, 2.0 / 4, 1.0 / 2)},
      {"longer_hypothesis", {"a b c d e"}, {"a b c d"}, {}, 100.0 * geo(4.0 / 5, 3.0 / 4, 2.0 / 3, 1.0 / 2)},
      {"clipped_no_fourgram", {"a a b a a b"}, {"a a b b"}, {}, 0.0},
      {"clipped_smoothed", {"a a b a a b"}, {"a a b b"}, smooth, 100.0 * geo(4.0 / 6, 2.0 / 5, 1.0 / 4, 0.1 / 3)},
      {"corpus_brevity", {"a b", "c d e f"}, {"a b x", "c d e f g"}, {}, 100.0 * std::exp(1.0 - 8.0 / 6)},
      {"empty_hypothesis_line", {"", "a b c d"}, {"x y", "a b c d"}, {}, 100.0 * std::exp(1.0 - 6.0 / 4)},
  };
}

}  // namespace ciat::fixtures
