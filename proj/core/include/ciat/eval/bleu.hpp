#pragma once

#include <array>
#include <string>
#include <vector>

namespace ciat::eval {

struct BleuOptions {
  bool smooth = false;  // zero n-gram matches count as epsilon / total
  double epsilon = 0.1;
};

struct BleuReport {
  double score = 0.0;                   // 0..100
  std::array<double, 4> precisions{};   // clipped, 0..1
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 1.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  bool smoothed = false;
};

// Corpus 4-gram BLEU over whitespace tokens, single reference, with clipped
// counts and brevity penalty exp(1 - r/c) when c < r. Without smoothing a
// zero precision gives 0.
BleuReport bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                const BleuOptions& options = {});

}  // namespace ciat::eval
