#pragma once

#include <string>
#include <vector>

#include "ciat/text/vocabulary.hpp"

namespace ciat::inference {

using text::TokenId;

// ((5 + length) / 6)^alpha; length counts generated tokens including EOS.
double length_penalty(std::size_t length, double alpha);

// Next-token log-probabilities for a set of equal-length BOS-led prefixes.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<std::vector<double>> log_probs(const std::vector<std::vector<TokenId>>& prefixes) const = 0;
  virtual TokenId bos() const { return text::Vocabulary::kBos; }
  virtual TokenId eos() const { return text::Vocabulary::kEos; }
};

struct BeamOptions {
  std::size_t beam = 4;
  double alpha = 0.6;
  std::size_t max_len = 0;  // generated tokens including EOS; 0 = caller decides
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // BOS first
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length_penalty (finished only)
  bool finished = false;

  // Generated tokens without BOS and the final EOS.
  std::vector<TokenId> output() const;
};

struct BeamResult {
  Hypothesis best;
  bool finished = true;  // false: no hypothesis ended within max_len
  std::size_t steps = 0;
};

// Alive hypotheses are ranked by raw log-probability; hypotheses that emit
// EOS move to a finished pool ranked by penalized score. Search stops once
// the best alive hypothesis cannot beat the pool even at full length.
// Equal scores are resolved by the lexicographically smaller token sequence.
BeamResult beam_search(const StepScorer& scorer, const BeamOptions& options);

}  // namespace ciat::inference
