#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ciat/inference/beam_search.hpp"

namespace ciat::fixtures {

// Prefix-dependent random distributions over a tiny vocabulary. Token 0 is
// BOS, token 1 is EOS; every token (BOS included) may be generated.
class ToyScorer : public inference::StepScorer {
 public:
  ToyScorer(std::size_t vocab, std::uint64_t seed) : vocab_(vocab), seed_(seed) {}
  std::size_t vocab_size() const override { return vocab_; }
  text::TokenId bos() const override { return 0; }
  text::TokenId eos() const override { return 1; }

  std::vector<double> row(const std::vector<text::TokenId>& prefix) const {
    std::uint64_t h = seed_ * 0x9E3779B97F4A7C15ULL;
    for (auto t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 0x100000001B3ULL;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> z(vocab_);
    double m = -std::numeric_limits<double>::infinity(), s = 0;
    for (auto& v : z) m = std::max(m, v = u(rng));
    for (double v : z) s += std::exp(v - m);
    for (auto& v : z) v -= m + std::log(s);
    return z;
  }

  std::vector<std::vector<double>> log_probs(const std::vector<std::vector<text::TokenId>>& prefixes) const override {
    std::vector<std::vector<double>> out;
    for (const auto& p : prefixes) out.push_back(row(p));
    return out;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
};

// Best EOS-terminated sequence of at most `max_len` generated tokens by
// exhaustive enumeration; ties go to the lexicographically smaller sequence.
inline inference::Hypothesis exhaustive_best(const ToyScorer& scorer, std::size_t max_len, double alpha) {
  inference::Hypothesis best;
  bool have = false;
  std::vector<std::pair<std::vector<text::TokenId>, double>> frontier{{{scorer.bos()}, 0.0}};
  for (std::size_t t = 1; t <= max_len; ++t) {
    std::vector<std::pair<std::vector<text::TokenId>, double>> next;
    for (const auto& [prefix, lp] : frontier) {
      const auto row = scorer.row(prefix);
      for (std::size_t w = 0; w < row.size(); ++w) {
        auto seq = prefix;
        seq.push_back(static_cast<text::TokenId>(w));
        const double total = lp + row[w];
        if (seq.back() == scorer.eos()) {
          const double score = total / inference::length_penalty(t, alpha);
          if (!have || score > best.score || (score == best.score && seq < best.tokens)) {
            best = {seq, total, score, true};
            have = true;
          }
        } else {
          next.emplace_back(std::move(seq), total);
        }
      }
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace ciat::fixtures
