#include "ciat/inference/beam_search.hpp"

#include <algorithm>
#include <cmath>

#include "ciat/error.hpp"

namespace ciat::inference {

double length_penalty(std::size_t length, double alpha) {
  if (length == 0) throw Error("length penalty needs length >= 1");
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

std::vector<TokenId> Hypothesis::output() const {
  std::vector<TokenId> out(tokens.begin() + (tokens.empty() ? 0 : 1), tokens.end());
  if (finished && !out.empty()) out.pop_back();
  return out;
}

namespace {

bool better_alive(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

bool better_finished(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

BeamResult beam_search(const StepScorer& scorer, const BeamOptions& options) {
  if (options.beam == 0) throw Error("beam width must be at least 1");
  if (options.max_len == 0) throw Error("beam search needs max_len >= 1");
  const std::size_t vocab = scorer.vocab_size();
  const TokenId eos = scorer.eos();

  std::vector<Hypothesis> alive(1);
  alive[0].tokens = {scorer.bos()};
  std::vector<Hypothesis> pool;
  const double full_lp = length_penalty(options.max_len, options.alpha);
  BeamResult result;

  for (std::size_t t = 1; t <= options.max_len && !alive.empty(); ++t) {
    result.steps = t;
    std::vector<std::vector<TokenId>> prefixes;
    prefixes.reserve(alive.size());
    for (const auto& h : alive) prefixes.push_back(h.tokens);
    const auto lp = scorer.log_probs(prefixes);
    if (lp.size() != alive.size()) throw Error("scorer returned the wrong number of rows");

    std::vector<Hypothesis> candidates;
    candidates.reserve(alive.size() * vocab);
    for (std::size_t i = 0; i < alive.size(); ++i) {
      if (lp[i].size() != vocab) throw Error("scorer returned the wrong vocabulary size");
      for (std::size_t w = 0; w < vocab; ++w) {
        if (lp[i][w] == -INFINITY) continue;
        Hypothesis c;
        c.tokens = alive[i].tokens;
        c.tokens.push_back(static_cast<TokenId>(w));
        c.log_prob = alive[i].log_prob + lp[i][w];
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better_alive);

    // EOS candidates ranked above the beam-th continuation finish; the
    // rest refill the beam.
    std::vector<Hypothesis> next;
    for (auto& c : candidates) {
      if (next.size() == options.beam) break;
      if (c.tokens.back() == eos) {
        c.finished = true;
        c.score = c.log_prob / length_penalty(t, options.alpha);
        pool.push_back(std::move(c));
      } else {
        next.push_back(std::move(c));
      }
    }
    alive = std::move(next);

    if (!pool.empty() && !alive.empty()) {
      const auto best = std::min_element(pool.begin(), pool.end(), better_finished);
      // log-probs only fall as tokens are added and the penalty grows with
      // length, so this bounds every continuation of the best alive entry.
      const double bound = alive.front().log_prob / full_lp;
      if (bound < best->score) break;
    }
  }

  if (!pool.empty()) {
    result.best = *std::min_element(pool.begin(), pool.end(), better_finished);
    return result;
  }
  result.finished = false;
  if (!alive.empty()) result.best = *std::min_element(alive.begin(), alive.end(), better_alive);
  else result.best.tokens = {scorer.bos()};
  return result;
}

}  // namespace ciat::inference
