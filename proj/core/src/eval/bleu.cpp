#include "ciat/eval/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ciat/error.hpp"
#include "ciat/text/corpus.hpp"

namespace ciat::eval {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(const std::vector<std::string>& words, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) ++counts[Ngram(words.begin() + i, words.begin() + i + n)];
  return counts;
}

}  // namespace

BleuReport bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                const BleuOptions& options) {
  if (hypotheses.size() != references.size()) {
    throw Error("bleu: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                std::to_string(references.size()) + " references");
  }
  BleuReport r;
  r.smoothed = options.smooth;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = text::split_words(hypotheses[s]);
    const auto ref = text::split_words(references[s]);
    if (ref.empty()) throw Error("bleu: reference sentence " + std::to_string(s + 1) + " is empty");
    r.hyp_length += hyp.size();
    r.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = count_ngrams(hyp, n);
      const auto g = count_ngrams(ref, n);
      for (const auto& [gram, c] : h) {
        auto it = g.find(gram);
        if (it != g.end()) r.matches[n - 1] += std::min(c, it->second);
      }
      if (hyp.size() >= n) r.totals[n - 1] += hyp.size() - n + 1;
    }
  }
  if (r.hyp_length == 0) return r;

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    if (r.totals[n] == 0) {
      zero = true;
      continue;
    }
    double p = static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]);
    if (r.matches[n] == 0 && options.smooth) p = options.epsilon / static_cast<double>(r.totals[n]);
    r.precisions[n] = p;
    if (p == 0.0) zero = true;
    else log_sum += std::log(p);
  }
  if (r.hyp_length < r.ref_length) {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  if (zero) return r;
  r.score = 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

}  // namespace ciat::eval
