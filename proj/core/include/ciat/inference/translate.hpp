#pragma once

#include <string>
#include <vector>

#include "ciat/adapters/model_view.hpp"
#include "ciat/inference/beam_search.hpp"
#include "ciat/text/bpe.hpp"
#include "ciat/text/vocabulary.hpp"

namespace ciat::inference {

// Scores prefixes with a model view for one encoded source sentence.
template <typename T>
class ModelScorer : public StepScorer {
 public:
  ModelScorer(const model::Transformer<T>& model, const model::SiteHooks<T>* hooks, const std::vector<TokenId>& src);

  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::vector<std::vector<double>> log_probs(const std::vector<std::vector<TokenId>>& prefixes) const override;

 private:
  const model::Transformer<T>& model_;
  model::ForwardOptions<T> options_;
  model::EncoderState<T> encoded_;
};

struct TranslateOptions {
  BeamOptions beam;          // max_len 0: min(2 * source length + 10, model max_len - 1)
  std::size_t threads = 1;
  bool strict = true;        // plugged bank must serve the pair
};

struct TranslateOutput {
  std::vector<std::vector<TokenId>> tokens;
  std::vector<std::string> sentences;
  std::size_t unfinished = 0;  // sentences returned without EOS
};

// Beam-search token ids for one encoded source sentence.
template <typename T>
BeamResult translate_ids(const adapters::ModelView<T>& view, const std::vector<TokenId>& src,
                         const BeamOptions& beam);

// Encodes, decodes and detokenizes every sentence; output order follows
// input order regardless of thread count.
template <typename T>
TranslateOutput translate(const adapters::ModelView<T>& view, const text::Vocabulary& vocab,
                          const text::BpeModel& bpe, const std::vector<std::string>& sources,
                          const text::LanguagePair& pair, const TranslateOptions& options);

}  // namespace ciat::inference
