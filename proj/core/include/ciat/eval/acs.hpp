#pragma once

#include <utility>
#include <vector>

#include "ciat/adapters/model_view.hpp"
#include "ciat/text/corpus.hpp"
#include "ciat/text/vocabulary.hpp"

namespace ciat::eval {

struct AcsReport {
  double mean = 0.0;
  std::size_t retained = 0;
  std::size_t skipped = 0;  // multi-token words, unknown words, zero vectors
  std::vector<double> cosines;
};

// Mean cosine between rows of `table` (vocab, d) for each id pair.
// Pairs touching a zero vector are skipped. Throws if none remain.
template <typename T>
AcsReport acs(const Tensor<T>& table, const std::vector<std::pair<text::TokenId, text::TokenId>>& pairs);

// Looks up dictionary words as single vocabulary tokens (word marker
// included); entries beyond the first `top_k` (0 = all) are ignored.
template <typename T>
AcsReport acs(const Tensor<T>& table, const text::Dictionary& dictionary, const text::Vocabulary& vocab,
              const text::BpeModel& bpe, std::size_t top_k);

// Embedding table seen by the model on `side`: the raw matrix, or
// E - G(E) when an embedding adapter is plugged and enabled.
template <typename T>
Tensor<T> embedding_view(const adapters::ModelView<T>& view, model::Side side);

}  // namespace ciat::eval
