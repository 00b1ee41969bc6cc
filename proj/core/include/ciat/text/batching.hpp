#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ciat/text/vocabulary.hpp"

namespace ciat::text {

// Row-major (rows, cols) id grid, right-padded with PAD.
struct IdMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> ids;

  TokenId at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  std::span<const TokenId> row(std::size_t r) const { return {ids.data() + r * cols, cols}; }
  bool is_pad(std::size_t r, std::size_t c) const { return at(r, c) == Vocabulary::kPad; }
  std::size_t non_pad_count() const;

  static IdMatrix from_rows(const std::vector<std::vector<TokenId>>& rows);
};

struct Example {
  std::vector<TokenId> src;  // tag ... EOS
  std::vector<TokenId> tgt;  // subwords only
  std::size_t corpus_index = 0;
  std::size_t line = 0;

  // Padded-token footprint used for bucketing.
  std::size_t cost() const { return std::max(src.size(), tgt.size() + 1); }
};

// Teacher-forced batch: decoder input is BOS + tgt, output is tgt + EOS.
struct Batch {
  IdMatrix src;
  IdMatrix tgt_in;
  IdMatrix tgt_out;
  std::vector<std::size_t> corpus_index;
  std::vector<std::size_t> line;

  std::size_t size() const { return src.rows; }
};

Batch make_batch(std::span<const Example> examples);

std::vector<Example> encode_corpus(const ParallelCorpus& corpus, std::size_t corpus_index,
                                   const Vocabulary& vocab, const BpeModel& bpe);

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t skipped = 0;  // examples longer than max_tokens
};

// Buckets by length so rows * longest cost stays within max_tokens, then
// shuffles batch order. Every kept example appears exactly once, so corpora
// contribute in proportion to their size.
BatchPlan batch_examples(std::vector<Example> examples, std::size_t max_tokens, std::uint64_t seed);

BatchPlan build_batches(const std::vector<ParallelCorpus>& corpora, const Vocabulary& vocab,
                        const BpeModel& bpe, std::size_t max_tokens, std::uint64_t seed);

}  // namespace ciat::text
