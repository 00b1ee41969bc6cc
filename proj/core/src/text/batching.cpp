#include "ciat/text/batching.hpp"

#include <algorithm>
#include <random>

#include "ciat/error.hpp"

namespace ciat::text {

std::size_t IdMatrix::non_pad_count() const {
  return static_cast<std::size_t>(
      std::count_if(ids.begin(), ids.end(), [](TokenId id) { return id != Vocabulary::kPad; }));
}

IdMatrix IdMatrix::from_rows(const std::vector<std::vector<TokenId>>& rows) {
  IdMatrix m;
  m.rows = rows.size();
  for (const auto& r : rows) m.cols = std::max(m.cols, r.size());
  m.ids.assign(m.rows * m.cols, Vocabulary::kPad);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.ids.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  return m;
}

Batch make_batch(std::span<const Example> examples) {
  if (examples.empty()) throw Error("make_batch: no examples");
  std::vector<std::vector<TokenId>> src, tin, tout;
  Batch batch;
  for (const auto& ex : examples) {
    src.push_back(ex.src);
    std::vector<TokenId> in{Vocabulary::kBos};
    in.insert(in.end(), ex.tgt.begin(), ex.tgt.end());
    std::vector<TokenId> out(ex.tgt.begin(), ex.tgt.end());
    out.push_back(Vocabulary::kEos);
    tin.push_back(std::move(in));
    tout.push_back(std::move(out));
    batch.corpus_index.push_back(ex.corpus_index);
    batch.line.push_back(ex.line);
  }
  batch.src = IdMatrix::from_rows(src);
  batch.tgt_in = IdMatrix::from_rows(tin);
  batch.tgt_out = IdMatrix::from_rows(tout);
  return batch;
}

std::vector<Example> encode_corpus(const ParallelCorpus& corpus, std::size_t corpus_index,
                                   const Vocabulary& vocab, const BpeModel& bpe) {
  corpus.validate();
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Example ex;
    ex.src = encode_source(corpus.source[i], corpus.pair.tgt, vocab, bpe);
    ex.tgt = encode_target(corpus.target[i], vocab, bpe);
    ex.corpus_index = corpus_index;
    ex.line = i;
    out.push_back(std::move(ex));
  }
  return out;
}

BatchPlan batch_examples(std::vector<Example> examples, std::size_t max_tokens, std::uint64_t seed) {
  if (max_tokens == 0) throw Error("max_tokens must be positive");
  BatchPlan plan;
  std::vector<Example> kept;
  kept.reserve(examples.size());
  for (auto& ex : examples) {
    if (ex.cost() > max_tokens)
      ++plan.skipped;
    else
      kept.push_back(std::move(ex));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(kept.begin(), kept.end(), rng);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Example& a, const Example& b) { return a.cost() < b.cost(); });

  std::size_t begin = 0;
  while (begin < kept.size()) {
    std::size_t end = begin;
    std::size_t longest = 0;
    while (end < kept.size()) {
      const std::size_t widest = std::max(longest, kept[end].cost());
      if ((end - begin + 1) * widest > max_tokens) break;
      longest = widest;
      ++end;
    }
    plan.batches.push_back(make_batch(std::span<const Example>(kept.data() + begin, end - begin)));
    begin = end;
  }
  std::shuffle(plan.batches.begin(), plan.batches.end(), rng);
  return plan;
}

BatchPlan build_batches(const std::vector<ParallelCorpus>& corpora, const Vocabulary& vocab,
                        const BpeModel& bpe, std::size_t max_tokens, std::uint64_t seed) {
  std::vector<Example> all;
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    auto ex = encode_corpus(corpora[i], i, vocab, bpe);
    all.insert(all.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return batch_examples(std::move(all), max_tokens, seed);
}

}  // namespace ciat::text
