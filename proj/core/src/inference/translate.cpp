#include "ciat/inference/translate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "ciat/error.hpp"
#include "ciat/numerics/ops.hpp"

namespace ciat::inference {

namespace {

template <typename T>
model::ForwardOptions<T> plain_options(const model::SiteHooks<T>* hooks) {
  model::ForwardOptions<T> o;
  o.hooks = hooks;
  return o;
}

}  // namespace

template <typename T>
ModelScorer<T>::ModelScorer(const model::Transformer<T>& model, const model::SiteHooks<T>* hooks,
                            const std::vector<TokenId>& src)
    : model_(model), options_(plain_options(hooks)) {
  NoGradGuard no_grad;
  encoded_ = model_.encode(text::IdMatrix::from_rows({src}), options_);
}

template <typename T>
std::vector<std::vector<double>> ModelScorer<T>::log_probs(const std::vector<std::vector<TokenId>>& prefixes) const {
  NoGradGuard no_grad;
  const auto enc = encoded_.select(std::vector<std::size_t>(prefixes.size(), 0));
  const Tensor<T> logits = model_.decode_step(enc, text::IdMatrix::from_rows(prefixes), options_);
  const Tensor<T> lp = ops::log_softmax_rows(logits);
  const std::size_t v = lp.last_dim();
  std::vector<std::vector<double>> out(prefixes.size());
  for (std::size_t r = 0; r < prefixes.size(); ++r) {
    out[r].assign(lp.raw() + r * v, lp.raw() + (r + 1) * v);
  }
  return out;
}

template <typename T>
BeamResult translate_ids(const adapters::ModelView<T>& view, const std::vector<TokenId>& src,
                         const BeamOptions& beam) {
  BeamOptions b = beam;
  const std::size_t cap = view.base().config().max_len - 1;
  if (b.max_len == 0) b.max_len = std::min(2 * src.size() + 10, cap);
  b.max_len = std::min(b.max_len, cap);
  ModelScorer<T> scorer(view.base(), &view, src);
  return beam_search(scorer, b);
}

template <typename T>
TranslateOutput translate(const adapters::ModelView<T>& view, const text::Vocabulary& vocab,
                          const text::BpeModel& bpe, const std::vector<std::string>& sources,
                          const text::LanguagePair& pair, const TranslateOptions& options) {
  vocab.tag_id(pair.tgt);  // throws when the target language has no tag
  view.check_pair(pair, options.strict);
  TranslateOutput out;
  out.tokens.resize(sources.size());
  out.sentences.resize(sources.size());
  std::vector<char> finished(sources.size(), 1);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < sources.size(); i = next++) {
        const auto src = text::encode_source(sources[i], pair.tgt, vocab, bpe);
        const auto r = translate_ids(view, src, options.beam);
        out.tokens[i] = r.best.output();
        out.sentences[i] = text::detokenize(out.tokens[i], vocab);
        finished[i] = r.finished ? 1 : 0;
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = sources.size();
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(options.threads, sources.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  out.unfinished = static_cast<std::size_t>(std::count(finished.begin(), finished.end(), 0));
  return out;
}

template class ModelScorer<float>;
template class ModelScorer<double>;
template BeamResult translate_ids(const adapters::ModelView<float>&, const std::vector<TokenId>&, const BeamOptions&);
template BeamResult translate_ids(const adapters::ModelView<double>&, const std::vector<TokenId>&, const BeamOptions&);
template TranslateOutput translate(const adapters::ModelView<float>&, const text::Vocabulary&, const text::BpeModel&,
                                   const std::vector<std::string>&, const text::LanguagePair&,
                                   const TranslateOptions&);
template TranslateOutput translate(const adapters::ModelView<double>&, const text::Vocabulary&,
                                   const text::BpeModel&, const std::vector<std::string>&,
                                   const text::LanguagePair&, const TranslateOptions&);

}  // namespace ciat::inference
