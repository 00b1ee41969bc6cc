#include "ciat/eval/acs.hpp"

#include <cmath>

#include "ciat/error.hpp"

namespace ciat::eval {

template <typename T>
AcsReport acs(const Tensor<T>& table, const std::vector<std::pair<text::TokenId, text::TokenId>>& pairs) {
  if (table.rank() != 2) throw ShapeError("acs expects a (vocab, d) table, got " + shape_str(table.shape()));
  const std::size_t v = table.dim(0), d = table.dim(1);
  AcsReport r;
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= v || static_cast<std::size_t>(b) >= v) {
      throw Error("acs: token id outside the embedding table");
    }
    const T* x = table.raw() + static_cast<std::size_t>(a) * d;
    const T* y = table.raw() + static_cast<std::size_t>(b) * d;
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dot += static_cast<double>(x[i]) * static_cast<double>(y[i]);
      nx += static_cast<double>(x[i]) * static_cast<double>(x[i]);
      ny += static_cast<double>(y[i]) * static_cast<double>(y[i]);
    }
    if (nx == 0.0 || ny == 0.0) {
      ++r.skipped;
      continue;
    }
    const double c = dot / (std::sqrt(nx) * std::sqrt(ny));
    r.cosines.push_back(c);
    sum += c;
  }
  r.retained = r.cosines.size();
  if (r.retained == 0) throw Error("acs: no dictionary pair could be scored");
  r.mean = sum / static_cast<double>(r.retained);
  return r;
}

template <typename T>
AcsReport acs(const Tensor<T>& table, const text::Dictionary& dictionary, const text::Vocabulary& vocab,
              const text::BpeModel& bpe, std::size_t top_k) {
  auto single = [&](const std::string& word) -> std::optional<text::TokenId> {
    const auto pieces = bpe.segment_word(word);
    if (pieces.size() != 1) return std::nullopt;
    return vocab.find(pieces[0]);
  };
  std::vector<std::pair<text::TokenId, text::TokenId>> ids;
  std::size_t unmapped = 0;
  const std::size_t n = top_k == 0 ? dictionary.size() : std::min(top_k, dictionary.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = single(dictionary[i].first);
    const auto b = single(dictionary[i].second);
    if (a && b) ids.emplace_back(*a, *b);
    else ++unmapped;
  }
  if (ids.empty()) throw Error("acs: none of the dictionary words is a single vocabulary token");
  AcsReport r = acs(table, ids);
  r.skipped += unmapped;
  return r;
}

template <typename T>
Tensor<T> embedding_view(const adapters::ModelView<T>& view, model::Side side) {
  NoGradGuard no_grad;
  const auto& base = view.base().params().get(side == model::Side::encoder ? "enc.embed" : "dec.embed");
  return view.embedding_table(side, base, nullptr).value();
}

#define CIAT_ACS(T)                                                                                       \
  template AcsReport acs(const Tensor<T>&, const std::vector<std::pair<text::TokenId, text::TokenId>>&); \
  template AcsReport acs(const Tensor<T>&, const text::Dictionary&, const text::Vocabulary&,             \
                         const text::BpeModel&, std::size_t);                                            \
  template Tensor<T> embedding_view(const adapters::ModelView<T>&, model::Side);
CIAT_ACS(float)
CIAT_ACS(double)
#undef CIAT_ACS

}  // namespace ciat::eval
