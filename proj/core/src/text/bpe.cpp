#include "ciat/text/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ciat/error.hpp"
#include "ciat/text/vocabulary.hpp"

namespace ciat::text {

std::vector<std::string> utf8_symbols(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8)
      len = 4;
    else if (lead >= 0xE0)
      len = 3;
    else if (lead >= 0xC0)
      len = 2;
    if (lead >= 0xF8 || i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

BpeModel::BpeModel(std::vector<std::string> alphabet, std::vector<Merge> merges)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) rank_.emplace(merges_[i], i);
}

namespace {

std::vector<std::string> word_symbols(std::string_view word) {
  std::vector<std::string> symbols{std::string(kWordMarker)};
  for (auto& s : utf8_symbols(word)) symbols.push_back(std::move(s));
  return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const Merge& merge) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == merge.first && symbols[i + 1] == merge.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::vector<std::string> BpeModel::segment_word(std::string_view word) const {
  auto symbols = word_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = rank_.size();
    const Merge* best = nullptr;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find(Merge{symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    apply_merge(symbols, *best);
  }
  return symbols;
}

std::vector<std::string> BpeModel::segment(const std::string& sentence) const {
  std::vector<std::string> out;
  for (const auto& word : split_words(sentence)) {
    auto pieces = segment_word(word);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()),
               std::make_move_iterator(pieces.end()));
  }
  return out;
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "bpe-v1 " << alphabet_.size() << "\n";
  for (const auto& s : alphabet_) out << s << "\n";
  for (const auto& [a, b] : merges_) out << a << " " << b << "\n";
}

BpeModel BpeModel::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty BPE model");
  std::istringstream header(line);
  std::string tag;
  std::size_t count = 0;
  if (!(header >> tag >> count) || tag != "bpe-v1") {
    throw FormatError("BPE model header must be 'bpe-v1 <alphabet-size>'");
  }
  std::vector<std::string> alphabet;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line) || line.empty()) {
      throw FormatError("BPE model truncated in alphabet at entry " + std::to_string(i));
    }
    alphabet.push_back(line);
  }
  std::vector<Merge> merges;
  std::size_t lineno = count + 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto words = split_words(line);
    if (words.size() != 2) {
      throw FormatError("BPE merge line " + std::to_string(lineno) + " needs two tokens");
    }
    merges.emplace_back(words[0], words[1]);
  }
  return BpeModel(std::move(alphabet), std::move(merges));
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open BPE model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> corpus_languages(const std::vector<ParallelCorpus>& corpora) {
  std::set<std::string> langs;
  for (const auto& c : corpora) {
    langs.insert(c.pair.src);
    langs.insert(c.pair.tgt);
  }
  return {langs.begin(), langs.end()};
}

std::size_t reserved_vocab_size(std::size_t num_languages) {
  return Vocabulary::kNumSpecials + num_languages;
}

BpeModel learn_bpe(const std::vector<ParallelCorpus>& corpora, std::size_t vocab_size) {
  if (corpora.empty()) throw Error("learn_bpe: no corpora given");
  std::map<std::string, std::size_t> word_counts;
  for (const auto& corpus : corpora) {
    corpus.validate();
    for (const auto* side : {&corpus.source, &corpus.target})
      for (const auto& line : *side)
        for (const auto& w : split_words(line)) ++word_counts[w];
  }

  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> counts;
  std::set<std::string> alphabet_set{std::string(kWordMarker)};
  for (const auto& [w, n] : word_counts) {
    words.push_back(word_symbols(w));
    counts.push_back(n);
    for (const auto& s : words.back()) alphabet_set.insert(s);
  }
  std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());

  const std::size_t minimum = reserved_vocab_size(corpus_languages(corpora).size()) + alphabet.size();
  if (vocab_size < minimum) {
    throw Error("vocabulary size " + std::to_string(vocab_size) + " is too small; minimum is " +
                std::to_string(minimum));
  }

  std::set<std::string> tokens(alphabet.begin(), alphabet.end());
  std::size_t current = minimum;
  std::vector<Merge> merges;
  while (current < vocab_size) {
    std::map<Merge, std::size_t> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        pair_counts[Merge{words[w][i], words[w][i + 1]}] += counts[w];
    if (pair_counts.empty()) break;
    // std::map iterates pairs in lexicographic order; strict > keeps the
    // first (smallest) pair among equal counts.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const Merge merge = best->first;
    merges.push_back(merge);
    for (auto& w : words) apply_merge(w, merge);
    if (tokens.insert(merge.first + merge.second).second) ++current;
  }
  return BpeModel(std::move(alphabet), std::move(merges));
}

}  // namespace ciat::text
