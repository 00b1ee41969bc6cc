#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ciat/text/corpus.hpp"

namespace ciat::text {

// Word-start marker prepended to every whitespace-delimited word.
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";  // U+2581

// Splits UTF-8 text into code points. Invalid bytes become single symbols.
std::vector<std::string> utf8_symbols(std::string_view text);

using Merge = std::pair<std::string, std::string>;

// Joint byte-pair-encoding model: base alphabet plus ordered merge list.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<std::string> alphabet, std::vector<Merge> merges);

  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<Merge>& merges() const { return merges_; }

  // Symbols of one word, marker first, after applying merges by priority.
  std::vector<std::string> segment_word(std::string_view word) const;
  std::vector<std::string> segment(const std::string& sentence) const;

  // "bpe-v1 <alphabet-size>", one alphabet symbol per line, then one
  // "left right" merge per line.
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);
  static BpeModel parse(const std::string& text);

 private:
  std::vector<std::string> alphabet_;
  std::vector<Merge> merges_;
  std::map<Merge, std::size_t> rank_;
};

// Languages appearing on either side of the corpora, sorted.
std::vector<std::string> corpus_languages(const std::vector<ParallelCorpus>& corpora);

// Number of ids taken before any subword: specials plus one tag per language.
std::size_t reserved_vocab_size(std::size_t num_languages);

// Learns merges over both sides of every corpus until the vocabulary
// (specials + tags + alphabet + merged symbols) reaches `vocab_size` or no
// pair remains. Ties between equally frequent pairs go to the
// lexicographically smallest pair.
BpeModel learn_bpe(const std::vector<ParallelCorpus>& corpora, std::size_t vocab_size);

}  // namespace ciat::text
