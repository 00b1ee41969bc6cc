#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ciat::text {

// Translation direction, ISO 639-1 codes.
struct LanguagePair {
  std::string src;
  std::string tgt;

  std::string str() const { return src + "-" + tgt; }
  static LanguagePair parse(const std::string& text);  // "en-de"
  auto operator<=>(const LanguagePair&) const = default;
};

struct ParallelCorpus {
  LanguagePair pair;
  std::vector<std::string> source;
  std::vector<std::string> target;

  std::size_t size() const { return source.size(); }
  // Throws unless both sides align and the language codes are set.
  void validate() const;
};

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

// Reads `<prefix>.<src>` and `<prefix>.<tgt>`.
ParallelCorpus load_corpus(const std::filesystem::path& prefix, const LanguagePair& pair);

// Parses "prefix:src-tgt".
std::pair<std::filesystem::path, LanguagePair> parse_corpus_spec(const std::string& spec);

using Dictionary = std::vector<std::pair<std::string, std::string>>;

// Two whitespace-separated columns per line. Blank lines are skipped.
Dictionary load_dictionary(const std::filesystem::path& path);
Dictionary parse_dictionary(const std::string& text);

// Whitespace tokenization shared by BPE, BLEU and detokenization.
std::vector<std::string> split_words(const std::string& sentence);
std::string normalize_whitespace(const std::string& sentence);

}  // namespace ciat::text
