#include "ciat/text/corpus.hpp"

#include <fstream>
#include <sstream>

#include "ciat/error.hpp"

namespace ciat::text {

LanguagePair LanguagePair::parse(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= text.size() ||
      text.find('-', dash + 1) != std::string::npos) {
    throw Error("language pair must look like 'en-de', got '" + text + "'");
  }
  return {text.substr(0, dash), text.substr(dash + 1)};
}

void ParallelCorpus::validate() const {
  if (pair.src.empty() || pair.tgt.empty()) throw Error("corpus has an empty language code");
  if (source.size() != target.size()) {
    throw Error("corpus " + pair.str() + " is misaligned: " + std::to_string(source.size()) +
                " source vs " + std::to_string(target.size()) + " target lines");
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

ParallelCorpus load_corpus(const std::filesystem::path& prefix, const LanguagePair& pair) {
  ParallelCorpus corpus;
  corpus.pair = pair;
  corpus.source = read_lines(prefix.string() + "." + pair.src);
  corpus.target = read_lines(prefix.string() + "." + pair.tgt);
  corpus.validate();
  return corpus;
}

std::pair<std::filesystem::path, LanguagePair> parse_corpus_spec(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error("corpus must be given as 'prefix:src-tgt', got '" + spec + "'");
  }
  return {spec.substr(0, colon), LanguagePair::parse(spec.substr(colon + 1))};
}

Dictionary parse_dictionary(const std::string& text) {
  Dictionary dict;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto words = split_words(line);
    if (words.empty()) continue;
    if (words.size() != 2) {
      throw FormatError("dictionary line " + std::to_string(lineno) + ": expected 2 columns, got " +
                        std::to_string(words.size()));
    }
    dict.emplace_back(words[0], words[1]);
  }
  return dict;
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dictionary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_dictionary(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_words(const std::string& sentence) {
  std::vector<std::string> words;
  std::string current;
  for (char c : sentence) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string normalize_whitespace(const std::string& sentence) {
  std::string out;
  for (const auto& w : split_words(sentence)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace ciat::text
