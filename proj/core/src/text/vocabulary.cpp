#include "ciat/text/vocabulary.hpp"

#include <algorithm>

#include "ciat/error.hpp"

namespace ciat::text {

std::string language_tag(const std::string& lang) { return "<2" + lang + ">"; }

Vocabulary Vocabulary::build(const BpeModel& bpe, std::vector<std::string> languages) {
  std::sort(languages.begin(), languages.end());
  languages.erase(std::unique(languages.begin(), languages.end()), languages.end());
  Vocabulary v;
  v.languages_ = languages;
  auto push = [&v](const std::string& tok) {
    if (v.ids_.emplace(tok, static_cast<TokenId>(v.tokens_.size())).second) v.tokens_.push_back(tok);
  };
  for (const char* s : {"<pad>", "<s>", "</s>", "<unk>"}) push(s);
  for (const auto& lang : languages) {
    if (lang.empty()) throw Error("empty language code");
    push(language_tag(lang));
  }
  for (const auto& s : bpe.alphabet()) push(s);
  for (const auto& [a, b] : bpe.merges()) push(a + b);
  return v;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::has_language(const std::string& lang) const {
  return std::binary_search(languages_.begin(), languages_.end(), lang);
}

TokenId Vocabulary::tag_id(const std::string& lang) const {
  if (!has_language(lang)) throw Error("no language tag for '" + lang + "' in vocabulary");
  return ids_.at(language_tag(lang));
}

bool Vocabulary::is_tag(TokenId id) const {
  return id >= static_cast<TokenId>(kNumSpecials) &&
         id < static_cast<TokenId>(kNumSpecials + languages_.size());
}

std::vector<TokenId> encode_target(const std::string& sentence, const Vocabulary& vocab,
                                   const BpeModel& bpe) {
  std::vector<TokenId> ids;
  for (const auto& piece : bpe.segment(sentence)) {
    if (auto id = vocab.find(piece)) {
      ids.push_back(*id);
      continue;
    }
    // Unseen merged symbols fall back to their characters.
    for (const auto& sym : utf8_symbols(piece)) ids.push_back(vocab.id_or_unk(sym));
  }
  return ids;
}

std::vector<TokenId> encode_source(const std::string& sentence, const std::string& tgt_lang,
                                   const Vocabulary& vocab, const BpeModel& bpe) {
  std::vector<TokenId> ids{vocab.tag_id(tgt_lang)};
  auto body = encode_target(sentence, vocab, bpe);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::string joined;
  for (TokenId id : ids) {
    if (vocab.is_special(id) || vocab.is_tag(id)) continue;
    joined += vocab.token(id);
  }
  std::string spaced;
  for (std::size_t pos = 0; pos < joined.size();) {
    if (joined.compare(pos, kWordMarker.size(), kWordMarker) == 0) {
      spaced.push_back(' ');
      pos += kWordMarker.size();
    } else {
      spaced.push_back(joined[pos++]);
    }
  }
  return normalize_whitespace(spaced);
}

}  // namespace ciat::text
