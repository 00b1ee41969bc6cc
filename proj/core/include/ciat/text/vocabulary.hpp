#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ciat/text/bpe.hpp"

namespace ciat::text {

using TokenId = std::int32_t;

std::string language_tag(const std::string& lang);  // "<2de>"

// Token <-> id bijection. Ids: specials, then one tag per language (sorted),
// then the BPE alphabet, then merged symbols in merge order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocabulary() = default;
  static Vocabulary build(const BpeModel& bpe, std::vector<std::string> languages);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(const std::string& token) const;
  TokenId id_or_unk(const std::string& token) const;

  const std::vector<std::string>& languages() const { return languages_; }
  bool has_language(const std::string& lang) const;
  TokenId tag_id(const std::string& lang) const;  // throws for unknown languages

  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }
  bool is_tag(TokenId id) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> languages_;
};

// [tag(tgt_lang)] ++ subwords ++ [EOS]
std::vector<TokenId> encode_source(const std::string& sentence, const std::string& tgt_lang,
                                   const Vocabulary& vocab, const BpeModel& bpe);
// Subword ids only.
std::vector<TokenId> encode_target(const std::string& sentence, const Vocabulary& vocab,
                                   const BpeModel& bpe);
// Drops specials and tags, joins subwords and restores word boundaries.
std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab);

}  // namespace ciat::text
