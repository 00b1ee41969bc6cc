#pragma once

#include <cstddef>

#include "ciat/key_values.hpp"

namespace ciat::model {

struct ModelConfig {
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t d_model = 256;
  std::size_t d_ffn = 1024;
  std::size_t heads = 4;
  std::size_t vocab_size = 32000;
  std::size_t max_len = 256;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  double ln_eps = 1e-6;

  // Throws on zero counts or d_model not divisible by heads.
  void validate() const;

  // Keys: enc_layers, dec_layers, d_model, d_ffn, heads, vocab_size,
  // max_len, dropout, label_smoothing, ln_eps.
  KeyValues to_kv() const;
  static ModelConfig from_kv(const KeyValues& kv, const ModelConfig& defaults);
  static ModelConfig from_kv(const KeyValues& kv);

  // 2+2 layers, d=256, ffn=1024, 4 heads, 32k joint vocabulary.
  static ModelConfig small_iwslt();
  // 6+6 layers, d=1024, ffn=4096, 16 heads, 32k joint vocabulary.
  static ModelConfig big();

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace ciat::model
