#pragma once

#include <compare>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ciat/model/config.hpp"
#include "ciat/numerics/autograd.hpp"

namespace ciat::model {

enum class Side { encoder, decoder };

// `block` addresses a whole Transformer layer (input before its first
// sub-layer, output after its last one).
enum class SiteKind { self_attn, cross_attn, ffn, block };

const char* to_string(Side side);
const char* to_string(SiteKind kind);

struct Site {
  Side side = Side::encoder;
  std::size_t layer = 0;  // 0-based
  SiteKind kind = SiteKind::self_attn;

  std::string name() const;  // "enc.0.self_attn"
  auto operator<=>(const Site&) const = default;
};

// Sub-layer sites in forward order: encoder first, then decoder; by layer,
// then self_attn, cross_attn, ffn.
std::vector<Site> enumerate_sites(const ModelConfig& config);

// Everything observed at one site during a forward pass.
template <typename T>
struct SiteRecord {
  Site site;
  Tensor<T> input;         // x_i
  Tensor<T> ln_out;        // LN(x_i)
  Tensor<T> body;          // sub-layer(LN(x_i))
  Tensor<T> base_output;   // x_i + sub-layer(LN(x_i))
  bool adapted = false;
  Tensor<T> adapter_input;
  Tensor<T> adapter_output;
  Tensor<T> output;        // what the next site receives
};

template <typename T>
struct ForwardTrace {
  std::vector<SiteRecord<T>> records;
  std::vector<Tensor<T>> embedding_tables;  // tables actually used, encoder then decoder

  const SiteRecord<T>* find(const Site& site) const {
    for (const auto& r : records)
      if (r.site == site) return &r;
    return nullptr;
  }
};

// Extension points the forward pass calls at every embedding lookup and
// every sub-layer/block boundary. The defaults leave the base model intact.
template <typename T>
class SiteHooks {
 public:
  virtual ~SiteHooks() = default;

  // Table used for lookups on `side`; the decoder table also serves as the
  // tied output projection.
  virtual Var<T> embedding_table(Side side, const Var<T>& base_table,
                                 ForwardTrace<T>* trace) const {
    (void)side;
    (void)trace;
    return base_table;
  }

  virtual Var<T> sublayer_output(const Site& site, const Var<T>& input, const Var<T>& ln_out,
                                 const Var<T>& base_output, ForwardTrace<T>* trace) const {
    (void)site;
    (void)input;
    (void)ln_out;
    (void)trace;
    return base_output;
  }

  // `block_ln` is the normalized block input fed to the first sub-layer.
  virtual Var<T> block_output(const Site& site, const Var<T>& block_input, const Var<T>& block_ln,
                              const Var<T>& base_output, ForwardTrace<T>* trace) const {
    (void)site;
    (void)block_input;
    (void)block_ln;
    (void)trace;
    return base_output;
  }
};

template <typename T>
struct ForwardOptions {
  const SiteHooks<T>* hooks = nullptr;
  ForwardTrace<T>* trace = nullptr;
  bool training = false;             // enables dropout
  std::mt19937_64* rng = nullptr;    // required when training with dropout > 0
};

}  // namespace ciat::model
