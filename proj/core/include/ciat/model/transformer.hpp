#pragma once

#include <cstdint>
#include <vector>

#include "ciat/model/config.hpp"
#include "ciat/model/param_store.hpp"
#include "ciat/model/site.hpp"
#include "ciat/numerics/ops.hpp"
#include "ciat/text/batching.hpp"

namespace ciat::model {

using text::IdMatrix;

// Encoder output plus the source ids needed for cross-attention masking.
template <typename T>
struct EncoderState {
  Var<T> states;  // (batch, src_len, d_model), final LN applied
  IdMatrix src;

  // Constant copy holding the given rows (rows may repeat).
  EncoderState select(const std::vector<std::size_t>& rows) const;
};

template <typename T>
struct DecoderOutput {
  Var<T> hidden;        // (batch, tgt_len, d_model), final LN applied
  Var<T> output_table;  // (vocab, d_model), tied with the decoder input embedding
};

// Inputs an attention sub-layer may need. Unused fields stay null.
template <typename T>
struct AttentionInputs {
  const ops::AttentionMask* self_mask = nullptr;
  const Var<T>* memory = nullptr;
  const ops::AttentionMask* memory_mask = nullptr;
};

template <typename T>
struct SublayerResult {
  Var<T> ln_out;
  Var<T> body;    // sub-layer(LN(x))
  Var<T> output;  // x + body
};

// Pre-norm encoder-decoder. Every sub-layer computes
//   x_{i+1} = sublayer(LN(x_i)) + x_i
// and reports to the optional SiteHooks so adapters can rewrite its output.
// Decoder input embeddings and the output projection share one matrix; the
// encoder has its own embedding matrix.
template <typename T>
class Transformer {
 public:
  Transformer(const ModelConfig& config, std::uint64_t seed);
  // Adopts existing parameters; names and shapes must match `config`.
  Transformer(const ModelConfig& config, ParamStore<T> params);

  Transformer(const Transformer&) = delete;
  Transformer& operator=(const Transformer&) = delete;
  Transformer(Transformer&&) noexcept = default;
  Transformer& operator=(Transformer&&) noexcept = default;

  Transformer clone() const { return Transformer(config_, params_.clone()); }

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::vector<Site> sites() const { return enumerate_sites(config_); }

  SublayerResult<T> sublayer_forward(const Site& site, const Var<T>& x,
                                     const AttentionInputs<T>& attn,
                                     const ForwardOptions<T>& opt = {}) const;

  EncoderState<T> encode(const IdMatrix& src, const ForwardOptions<T>& opt = {}) const;
  DecoderOutput<T> decode(const EncoderState<T>& enc, const IdMatrix& tgt_in,
                          const ForwardOptions<T>& opt = {}) const;
  Var<T> logits(const DecoderOutput<T>& dec) const;

  // Mean label-smoothed cross-entropy over non-PAD target positions.
  Var<T> forward_loss(const text::Batch& batch, const ForwardOptions<T>& opt = {}) const;

  // Next-token logits (batch, vocab) for equal-length BOS-led prefixes.
  Tensor<T> decode_step(const EncoderState<T>& enc, const IdMatrix& prefixes,
                        const ForwardOptions<T>& opt = {}) const;

  static ops::AttentionMask key_padding_mask(const IdMatrix& keys, std::size_t queries);
  static ops::AttentionMask causal_mask(const IdMatrix& tgt);

  // Expected parameter names and shapes for a configuration.
  static std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

 private:
  Var<T> embed(Side side, const IdMatrix& ids, const Var<T>& table, const ForwardOptions<T>& opt) const;
  Var<T> attention(const std::string& prefix, const Var<T>& query_in, const Var<T>& kv_in,
                   const ops::AttentionMask& mask) const;
  Var<T> feed_forward(const std::string& prefix, const Var<T>& x, const ForwardOptions<T>& opt) const;
  Var<T> run_site(const Site& site, const Var<T>& x, const AttentionInputs<T>& attn,
                  const ForwardOptions<T>& opt, Var<T>* ln_out) const;
  Var<T> run_block(Side side, std::size_t layer, const Var<T>& x, const AttentionInputs<T>& attn,
                   const ForwardOptions<T>& opt) const;
  Var<T> table_for(Side side, const ForwardOptions<T>& opt) const;
  const Var<T>& p(const std::string& name) const { return params_.get(name); }

  ModelConfig config_;
  ParamStore<T> params_;
  std::vector<T> positional_;  // (max_len, d_model) sinusoids
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace ciat::model
