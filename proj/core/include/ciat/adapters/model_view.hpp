#pragma once

#include <string>
#include <vector>

#include "ciat/adapters/adapter.hpp"
#include "ciat/model/transformer.hpp"
#include "ciat/text/corpus.hpp"

namespace ciat::adapters {

// A base model seen through at most one plugged bank (or one source/target
// pair of mono banks). Plugging never copies or mutates base tensors; the
// view only rewrites sub-layer outputs and embedding tables on the fly.
template <typename T>
class ModelView : public model::SiteHooks<T> {
 public:
  explicit ModelView(const model::Transformer<T>& base) : base_(&base) {}

  const model::Transformer<T>& base() const { return *base_; }

  void plug(const AdapterBank<T>& bank);
  // Mono modes: encoder units from `src_bank`, decoder units from `tgt_bank`.
  void plug(const AdapterBank<T>& src_bank, const AdapterBank<T>& tgt_bank);
  // Throws if `key` is not what is plugged ("src-tgt", or "src+tgt" for mono).
  void unplug(const std::string& key);
  void unplug_all();

  bool plugged() const { return enc_bank_ != nullptr; }
  // Bank serving `side`, or null.
  const AdapterBank<T>* bank_for(Side side) const { return side == Side::encoder ? enc_bank_ : dec_bank_; }
  std::string plugged_key() const;

  // True when the plugged bank serves `pair` (or nothing is plugged). With
  // `strict`, a mismatch throws instead of returning false.
  bool check_pair(const text::LanguagePair& pair, bool strict) const;

  // Disables layer units whose 1-based layer index lies in [first, last].
  void disable_layers(Side side, std::size_t first, std::size_t last);
  void enable_all_layers();
  void set_embedding_adapters_enabled(bool on) { embedding_enabled_ = on; }

  model::ForwardOptions<T> options(model::ForwardTrace<T>* trace = nullptr) const {
    model::ForwardOptions<T> o;
    o.hooks = this;
    o.trace = trace;
    return o;
  }

  Var<T> embedding_table(Side side, const Var<T>& base_table, model::ForwardTrace<T>* trace) const override;
  Var<T> sublayer_output(const Site& site, const Var<T>& input, const Var<T>& ln_out, const Var<T>& base_output,
                         model::ForwardTrace<T>* trace) const override;
  Var<T> block_output(const Site& site, const Var<T>& block_input, const Var<T>& block_ln,
                      const Var<T>& base_output, model::ForwardTrace<T>* trace) const override;

 private:
  const AdapterUnit<T>* active_unit(const Site& site) const;
  void check_compatible(const AdapterBank<T>& bank) const;
  Var<T> apply(const Site& site, const AdapterUnit<T>& unit, const Var<T>& consumed, const Var<T>& adapter_in,
               const Var<T>& base_output, model::ForwardTrace<T>* trace) const;

  const model::Transformer<T>* base_;
  const AdapterBank<T>* enc_bank_ = nullptr;
  const AdapterBank<T>* dec_bank_ = nullptr;
  std::vector<bool> enc_disabled_, dec_disabled_;
  bool embedding_enabled_ = true;
};

extern template class ModelView<float>;
extern template class ModelView<double>;

}  // namespace ciat::adapters
