#include "ciat/adapters/model_view.hpp"

#include "ciat/error.hpp"
#include "ciat/numerics/ops.hpp"

namespace ciat::adapters {

template <typename T>
void ModelView<T>::check_compatible(const AdapterBank<T>& bank) const {
  const auto& mc = base_->config();
  const auto& bc = bank.model_config();
  if (bc.enc_layers != mc.enc_layers || bc.dec_layers != mc.dec_layers || bc.d_model != mc.d_model) {
    throw Error("bank '" + bank.key().value + "' was built for a different model (" + std::to_string(bc.enc_layers) +
                "+" + std::to_string(bc.dec_layers) + " layers, d=" + std::to_string(bc.d_model) + ")");
  }
}

template <typename T>
void ModelView<T>::plug(const AdapterBank<T>& bank) {
  if (plugged()) throw Error("bank '" + plugged_key() + "' is already plugged; unplug it first");
  if (is_mono(bank.config().mode)) throw Error("mono bank '" + bank.key().value + "' needs a source and a target bank");
  check_compatible(bank);
  enc_bank_ = dec_bank_ = &bank;
}

template <typename T>
void ModelView<T>::plug(const AdapterBank<T>& src_bank, const AdapterBank<T>& tgt_bank) {
  if (plugged()) throw Error("bank '" + plugged_key() + "' is already plugged; unplug it first");
  if (!is_mono(src_bank.config().mode) || !is_mono(tgt_bank.config().mode)) {
    throw Error("pair banks are plugged one at a time");
  }
  if (src_bank.config().mode != tgt_bank.config().mode) throw Error("mono banks use different modes");
  check_compatible(src_bank);
  check_compatible(tgt_bank);
  enc_bank_ = &src_bank;
  dec_bank_ = &tgt_bank;
}

template <typename T>
std::string ModelView<T>::plugged_key() const {
  if (!plugged()) return "";
  if (enc_bank_ == dec_bank_) return enc_bank_->key().value;
  return enc_bank_->key().value + "+" + dec_bank_->key().value;
}

template <typename T>
void ModelView<T>::unplug(const std::string& key) {
  if (!plugged()) throw Error("no bank is plugged");
  if (key != plugged_key()) throw Error("cannot unplug '" + key + "': plugged bank is '" + plugged_key() + "'");
  unplug_all();
}

template <typename T>
void ModelView<T>::unplug_all() {
  enc_bank_ = dec_bank_ = nullptr;
}

template <typename T>
bool ModelView<T>::check_pair(const text::LanguagePair& pair, bool strict) const {
  if (!plugged()) return true;
  bool ok;
  std::string expected;
  if (is_mono(enc_bank_->config().mode)) {
    ok = enc_bank_->key().value == pair.src && dec_bank_->key().value == pair.tgt;
    expected = pair.src + "+" + pair.tgt;
  } else {
    ok = enc_bank_->key().value == pair.str();
    expected = pair.str();
  }
  if (!ok && strict) throw Error("plugged bank '" + plugged_key() + "' does not serve " + expected);
  return ok;
}

template <typename T>
void ModelView<T>::disable_layers(Side side, std::size_t first, std::size_t last) {
  const std::size_t layers = side == Side::encoder ? base_->config().enc_layers : base_->config().dec_layers;
  if (first < 1 || first > last || last > layers) {
    throw Error("layer span [" + std::to_string(first) + ", " + std::to_string(last) + "] is outside 1.." +
                std::to_string(layers));
  }
  auto& mask = side == Side::encoder ? enc_disabled_ : dec_disabled_;
  mask.resize(layers, false);
  for (std::size_t l = first; l <= last; ++l) mask[l - 1] = true;
}

template <typename T>
void ModelView<T>::enable_all_layers() {
  enc_disabled_.clear();
  dec_disabled_.clear();
}

template <typename T>
const AdapterUnit<T>* ModelView<T>::active_unit(const Site& site) const {
  const AdapterBank<T>* bank = bank_for(site.side);
  if (!bank) return nullptr;
  const auto& mask = site.side == Side::encoder ? enc_disabled_ : dec_disabled_;
  if (site.layer < mask.size() && mask[site.layer]) return nullptr;
  return bank->unit(site);
}

template <typename T>
Var<T> ModelView<T>::apply(const Site& site, const AdapterUnit<T>& unit, const Var<T>& consumed,
                           const Var<T>& adapter_in, const Var<T>& base_output, model::ForwardTrace<T>* trace) const {
  const bool own_ln = unit.has_own_ln();
  Var<T> a = own_ln ? unit.forward(consumed) : layer_adapter_forward(unit, consumed);
  Var<T> out = ops::add(base_output, a);
  if (trace && !trace->records.empty() && trace->records.back().site == site) {
    auto& rec = trace->records.back();
    rec.adapted = true;
    rec.adapter_input = adapter_in.value();
    rec.adapter_output = a.value();
  }
  return out;
}

template <typename T>
Var<T> ModelView<T>::embedding_table(Side side, const Var<T>& base_table, model::ForwardTrace<T>*) const {
  const AdapterBank<T>* bank = bank_for(side);
  if (!bank || !embedding_enabled_) return base_table;
  const AdapterUnit<T>* unit = bank->embedding_unit(side);
  return unit ? adapt_embedding(base_table, *unit) : base_table;
}

template <typename T>
Var<T> ModelView<T>::sublayer_output(const Site& site, const Var<T>& input, const Var<T>& ln_out,
                                     const Var<T>& base_output, model::ForwardTrace<T>* trace) const {
  const AdapterUnit<T>* unit = active_unit(site);
  if (!unit) return base_output;
  // Serial units read the finished sub-layer output through their own LN;
  // parallel units read the site input through the LN they share with it.
  if (unit->has_own_ln()) return apply(site, *unit, base_output, base_output, base_output, trace);
  return apply(site, *unit, ln_out, input, base_output, trace);
}

template <typename T>
Var<T> ModelView<T>::block_output(const Site& site, const Var<T>& block_input, const Var<T>& block_ln,
                                  const Var<T>& base_output, model::ForwardTrace<T>* trace) const {
  const AdapterUnit<T>* unit = active_unit(site);
  if (!unit) return base_output;
  return apply(site, *unit, block_ln, block_input, base_output, trace);
}

template class ModelView<float>;
template class ModelView<double>;

}  // namespace ciat::adapters
