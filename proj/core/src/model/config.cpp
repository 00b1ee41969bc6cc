#include "ciat/model/config.hpp"

#include "ciat/error.hpp"

namespace ciat::model {

void ModelConfig::validate() const {
  if (enc_layers == 0 || dec_layers == 0) throw Error("model needs at least one layer per stack");
  if (d_model < 2 || d_ffn == 0 || heads == 0 || vocab_size == 0 || max_len == 0) {
    throw Error("model dimensions must be positive (d_model >= 2)");
  }
  if (d_model % heads != 0) {
    throw Error("d_model " + std::to_string(d_model) + " is not divisible by " +
                std::to_string(heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must lie in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw Error("label_smoothing must lie in [0, 1)");
  if (ln_eps <= 0.0) throw Error("ln_eps must be positive");
}

KeyValues ModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("enc_layers", enc_layers);
  kv.set("dec_layers", dec_layers);
  kv.set("d_model", d_model);
  kv.set("d_ffn", d_ffn);
  kv.set("heads", heads);
  kv.set("vocab_size", vocab_size);
  kv.set("max_len", max_len);
  kv.set("dropout", dropout);
  kv.set("label_smoothing", label_smoothing);
  kv.set("ln_eps", ln_eps);
  return kv;
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv) { return from_kv(kv, ModelConfig{}); }

ModelConfig ModelConfig::from_kv(const KeyValues& kv, const ModelConfig& d) {
  ModelConfig c;
  c.enc_layers = kv.get_size("enc_layers", d.enc_layers);
  c.dec_layers = kv.get_size("dec_layers", d.dec_layers);
  c.d_model = kv.get_size("d_model", d.d_model);
  c.d_ffn = kv.get_size("d_ffn", d.d_ffn);
  c.heads = kv.get_size("heads", d.heads);
  c.vocab_size = kv.get_size("vocab_size", d.vocab_size);
  c.max_len = kv.get_size("max_len", d.max_len);
  c.dropout = kv.get_double("dropout", d.dropout);
  c.label_smoothing = kv.get_double("label_smoothing", d.label_smoothing);
  c.ln_eps = kv.get_double("ln_eps", d.ln_eps);
  c.validate();
  return c;
}

ModelConfig ModelConfig::small_iwslt() {
  ModelConfig c;
  c.enc_layers = c.dec_layers = 2;
  c.d_model = 256;
  c.d_ffn = 1024;
  c.heads = 4;
  c.vocab_size = 32000;
  return c;
}

ModelConfig ModelConfig::big() {
  ModelConfig c;
  c.enc_layers = c.dec_layers = 6;
  c.d_model = 1024;
  c.d_ffn = 4096;
  c.heads = 16;
  c.vocab_size = 32000;
  return c;
}

}  // namespace ciat::model
