#include "ciat/adapters/param_count.hpp"

namespace ciat::adapters {

std::uint64_t count_base_params(const ModelConfig& c) {
  const std::uint64_t d = c.d_model, f = c.d_ffn, v = c.vocab_size;
  const std::uint64_t ln = 2 * d;
  const std::uint64_t attention = 4 * d * d + 4 * d + ln;
  const std::uint64_t ffn = d * f + f + f * d + d + ln;
  return 2 * v * d                                  // encoder table, tied decoder table
         + c.enc_layers * (attention + ffn)         //
         + c.dec_layers * (2 * attention + ffn)     // self + cross attention
         + 2 * ln;                                  // final LNs
}

std::uint64_t count_unit_params(std::size_t d_model, std::size_t bottleneck, bool own_ln) {
  const std::uint64_t d = d_model, m = bottleneck;
  return d * m + m + m * d + d + (own_ln ? 2 * d : 0);
}

ParamCount count_params(const ModelConfig& model, const AdapterConfig& config) {
  ParamCount pc;
  pc.base = count_base_params(model);
  const std::size_t m = config.resolved_bottleneck(model);
  std::uint64_t enc_units = 0;
  for (const auto& p : placements(model, config)) {
    const std::uint64_t n = count_unit_params(model.d_model, m, p.own_ln);
    pc.layer_adapters += n;
    if (p.site.side == Side::encoder) enc_units += n;
    ++pc.layer_units;
  }
  if (config.embedding_adapter) pc.embedding_adapters = 2 * count_unit_params(model.d_model, m, true);
  pc.per_bank = pc.layer_adapters + pc.embedding_adapters;
  pc.per_bank_side = is_mono(config.mode) ? enc_units : pc.per_bank;
  return pc;
}

}  // namespace ciat::adapters
