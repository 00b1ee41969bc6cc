#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ciat/key_values.hpp"
#include "ciat/model/config.hpp"
#include "ciat/model/param_store.hpp"
#include "ciat/model/site.hpp"

namespace ciat::adapters {

using model::ModelConfig;
using model::ParamStore;
using model::Side;
using model::Site;
using model::SiteKind;

enum class AdapterMode { ciat, ciat_layer, ciat_basic, serial, mono_serial, mono_parallel };

AdapterMode parse_mode(const std::string& text);
const char* to_string(AdapterMode mode);
bool is_mono(AdapterMode mode);
bool is_serial(AdapterMode mode);

enum class Composition { parallel, serial };

struct AdapterConfig {
  AdapterMode mode = AdapterMode::ciat;
  std::size_t bottleneck = 0;  // 0 = d_model / 2
  bool embedding_adapter = true;

  // Embedding adapters follow the mode (on only for ciat).
  static AdapterConfig for_mode(AdapterMode mode, std::size_t bottleneck = 0);

  std::size_t resolved_bottleneck(const ModelConfig& model) const;
  void validate(const ModelConfig& model) const;

  KeyValues to_kv() const;
  static AdapterConfig from_kv(const KeyValues& kv);
};

// One layer adapter position. Parallel units read the site's own LN output;
// serial units carry their own LN and read the site output.
struct Placement {
  Site site;
  Composition composition = Composition::parallel;
  bool own_ln = false;
};

// Layer-adapter placements for a mode, in site order.
std::vector<Placement> placements(const ModelConfig& model, const AdapterConfig& config);

// Bottleneck feed-forward unit: up(ReLU(down(LN?(x)))), no output activation.
template <typename T>
struct AdapterUnit {
  Var<T> down_w, down_b;  // (d, m), (m)
  Var<T> up_w, up_b;      // (m, d), (d)
  Var<T> ln_gain, ln_bias;  // undefined when the unit shares the site LN
  T ln_eps = T(1e-6);

  bool has_own_ln() const { return ln_gain.defined(); }
  std::size_t input_dim() const { return down_w.shape()[0]; }

  // Bottleneck applied to an already normalized input.
  Var<T> forward_normalized(const Var<T>& normalized) const;
  // Own LN first; throws if the unit has none.
  Var<T> forward(const Var<T>& x) const;
};

// Parallel layer adapter on the site's shared LN output.
template <typename T>
Var<T> layer_adapter_forward(const AdapterUnit<T>& unit, const Var<T>& site_ln);

// E - G(E) for one row or a whole table.
template <typename T>
Var<T> adapt_embedding(const Var<T>& rows, const AdapterUnit<T>& unit);

// Bank identity: "src-tgt" for pair banks, a language code for mono banks.
struct BankKey {
  std::string value;
  bool operator==(const BankKey&) const = default;
};

// All adapter parameters for one language pair, or one language in mono
// modes (a mono bank carries units for both sides; the encoder half is used
// when its language is the source, the decoder half when it is the target).
template <typename T>
class AdapterBank {
 public:
  AdapterBank(BankKey key, const ModelConfig& model, const AdapterConfig& config, std::uint64_t seed);
  // Adopts stored parameters; names and shapes must match.
  AdapterBank(BankKey key, const ModelConfig& model, const AdapterConfig& config, ParamStore<T> params);

  AdapterBank(const AdapterBank&) = delete;
  AdapterBank& operator=(const AdapterBank&) = delete;
  AdapterBank(AdapterBank&&) noexcept = default;
  AdapterBank& operator=(AdapterBank&&) noexcept = default;

  const BankKey& key() const { return key_; }
  const AdapterConfig& config() const { return config_; }
  const ModelConfig& model_config() const { return model_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const std::vector<Placement>& placements() const { return placements_; }

  const AdapterUnit<T>* unit(const Site& site) const;
  const AdapterUnit<T>* embedding_unit(Side side) const;

  void zero_up_projections();

  // Checkpoint container with kind=bank, bank-key, mode and the model config.
  void save(const std::filesystem::path& path) const;
  static AdapterBank load(const std::filesystem::path& path);

  // Parameter names and shapes for a bank.
  static std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& model,
                                                                     const AdapterConfig& config);

 private:
  void bind();

  BankKey key_;
  ModelConfig model_;
  AdapterConfig config_;
  ParamStore<T> params_;
  std::vector<Placement> placements_;
  std::map<Site, AdapterUnit<T>> units_;
  std::optional<AdapterUnit<T>> enc_embed_, dec_embed_;
};

extern template class AdapterBank<float>;
extern template class AdapterBank<double>;

}  // namespace ciat::adapters
