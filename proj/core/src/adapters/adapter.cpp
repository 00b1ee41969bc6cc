#include "ciat/adapters/adapter.hpp"

#include <cmath>
#include <random>

#include "ciat/error.hpp"
#include "ciat/model/checkpoint.hpp"
#include "ciat/numerics/ops.hpp"

namespace ciat::adapters {

namespace {

struct ModeName {
  AdapterMode mode;
  const char* name;
};

constexpr ModeName kModes[] = {
    {AdapterMode::ciat, "ciat"},
    {AdapterMode::ciat_layer, "ciat_layer"},
    {AdapterMode::ciat_basic, "ciat_basic"},
    {AdapterMode::serial, "serial"},
    {AdapterMode::mono_serial, "mono_serial"},
    {AdapterMode::mono_parallel, "mono_parallel"},
};

}  // namespace

AdapterMode parse_mode(const std::string& text) {
  for (const auto& m : kModes)
    if (text == m.name) return m.mode;
  throw Error("unknown adapter mode '" + text +
              "' (expected ciat, ciat_layer, ciat_basic, serial, mono_serial or mono_parallel)");
}

const char* to_string(AdapterMode mode) {
  for (const auto& m : kModes)
    if (mode == m.mode) return m.name;
  return "?";
}

bool is_mono(AdapterMode mode) { return mode == AdapterMode::mono_serial || mode == AdapterMode::mono_parallel; }
bool is_serial(AdapterMode mode) { return mode == AdapterMode::serial || mode == AdapterMode::mono_serial; }

AdapterConfig AdapterConfig::for_mode(AdapterMode mode, std::size_t bottleneck) {
  return {mode, bottleneck, mode == AdapterMode::ciat};
}

std::size_t AdapterConfig::resolved_bottleneck(const ModelConfig& model) const {
  return bottleneck == 0 ? model.d_model / 2 : bottleneck;
}

void AdapterConfig::validate(const ModelConfig& model) const {
  const std::size_t m = resolved_bottleneck(model);
  if (m == 0 || m >= model.d_model) {
    throw Error("adapter bottleneck " + std::to_string(m) + " must be in [1, d_model=" +
                std::to_string(model.d_model) + ")");
  }
  if (embedding_adapter && is_mono(mode)) throw Error("mono modes carry no embedding adapters");
}

KeyValues AdapterConfig::to_kv() const {
  KeyValues kv;
  kv.set("mode", to_string(mode));
  kv.set("bottleneck", bottleneck);
  kv.set("embedding_adapter", embedding_adapter);
  return kv;
}

AdapterConfig AdapterConfig::from_kv(const KeyValues& kv) {
  AdapterConfig c = for_mode(parse_mode(kv.get_or("mode", "ciat")), kv.get_size("bottleneck", 0));
  c.embedding_adapter = kv.get_bool("embedding_adapter", c.embedding_adapter);
  return c;
}

std::vector<Placement> placements(const ModelConfig& model, const AdapterConfig& config) {
  std::vector<Placement> out;
  auto per_layer = [&](Side side, std::size_t layers) {
    for (std::size_t l = 0; l < layers; ++l) {
      switch (config.mode) {
        case AdapterMode::ciat:
        case AdapterMode::ciat_layer:
          out.push_back({{side, l, SiteKind::self_attn}, Composition::parallel, false});
          out.push_back({{side, l, SiteKind::ffn}, Composition::parallel, false});
          break;
        case AdapterMode::ciat_basic:
        case AdapterMode::mono_parallel:
          out.push_back({{side, l, SiteKind::block}, Composition::parallel, false});
          break;
        case AdapterMode::serial:
        case AdapterMode::mono_serial:
          out.push_back({{side, l, SiteKind::ffn}, Composition::serial, true});
          break;
      }
    }
  };
  per_layer(Side::encoder, model.enc_layers);
  per_layer(Side::decoder, model.dec_layers);
  return out;
}

template <typename T>
Var<T> AdapterUnit<T>::forward_normalized(const Var<T>& normalized) const {
  if (normalized.shape().empty() || normalized.shape().back() != input_dim()) {
    throw ShapeError("adapter expects last dim " + std::to_string(input_dim()) + ", got " +
                     shape_str(normalized.shape()));
  }
  return ops::linear(ops::relu(ops::linear(normalized, down_w, down_b)), up_w, up_b);
}

template <typename T>
Var<T> AdapterUnit<T>::forward(const Var<T>& x) const {
  if (!has_own_ln()) throw Error("adapter unit has no layer normalization of its own");
  if (x.shape().empty() || x.shape().back() != input_dim()) {
    throw ShapeError("adapter expects last dim " + std::to_string(input_dim()) + ", got " + shape_str(x.shape()));
  }
  return forward_normalized(ops::layer_norm(x, ln_gain, ln_bias, ln_eps));
}

template <typename T>
Var<T> layer_adapter_forward(const AdapterUnit<T>& unit, const Var<T>& site_ln) {
  if (!site_ln.defined()) throw Error("layer adapter needs the site's layer-norm output");
  return unit.forward_normalized(site_ln);
}

template <typename T>
Var<T> adapt_embedding(const Var<T>& rows, const AdapterUnit<T>& unit) {
  return ops::sub(rows, unit.forward(rows));
}

namespace {

void add_unit_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, std::size_t d,
                     std::size_t m, bool own_ln) {
  out.push_back({prefix + ".down.w", {d, m}});
  out.push_back({prefix + ".down.b", {m}});
  out.push_back({prefix + ".up.w", {m, d}});
  out.push_back({prefix + ".up.b", {d}});
  if (own_ln) {
    out.push_back({prefix + ".ln.gain", {d}});
    out.push_back({prefix + ".ln.bias", {d}});
  }
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Shape>> AdapterBank<T>::parameter_layout(const ModelConfig& model,
                                                                            const AdapterConfig& config) {
  const std::size_t d = model.d_model, m = config.resolved_bottleneck(model);
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& p : adapters::placements(model, config)) add_unit_layout(out, p.site.name(), d, m, p.own_ln);
  if (config.embedding_adapter) {
    add_unit_layout(out, "enc.embed_adapter", d, m, true);
    add_unit_layout(out, "dec.embed_adapter", d, m, true);
  }
  return out;
}

template <typename T>
AdapterBank<T>::AdapterBank(BankKey key, const ModelConfig& model, const AdapterConfig& config, std::uint64_t seed)
    : key_(std::move(key)), model_(model), config_(config) {
  config_.validate(model_);
  std::mt19937_64 rng(seed ^ model::fnv1a64(key_.value.data(), key_.value.size()));
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(model_.d_model)));
  for (const auto& [name, shape] : parameter_layout(model_, config_)) {
    Tensor<T> t(shape);
    const auto ends = [&](const char* s) {
      const std::string suffix(s);
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends(".down.w")) {
      for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    } else if (ends(".ln.gain")) {
      t.fill(T{1});
    }
    params_.add(name, std::move(t));
  }
  bind();
}

template <typename T>
AdapterBank<T>::AdapterBank(BankKey key, const ModelConfig& model, const AdapterConfig& config, ParamStore<T> params)
    : key_(std::move(key)), model_(model), config_(config), params_(std::move(params)) {
  config_.validate(model_);
  const auto layout = parameter_layout(model_, config_);
  if (layout.size() != params_.size()) {
    throw Error("bank '" + key_.value + "' holds " + std::to_string(params_.size()) + " tensors, mode " +
                to_string(config_.mode) + " expects " + std::to_string(layout.size()));
  }
  for (const auto& [name, shape] : layout) {
    if (!params_.contains(name)) throw Error("bank '" + key_.value + "' is missing '" + name + "'");
    if (params_.get(name).shape() != shape) {
      throw ShapeError("bank tensor '" + name + "' has shape " + shape_str(params_.get(name).shape()) +
                       ", expected " + shape_str(shape));
    }
  }
  bind();
}

template <typename T>
void AdapterBank<T>::bind() {
  placements_ = adapters::placements(model_, config_);
  const T eps = static_cast<T>(model_.ln_eps);
  auto make = [&](const std::string& prefix, bool own_ln) {
    AdapterUnit<T> u;
    u.down_w = params_.get(prefix + ".down.w");
    u.down_b = params_.get(prefix + ".down.b");
    u.up_w = params_.get(prefix + ".up.w");
    u.up_b = params_.get(prefix + ".up.b");
    if (own_ln) {
      u.ln_gain = params_.get(prefix + ".ln.gain");
      u.ln_bias = params_.get(prefix + ".ln.bias");
    }
    u.ln_eps = eps;
    return u;
  };
  units_.clear();
  for (const auto& p : placements_) units_.emplace(p.site, make(p.site.name(), p.own_ln));
  if (config_.embedding_adapter) {
    enc_embed_ = make("enc.embed_adapter", true);
    dec_embed_ = make("dec.embed_adapter", true);
  }
}

template <typename T>
const AdapterUnit<T>* AdapterBank<T>::unit(const Site& site) const {
  auto it = units_.find(site);
  return it == units_.end() ? nullptr : &it->second;
}

template <typename T>
const AdapterUnit<T>* AdapterBank<T>::embedding_unit(Side side) const {
  const auto& u = side == Side::encoder ? enc_embed_ : dec_embed_;
  return u ? &*u : nullptr;
}

template <typename T>
void AdapterBank<T>::zero_up_projections() {
  for (const auto& [name, var] : params_.all()) {
    if (!name.ends_with(".up.w") && !name.ends_with(".up.b")) continue;
    Var<T> handle = var;
    handle.mutable_value().fill(T{0});
  }
}

template <typename T>
void AdapterBank<T>::save(const std::filesystem::path& path) const {
  KeyValues header;
  header.set("kind", "bank");
  header.set("bank-key", key_.value);
  header.set("mode", to_string(config_.mode));
  header.set("bottleneck", config_.resolved_bottleneck(model_));
  header.set("embedding_adapter", config_.embedding_adapter);
  const KeyValues model_kv = model_.to_kv();
  for (const auto& [k, v] : model_kv.entries()) header.set("model." + k, v);
  model::save_container(path, header, params_);
}

template <typename T>
AdapterBank<T> AdapterBank<T>::load(const std::filesystem::path& path) {
  auto c = model::load_container<T>(path);
  if (c.header.get_or("kind", "") != "bank") {
    throw FormatError(path.string() + " is not an adapter bank (kind=" + c.header.get_or("kind", "?") + ")");
  }
  const ModelConfig mc = ModelConfig::from_kv(c.header.with_prefix("model."));
  return AdapterBank(BankKey{c.header.get("bank-key")}, mc, AdapterConfig::from_kv(c.header), std::move(c.tensors));
}

template struct AdapterUnit<float>;
template struct AdapterUnit<double>;
template Var<float> layer_adapter_forward(const AdapterUnit<float>&, const Var<float>&);
template Var<double> layer_adapter_forward(const AdapterUnit<double>&, const Var<double>&);
template Var<float> adapt_embedding(const Var<float>&, const AdapterUnit<float>&);
template Var<double> adapt_embedding(const Var<double>&, const AdapterUnit<double>&);
template class AdapterBank<float>;
template class AdapterBank<double>;

}  // namespace ciat::adapters
