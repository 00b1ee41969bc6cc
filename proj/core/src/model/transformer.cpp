#include "ciat/model/transformer.hpp"

#include <cmath>
#include <random>

#include "ciat/error.hpp"

namespace ciat::model {

using text::Vocabulary;

template <typename T>
EncoderState<T> EncoderState<T>::select(const std::vector<std::size_t>& rows) const {
  const auto& s = states.shape();
  const std::size_t len = s[1], d = s[2];
  Tensor<T> out(Shape{rows.size(), len, d});
  IdMatrix ids;
  ids.rows = rows.size();
  ids.cols = src.cols;
  ids.ids.reserve(rows.size() * src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const T* from = states.value().raw() + rows[i] * len * d;
    std::copy(from, from + len * d, out.raw() + i * len * d);
    auto r = src.row(rows[i]);
    ids.ids.insert(ids.ids.end(), r.begin(), r.end());
  }
  return {Var<T>(std::move(out)), std::move(ids)};
}

namespace {

void add_attention_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                          std::size_t d) {
  out.push_back({prefix + ".ln.gain", {d}});
  out.push_back({prefix + ".ln.bias", {d}});
  for (const char* proj : {"q", "k", "v", "o"}) {
    out.push_back({prefix + "." + proj + ".w", {d, d}});
    out.push_back({prefix + "." + proj + ".b", {d}});
  }
}

void add_ffn_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                    std::size_t d, std::size_t f) {
  out.push_back({prefix + ".ln.gain", {d}});
  out.push_back({prefix + ".ln.bias", {d}});
  out.push_back({prefix + ".fc1.w", {d, f}});
  out.push_back({prefix + ".fc1.b", {f}});
  out.push_back({prefix + ".fc2.w", {f, d}});
  out.push_back({prefix + ".fc2.b", {d}});
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Shape>> Transformer<T>::parameter_layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t d = c.d_model;
  out.push_back({"enc.embed", {c.vocab_size, d}});
  out.push_back({"dec.embed", {c.vocab_size, d}});
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    const std::string base = "enc." + std::to_string(l);
    add_attention_layout(out, base + ".self_attn", d);
    add_ffn_layout(out, base + ".ffn", d, c.d_ffn);
  }
  for (std::size_t l = 0; l < c.dec_layers; ++l) {
    const std::string base = "dec." + std::to_string(l);
    add_attention_layout(out, base + ".self_attn", d);
    add_attention_layout(out, base + ".cross_attn", d);
    add_ffn_layout(out, base + ".ffn", d, c.d_ffn);
  }
  for (const char* side : {"enc", "dec"}) {
    out.push_back({std::string(side) + ".final_ln.gain", {d}});
    out.push_back({std::string(side) + ".final_ln.bias", {d}});
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> sinusoids(std::size_t max_len, std::size_t d) {
  std::vector<T> pe(max_len * d);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe[pos * d + i] = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d) pe[pos * d + i + 1] = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return pe;
}

}  // namespace

template <typename T>
Transformer<T>::Transformer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const double d = static_cast<double>(config_.d_model);
  for (const auto& [name, shape] : parameter_layout(config_)) {
    Tensor<T> t(shape);
    if (name == "enc.embed" || name == "dec.embed") {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(d));
      for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    } else if (ends_with(name, ".gain")) {
      t.fill(T{1});
    } else if (ends_with(name, ".w")) {
      const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    }
    params_.add(name, std::move(t));
  }
  positional_ = sinusoids<T>(config_.max_len, config_.d_model);
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& config, ParamStore<T> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw Error("checkpoint holds " + std::to_string(params_.size()) + " tensors, model expects " +
                std::to_string(layout.size()));
  }
  for (const auto& [name, shape] : layout) {
    if (!params_.contains(name)) throw Error("checkpoint is missing parameter '" + name + "'");
    if (params_.get(name).shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(params_.get(name).shape()) +
                       ", expected " + shape_str(shape));
    }
  }
  positional_ = sinusoids<T>(config_.max_len, config_.d_model);
}

template <typename T>
ops::AttentionMask Transformer<T>::key_padding_mask(const IdMatrix& keys, std::size_t queries) {
  ops::AttentionMask m{keys.rows, queries, keys.cols, {}};
  m.visible.resize(keys.rows * queries * keys.cols);
  for (std::size_t b = 0; b < keys.rows; ++b)
    for (std::size_t q = 0; q < queries; ++q)
      for (std::size_t k = 0; k < keys.cols; ++k)
        m.visible[(b * queries + q) * keys.cols + k] = keys.is_pad(b, k) ? 0 : 1;
  return m;
}

template <typename T>
ops::AttentionMask Transformer<T>::causal_mask(const IdMatrix& tgt) {
  ops::AttentionMask m{tgt.rows, tgt.cols, tgt.cols, {}};
  m.visible.resize(tgt.rows * tgt.cols * tgt.cols);
  for (std::size_t b = 0; b < tgt.rows; ++b)
    for (std::size_t q = 0; q < tgt.cols; ++q)
      for (std::size_t k = 0; k < tgt.cols; ++k)
        m.visible[(b * tgt.cols + q) * tgt.cols + k] = (k <= q && !tgt.is_pad(b, k)) ? 1 : 0;
  return m;
}

template <typename T>
Var<T> Transformer<T>::table_for(Side side, const ForwardOptions<T>& opt) const {
  const Var<T>& base = p(side == Side::encoder ? "enc.embed" : "dec.embed");
  Var<T> table = opt.hooks ? opt.hooks->embedding_table(side, base, opt.trace) : base;
  if (opt.trace) opt.trace->embedding_tables.push_back(table.value());
  return table;
}

template <typename T>
Var<T> Transformer<T>::embed(Side side, const IdMatrix& ids, const Var<T>& table,
                             const ForwardOptions<T>& opt) const {
  (void)side;
  if (ids.cols > config_.max_len) {
    throw Error("sequence length " + std::to_string(ids.cols) + " exceeds max_len " +
                std::to_string(config_.max_len));
  }
  const std::size_t d = config_.d_model;
  Var<T> x = ops::embedding(table, std::span<const std::int32_t>(ids.ids), Shape{ids.rows, ids.cols});
  x = ops::scale(x, static_cast<T>(std::sqrt(static_cast<double>(d))));
  Tensor<T> pe(Shape{ids.rows, ids.cols, d});
  for (std::size_t b = 0; b < ids.rows; ++b)
    std::copy(positional_.begin(), positional_.begin() + static_cast<std::ptrdiff_t>(ids.cols * d),
              pe.raw() + b * ids.cols * d);
  x = ops::add_constant(x, pe);
  if (opt.training && config_.dropout > 0.0) {
    if (!opt.rng) throw Error("training forward pass needs an rng for dropout");
    x = ops::dropout(x, static_cast<T>(config_.dropout), *opt.rng);
  }
  return x;
}

template <typename T>
Var<T> Transformer<T>::attention(const std::string& prefix, const Var<T>& query_in,
                                 const Var<T>& kv_in, const ops::AttentionMask& mask) const {
  const std::size_t heads = config_.heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(config_.d_model / heads)));
  Var<T> q = ops::linear(query_in, p(prefix + ".q.w"), p(prefix + ".q.b"));
  Var<T> k = ops::linear(kv_in, p(prefix + ".k.w"), p(prefix + ".k.b"));
  Var<T> v = ops::linear(kv_in, p(prefix + ".v.w"), p(prefix + ".v.b"));
  Var<T> scores = ops::scale(ops::bmm(ops::split_heads(q, heads), ops::split_heads(k, heads), true), inv_sqrt);
  Var<T> probs = ops::masked_softmax(scores, mask, heads);
  Var<T> context = ops::merge_heads(ops::bmm(probs, ops::split_heads(v, heads), false), heads);
  return ops::linear(context, p(prefix + ".o.w"), p(prefix + ".o.b"));
}

template <typename T>
Var<T> Transformer<T>::feed_forward(const std::string& prefix, const Var<T>& x,
                                   const ForwardOptions<T>& opt) const {
  Var<T> h = ops::relu(ops::linear(x, p(prefix + ".fc1.w"), p(prefix + ".fc1.b")));
  if (opt.training && config_.dropout > 0.0) h = ops::dropout(h, static_cast<T>(config_.dropout), *opt.rng);
  return ops::linear(h, p(prefix + ".fc2.w"), p(prefix + ".fc2.b"));
}

template <typename T>
SublayerResult<T> Transformer<T>::sublayer_forward(const Site& site, const Var<T>& x,
                                                   const AttentionInputs<T>& attn,
                                                   const ForwardOptions<T>& opt) const {
  if (site.kind == SiteKind::block) throw Error("sublayer_forward: block is not a sub-layer site");
  const std::size_t layers = site.side == Side::encoder ? config_.enc_layers : config_.dec_layers;
  if (site.layer >= layers || (site.side == Side::encoder && site.kind == SiteKind::cross_attn)) {
    throw Error("no such site " + site.name());
  }
  const auto& s = x.shape();
  if (s.size() != 3 || s[2] != config_.d_model) {
    throw ShapeError("site " + site.name() + " expects (batch, seq, " +
                     std::to_string(config_.d_model) + "), got " + shape_str(s));
  }
  const std::string prefix = site.name();
  SublayerResult<T> r;
  r.ln_out = ops::layer_norm(x, p(prefix + ".ln.gain"), p(prefix + ".ln.bias"),
                             static_cast<T>(config_.ln_eps));
  switch (site.kind) {
    case SiteKind::self_attn:
      if (!attn.self_mask) throw Error("self-attention at " + prefix + " needs a mask");
      r.body = attention(prefix, r.ln_out, r.ln_out, *attn.self_mask);
      break;
    case SiteKind::cross_attn:
      if (!attn.memory || !attn.memory_mask) throw Error("cross-attention at " + prefix + " needs memory");
      r.body = attention(prefix, r.ln_out, *attn.memory, *attn.memory_mask);
      break;
    default:
      r.body = feed_forward(prefix, r.ln_out, opt);
  }
  if (opt.training && config_.dropout > 0.0) {
    if (!opt.rng) throw Error("training forward pass needs an rng for dropout");
    r.body = ops::dropout(r.body, static_cast<T>(config_.dropout), *opt.rng);
  }
  r.output = ops::add(x, r.body);
  return r;
}

template <typename T>
Var<T> Transformer<T>::run_site(const Site& site, const Var<T>& x, const AttentionInputs<T>& attn,
                                const ForwardOptions<T>& opt, Var<T>* ln_out) const {
  auto r = sublayer_forward(site, x, attn, opt);
  if (ln_out) *ln_out = r.ln_out;
  std::size_t index = 0;
  if (opt.trace) {
    index = opt.trace->records.size();
    SiteRecord<T> rec;
    rec.site = site;
    rec.input = x.value();
    rec.ln_out = r.ln_out.value();
    rec.body = r.body.value();
    rec.base_output = r.output.value();
    opt.trace->records.push_back(std::move(rec));
  }
  Var<T> out = opt.hooks ? opt.hooks->sublayer_output(site, x, r.ln_out, r.output, opt.trace) : r.output;
  if (opt.trace) opt.trace->records[index].output = out.value();
  return out;
}

template <typename T>
Var<T> Transformer<T>::run_block(Side side, std::size_t layer, const Var<T>& x,
                                 const AttentionInputs<T>& attn, const ForwardOptions<T>& opt) const {
  Var<T> first_ln;
  Var<T> h = run_site({side, layer, SiteKind::self_attn}, x, attn, opt, &first_ln);
  if (side == Side::decoder) h = run_site({side, layer, SiteKind::cross_attn}, h, attn, opt, nullptr);
  h = run_site({side, layer, SiteKind::ffn}, h, attn, opt, nullptr);

  const Site block{side, layer, SiteKind::block};
  std::size_t index = 0;
  if (opt.trace) {
    index = opt.trace->records.size();
    SiteRecord<T> rec;
    rec.site = block;
    rec.input = x.value();
    rec.ln_out = first_ln.value();
    rec.base_output = h.value();
    opt.trace->records.push_back(std::move(rec));
  }
  Var<T> out = opt.hooks ? opt.hooks->block_output(block, x, first_ln, h, opt.trace) : h;
  if (opt.trace) opt.trace->records[index].output = out.value();
  return out;
}

template <typename T>
EncoderState<T> Transformer<T>::encode(const IdMatrix& src, const ForwardOptions<T>& opt) const {
  if (src.rows == 0 || src.cols == 0) throw Error("encode: empty source batch");
  const auto mask = key_padding_mask(src, src.cols);
  AttentionInputs<T> attn;
  attn.self_mask = &mask;
  Var<T> x = embed(Side::encoder, src, table_for(Side::encoder, opt), opt);
  for (std::size_t l = 0; l < config_.enc_layers; ++l) x = run_block(Side::encoder, l, x, attn, opt);
  x = ops::layer_norm(x, p("enc.final_ln.gain"), p("enc.final_ln.bias"), static_cast<T>(config_.ln_eps));
  return {x, src};
}

template <typename T>
DecoderOutput<T> Transformer<T>::decode(const EncoderState<T>& enc, const IdMatrix& tgt_in,
                                        const ForwardOptions<T>& opt) const {
  if (tgt_in.rows != enc.src.rows) {
    throw ShapeError("decode: " + std::to_string(tgt_in.rows) + " target rows for " +
                     std::to_string(enc.src.rows) + " source rows");
  }
  if (tgt_in.cols == 0) throw Error("decode: empty target prefix");
  const auto self_mask = causal_mask(tgt_in);
  const auto memory_mask = key_padding_mask(enc.src, tgt_in.cols);
  AttentionInputs<T> attn;
  attn.self_mask = &self_mask;
  attn.memory = &enc.states;
  attn.memory_mask = &memory_mask;
  DecoderOutput<T> out;
  out.output_table = table_for(Side::decoder, opt);
  Var<T> x = embed(Side::decoder, tgt_in, out.output_table, opt);
  for (std::size_t l = 0; l < config_.dec_layers; ++l) x = run_block(Side::decoder, l, x, attn, opt);
  out.hidden = ops::layer_norm(x, p("dec.final_ln.gain"), p("dec.final_ln.bias"),
                               static_cast<T>(config_.ln_eps));
  return out;
}

template <typename T>
Var<T> Transformer<T>::logits(const DecoderOutput<T>& dec) const {
  return ops::matmul_nt(dec.hidden, dec.output_table);
}

template <typename T>
Var<T> Transformer<T>::forward_loss(const text::Batch& batch, const ForwardOptions<T>& opt) const {
  if (batch.tgt_out.non_pad_count() == 0) throw Error("forward_loss: every target token is padding");
  auto enc = encode(batch.src, opt);
  auto dec = decode(enc, batch.tgt_in, opt);
  Var<T> z = ops::reshape(logits(dec), Shape{batch.tgt_in.rows * batch.tgt_in.cols, config_.vocab_size});
  return ops::cross_entropy(z, std::span<const std::int32_t>(batch.tgt_out.ids),
                            static_cast<T>(config_.label_smoothing), Vocabulary::kPad);
}

template <typename T>
Tensor<T> Transformer<T>::decode_step(const EncoderState<T>& enc, const IdMatrix& prefixes,
                                      const ForwardOptions<T>& opt) const {
  if (prefixes.cols == 0) throw Error("decode_step: prefix must start with BOS");
  if (prefixes.cols > config_.max_len) {
    throw Error("decode_step: prefix length " + std::to_string(prefixes.cols) + " exceeds max_len " +
                std::to_string(config_.max_len));
  }
  NoGradGuard no_grad;
  auto dec = decode(enc, prefixes, opt);
  const std::size_t rows = prefixes.rows, len = prefixes.cols, d = config_.d_model;
  Tensor<T> last(Shape{rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* h = dec.hidden.value().raw() + (r * len + len - 1) * d;
    std::copy(h, h + d, last.raw() + r * d);
  }
  return ops::matmul_nt(Var<T>(std::move(last)), dec.output_table).value();
}

template struct EncoderState<float>;
template struct EncoderState<double>;
template class Transformer<float>;
template class Transformer<double>;

}  // namespace ciat::model
