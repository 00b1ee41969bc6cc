#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ciat/adapters/model_view.hpp"
#include "ciat/model/transformer.hpp"
#include "ciat/numerics/grad_check.hpp"
#include "ciat/numerics/ops.hpp"
#include "toy.hpp"

namespace ciat::fixtures {

struct GradCase {
  std::string name;
  GradCheckReport report;
};

// Reduces any output to a scalar with fixed random weights so every output
// element carries a distinct upstream gradient.
inline Var<double> project(const Var<double>& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(y, Var<double>(random_tensor<double>(y.shape(), rng))));
}

inline GradCase check(const std::string& name, std::vector<NamedParam> params, const std::function<Var<double>()>& f) {
  return {name, grad_check(f, std::move(params))};
}

inline std::vector<GradCase> primitive_grad_cases(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  auto param = [&](Shape s, double scale = 1.0) { return Var<double>(random_tensor<double>(s, rng, scale), true); };
  // Values kept away from the ReLU kink.
  auto off_kink = [&](Shape s) {
    auto t = random_tensor<double>(s, rng);
    for (auto& v : t.data()) v += v >= 0 ? 0.1 : -0.1;
    return Var<double>(std::move(t), true);
  };
  std::vector<GradCase> out;

  auto a = param({2, 3, 4}), b = param({2, 3, 4});
  out.push_back(check("add", {{"a", a}, {"b", b}}, [=] { return project(ops::add(a, b), 1); }));
  out.push_back(check("sub", {{"a", a}, {"b", b}}, [=] { return project(ops::sub(a, b), 2); }));
  out.push_back(check("mul", {{"a", a}, {"b", b}}, [=] { return project(ops::mul(a, b), 3); }));
  out.push_back(check("scale", {{"a", a}}, [=] { return project(ops::scale(a, 0.7), 4); }));
  const auto c = random_tensor<double>({2, 3, 4}, rng);
  out.push_back(check("add_constant", {{"a", a}}, [=] { return project(ops::add_constant(a, c), 5); }));

  auto x = param({2, 3, 4}), w = param({4, 5}), bias = param({5});
  out.push_back(check("linear", {{"x", x}, {"w", w}, {"b", bias}},
                      [=] { return project(ops::linear(x, w, bias), 6); }));
  out.push_back(check("linear_nobias", {{"x", x}, {"w", w}},
                      [=] { return project(ops::linear(x, w, Var<double>()), 7); }));
  auto m = param({6, 4});
  out.push_back(check("matmul_nt", {{"x", x}, {"m", m}}, [=] { return project(ops::matmul_nt(x, m), 8); }));

  auto p = param({3, 2, 4}), q = param({3, 4, 5}), qt = param({3, 5, 4});
  out.push_back(check("bmm", {{"a", p}, {"b", q}}, [=] { return project(ops::bmm(p, q, false), 9); }));
  out.push_back(check("bmm_t", {{"a", p}, {"b", qt}}, [=] { return project(ops::bmm(p, qt, true), 10); }));

  auto r = off_kink({3, 5});
  out.push_back(check("relu", {{"x", r}}, [=] { return project(ops::relu(r), 11); }));
  auto s = param({3, 5});
  out.push_back(check("softmax", {{"x", s}}, [=] { return project(ops::softmax(s), 12); }));

  ops::AttentionMask mask{2, 3, 4, {}};
  for (std::size_t i = 0; i < 2 * 3 * 4; ++i) mask.visible.push_back((i % 4 == 3 && i >= 12) ? 0 : 1);
  auto scores = param({4, 3, 4});
  out.push_back(check("masked_softmax", {{"x", scores}},
                      [=] { return project(ops::masked_softmax(scores, mask, 2), 13); }));

  auto ln_x = param({2, 3, 6}), gain = param({6}), lnb = param({6});
  out.push_back(check("layer_norm", {{"x", ln_x}, {"gain", gain}, {"bias", lnb}},
                      [=] { return project(ops::layer_norm(ln_x, gain, lnb, 1e-6), 14); }));

  auto table = param({7, 4});
  const std::vector<std::int32_t> ids{1, 3, 3, 6, 0, 2};
  out.push_back(check("embedding", {{"table", table}},
                      [=] { return project(ops::embedding(table, std::span(ids), Shape{2, 3}), 15); }));

  auto h = param({2, 3, 6});
  out.push_back(check("split_heads", {{"x", h}}, [=] { return project(ops::split_heads(h, 2), 16); }));
  auto hm = param({4, 3, 3});
  out.push_back(check("merge_heads", {{"x", hm}}, [=] { return project(ops::merge_heads(hm, 2), 17); }));
  out.push_back(check("reshape", {{"x", h}}, [=] { return project(ops::reshape(h, Shape{6, 6}), 18); }));
  out.push_back(check("sum", {{"x", h}}, [=] { return ops::scale(ops::sum(h), 0.3); }));
  out.push_back(check("mean", {{"x", h}}, [=] { return ops::scale(ops::mean(h), 0.3); }));
  out.push_back(check("dropout", {{"x", h}}, [=] {
    std::mt19937_64 local(99);
    return project(ops::dropout(h, 0.3, local), 19);
  }));

  auto logits = param({5, 6});
  const std::vector<std::int32_t> targets{1, 0, 4, 5, 2};
  out.push_back(check("cross_entropy", {{"logits", logits}},
                      [=] { return ops::cross_entropy(logits, std::span(targets), 0.0, 0); }));
  out.push_back(check("cross_entropy_smoothed", {{"logits", logits}},
                      [=] { return ops::cross_entropy(logits, std::span(targets), 0.1, 0); }));
  return out;
}

inline std::vector<NamedParam> named(const model::ParamStore<double>& store) {
  std::vector<NamedParam> out;
  for (const auto& [name, var] : store.all())
    if (var.requires_grad()) out.push_back({name, var});
  return out;
}

// Loss of a 2-layer, d=8 model on a 2-sentence batch through a plugged bank
// of the given mode; only adapter parameters are checked, base frozen.
struct AdapterGradResult {
  GradCheckReport report;
  bool base_grads_absent = true;
};

inline AdapterGradResult adapter_grad_check(adapters::AdapterMode mode, std::uint64_t seed = 11) {
  const auto cfg = tiny_config(12);
  model::Transformer<double> base(cfg, seed);
  base.params().set_trainable(false);
  adapters::AdapterBank<double> bank({"en-de"}, cfg, adapters::AdapterConfig::for_mode(mode, 4), seed + 1);
  std::mt19937_64 rng(seed + 2);
  randomize_bank(bank, rng);
  adapters::ModelView<double> view(base);
  view.plug(bank);
  const auto batch = random_batch(2, 4, 3, cfg.vocab_size, rng);
  auto f = [&] { return base.forward_loss(batch, view.options()); };
  AdapterGradResult r;
  r.report = grad_check(f, named(bank.params()), {});
  for (const auto& [name, var] : base.params().all())
    if (var.has_grad()) r.base_grads_absent = false;
  return r;
}

// Embedding adapter sub-network alone: sum-projected E - G(E).
inline GradCheckReport embedding_adapter_grad_check(std::uint64_t seed = 5) {
  const auto cfg = tiny_config(12);
  adapters::AdapterBank<double> bank({"en-de"}, cfg, adapters::AdapterConfig::for_mode(adapters::AdapterMode::ciat, 4),
                                     seed);
  std::mt19937_64 rng(seed + 1);
  randomize_bank(bank, rng);
  Var<double> table(random_tensor<double>({cfg.vocab_size, cfg.d_model}, rng), false);
  const auto* unit = bank.embedding_unit(model::Side::encoder);
  std::vector<NamedParam> params;
  for (const auto& [name, var] : bank.params().all())
    if (name.starts_with("enc.embed_adapter")) params.push_back({name, var});
  return grad_check([&] { return project(adapters::adapt_embedding(table, *unit), 21); }, params, {});
}

}  // namespace ciat::fixtures
