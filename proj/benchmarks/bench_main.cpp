#include <benchmark/benchmark.h>

#include <random>

#include "ciat/adapters/model_view.hpp"
#include "ciat/eval/bleu.hpp"
#include "ciat/inference/translate.hpp"
#include "ciat/training/optimizer.hpp"
#include "toy.hpp"

using namespace ciat;

namespace {

void BM_Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  Var<float> x(fixtures::random_tensor<float>({64, n}, rng), true);
  Var<float> w(fixtures::random_tensor<float>({n, n}, rng), true);
  Var<float> b(fixtures::random_tensor<float>({n}, rng), true);
  for (auto _ : state) {
    auto y = ops::linear(x, w, b);
    benchmark::DoNotOptimize(y.value().raw());
  }
  state.SetItemsProcessed(state.iterations() * 64 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Linear)->Arg(64)->Arg(256)->Arg(512);

void BM_LinearBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  Var<float> x(fixtures::random_tensor<float>({64, n}, rng), true);
  Var<float> w(fixtures::random_tensor<float>({n, n}, rng), true);
  Var<float> b(fixtures::random_tensor<float>({n}, rng), true);
  for (auto _ : state) {
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    backward(ops::sum(ops::linear(x, w, b)));
    benchmark::DoNotOptimize(w.grad().raw());
  }
}
BENCHMARK(BM_LinearBackward)->Arg(64)->Arg(256);

void BM_LayerNormSoftmax(benchmark::State& state) {
  std::mt19937_64 rng(2);
  Var<float> x(fixtures::random_tensor<float>({32, 16, 256}, rng));
  Var<float> g(Tensor<float>({256}, 1.0f)), b(Tensor<float>({256}, 0.0f));
  for (auto _ : state) {
    auto y = ops::softmax(ops::layer_norm(x, g, b, 1e-6f));
    benchmark::DoNotOptimize(y.value().raw());
  }
}
BENCHMARK(BM_LayerNormSoftmax);

// One optimizer step of a 2+2 layer d=64 model, with and without a plugged bank.
void BM_TrainStep(benchmark::State& state) {
  const bool adapter = state.range(0) != 0;
  const auto cfg = fixtures::tiny_config(200, 2, 64, 4, 256);
  model::Transformer<float> m(cfg, 1);
  adapters::AdapterBank<float> bank({"en-de"}, cfg, adapters::AdapterConfig::for_mode(adapters::AdapterMode::ciat), 2);
  adapters::ModelView<float> view(m);
  training::ParamList<float> params;
  if (adapter) {
    view.plug(bank);
    m.params().set_trainable(false);
    params = training::trainable(bank.params());
  } else {
    params = training::trainable(m.params());
  }
  std::mt19937_64 rng(3);
  const auto batch = fixtures::random_batch(16, 20, 20, cfg.vocab_size, rng);
  training::Adam<float> adam;
  model::ForwardOptions<float> opt = view.options();
  for (auto _ : state) {
    for (auto [name, var] : params) var.zero_grad();
    backward(m.forward_loss(batch, opt));
    training::clip_grad_norm(params, 1.0);
    adam.step(params, 1e-3);
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BeamSearch(benchmark::State& state) {
  const auto cfg = fixtures::tiny_config(200, 2, 64, 4, 256);
  model::Transformer<float> m(cfg, 1);
  adapters::ModelView<float> view(m);
  std::mt19937_64 rng(4);
  auto src = fixtures::random_ids(1, 15, cfg.vocab_size, rng, false, 5).ids;
  src.insert(src.begin(), 4);
  src.push_back(text::Vocabulary::kEos);
  const inference::BeamOptions beam{static_cast<std::size_t>(state.range(0)), 0.6, 20};
  for (auto _ : state) benchmark::DoNotOptimize(inference::translate_ids(view, src, beam).best.log_prob);
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_CorpusBleu(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::vector<std::string> hyps, refs;
  auto sentence = [&] {
    std::string s;
    for (int k = 0; k < 20; ++k) s += (k ? " w" : "w") + std::to_string(rng() % 50);
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    hyps.push_back(sentence());
    refs.push_back(sentence());
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::bleu(hyps, refs, {true}).score);
}
BENCHMARK(BM_CorpusBleu)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
