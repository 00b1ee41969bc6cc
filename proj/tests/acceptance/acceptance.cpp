// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "beam_oracle.hpp"
#include "bleu_cases.hpp"
#include "ciat/adapters/model_view.hpp"
#include "ciat/adapters/param_count.hpp"
#include "ciat/eval/acs.hpp"
#include "ciat/eval/analysis.hpp"
#include "ciat/eval/bleu.hpp"
#include "ciat/inference/translate.hpp"
#include "ciat/training/trainer.hpp"
#include "grad_suite.hpp"

using namespace ciat;
using adapters::AdapterBank;
using adapters::AdapterConfig;
using adapters::AdapterMode;
using adapters::ModelView;
using model::Transformer;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::vector<AdapterMode> kModes{AdapterMode::ciat,   AdapterMode::ciat_layer,  AdapterMode::ciat_basic,
                                      AdapterMode::serial, AdapterMode::mono_serial, AdapterMode::mono_parallel};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / b; }

// Pair bank, or a source/target pair of mono banks, plugged into one view.
template <typename T>
struct Plugged {
  std::vector<AdapterBank<T>> banks;
  ModelView<T> view;

  Plugged(const Transformer<T>& base, AdapterMode mode, std::size_t bottleneck, std::uint64_t seed) : view(base) {
    const auto ac = AdapterConfig::for_mode(mode, bottleneck);
    if (adapters::is_mono(mode)) {
      banks.emplace_back(adapters::BankKey{"en"}, base.config(), ac, seed);
      banks.emplace_back(adapters::BankKey{"de"}, base.config(), ac, seed + 1);
      view.plug(banks[0], banks[1]);
    } else {
      banks.emplace_back(adapters::BankKey{"en-de"}, base.config(), ac, seed);
      view.plug(banks[0]);
    }
  }
};

Outcome params_criterion() {
  using adapters::count_params;
  const auto big = model::ModelConfig::big();
  const auto small = model::ModelConfig::small_iwslt();
  const auto b = [](const model::ModelConfig& mc, AdapterMode m, std::size_t k = 0) {
    return count_params(mc, AdapterConfig::for_mode(m, k));
  };
  const auto base = b(big, AdapterMode::ciat).base;
  const auto serial = b(big, AdapterMode::serial).per_bank;
  const auto ciat = b(big, AdapterMode::ciat).per_bank;
  const auto sbase = b(small, AdapterMode::ciat, 128).base;
  const auto basic = b(small, AdapterMode::ciat_basic, 128).per_bank;
  const auto layer = b(small, AdapterMode::ciat_layer, 128).per_bank;
  const auto full = b(small, AdapterMode::ciat, 128).per_bank;
  const auto embed = b(small, AdapterMode::ciat, 128).embedding_adapters;
  const bool pass = rel(base, 242e6) < 0.01 && rel(serial, 12.6e6) < 0.02 && rel(ciat, 27.3e6) < 0.02 &&
                    rel(sbase, 20e6) < 0.02 && rel(basic, 264e3) < 0.02 && rel(layer, 528e3) < 0.02 &&
                    rel(full, 660e3) < 0.02 && rel(embed, 132e3) < 0.02;
  std::ostringstream s;
  s << "big base " << base << ", serial " << serial << ", ciat " << ciat << "; small base " << sbase << ", banks "
    << basic << "/" << layer << "/" << full << ", embedding " << embed;
  return {pass, s.str()};
}

Outcome grad_criterion() {
  double worst = 0.0;
  std::string where;
  auto note = [&](const std::string& name, const GradCheckReport& r) {
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      where = name + ":" + r.worst_param;
    }
  };
  for (const auto& c : fixtures::primitive_grad_cases()) note(c.name, c.report);
  note("embedding_adapter", fixtures::embedding_adapter_grad_check());
  bool frozen_ok = true;
  for (auto mode : {AdapterMode::ciat, AdapterMode::ciat_basic, AdapterMode::serial}) {
    auto r = fixtures::adapter_grad_check(mode);
    note(adapters::to_string(mode), r.report);
    frozen_ok = frozen_ok && r.base_grads_absent;
  }
  return {worst < 1e-6 && frozen_ok,
          "max relative error " + fmt("%.2e", worst) + " at " + where + (frozen_ok ? "" : "; base received gradients")};
}

Outcome identity_criterion() {
  const auto cfg = fixtures::tiny_config(24, 2, 16, 2, 32);
  Transformer<double> base(cfg, 5);
  std::mt19937_64 rng(6);
  const auto batch = fixtures::random_batch(4, 6, 5, cfg.vocab_size, rng);
  const auto bare = base.logits(base.decode(base.encode(batch.src), batch.tgt_in)).value();
  std::vector<std::vector<text::TokenId>> sources;
  for (int i = 0; i < 6; ++i) {
    auto ids = fixtures::random_ids(1, 3 + i % 4, cfg.vocab_size, rng, false, 5);
    ids.ids.insert(ids.ids.begin(), 4);
    ids.ids.push_back(text::Vocabulary::kEos);
    sources.push_back(ids.ids);
  }
  ModelView<double> bare_view(base);
  const inference::BeamOptions beam{4, 0.6, 10};
  std::vector<std::vector<text::TokenId>> bare_out;
  for (const auto& s : sources) bare_out.push_back(inference::translate_ids(bare_view, s, beam).best.tokens);

  std::string failed;
  for (auto mode : kModes) {
    Plugged<double> p(base, mode, 0, 11);
    for (auto& b : p.banks) {
      fixtures::randomize_bank(b, rng);
      b.zero_up_projections();
    }
    const auto opt = p.view.options();
    const auto out = base.logits(base.decode(base.encode(batch.src, opt), batch.tgt_in, opt));
    bool same = out.value().bit_identical(bare);
    for (std::size_t i = 0; i < sources.size(); ++i)
      same = same && inference::translate_ids(p.view, sources[i], beam).best.tokens == bare_out[i];
    if (!same) failed += std::string(failed.empty() ? "" : ",") + adapters::to_string(mode);
  }
  return {failed.empty(), failed.empty() ? "logits and beam output bit-identical for all 6 modes"
                                         : "differs for " + failed};
}

Outcome freeze_criterion() {
  std::mt19937_64 rng(7);
  const auto cfg = fixtures::tiny_config(16, 2, 16, 2, 32);
  const auto train = fixtures::copy_examples(200, cfg.vocab_size, 5, rng);
  Transformer<float> base(cfg, 8);
  const auto before = base.params().fingerprints();
  AdapterBank<float> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 9);
  const auto bank_before = bank.params().fingerprints();
  training::RunConfig run;
  run.phase = training::Phase::adapter;
  run.max_steps = 500;
  run.warmup = 100;
  run.max_tokens = 128;
  const auto result = training::train_adapter(base, bank, train, {}, run);
  const bool base_same = base.params().fingerprints() == before;
  std::size_t changed = 0;
  for (const auto& [name, fp] : bank.params().fingerprints()) changed += fp != bank_before.at(name);
  const bool pass = result.steps == 500 && base_same && changed == bank_before.size();
  return {pass, std::to_string(result.steps) + " steps; base " + (base_same ? "unchanged" : "CHANGED") + "; " +
                    std::to_string(changed) + "/" + std::to_string(bank_before.size()) + " adapter tensors changed"};
}

// Two target languages share one token inventory but map each source token
// to different outputs (and the second reverses word order).
struct InterferenceTask {
  static constexpr std::size_t kWords = 12;
  static constexpr text::TokenId kFirst = text::Vocabulary::kNumSpecials + 2;
  std::vector<text::TokenId> map_a, map_b;

  explicit InterferenceTask(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < kWords; ++i) map_a.push_back(kFirst + static_cast<text::TokenId>(i));
    map_b = map_a;
    std::shuffle(map_a.begin(), map_a.end(), rng);
    do std::shuffle(map_b.begin(), map_b.end(), rng);
    while (std::mismatch(map_a.begin(), map_a.end(), map_b.begin()).first != map_a.end() &&
           [&] {
             for (std::size_t i = 0; i < kWords; ++i)
               if (map_a[i] == map_b[i]) return true;
             return false;
           }());
  }

  std::size_t vocab() const { return kFirst + kWords; }

  std::vector<text::Example> examples(int lang, std::size_t n, std::mt19937_64& rng) const {
    std::vector<text::Example> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = 2 + rng() % 5;
      auto& e = out[i];
      e.src.push_back(text::Vocabulary::kNumSpecials + lang);
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t w = rng() % kWords;
        e.src.push_back(kFirst + static_cast<text::TokenId>(w));
        e.tgt.push_back(lang == 0 ? map_a[w] : map_b[w]);
      }
      if (lang == 1) std::reverse(e.tgt.begin(), e.tgt.end());
      e.src.push_back(text::Vocabulary::kEos);
      e.corpus_index = static_cast<std::size_t>(lang);
      e.line = i;
    }
    return out;
  }
};

struct InterferenceRun {
  double base_dev[2];
  double ciat_red[2];
  double serial_red[2];
};

InterferenceRun interference_run(std::uint64_t seed) {
  InterferenceTask task(seed);
  std::mt19937_64 rng(seed + 100);
  const auto cfg = fixtures::tiny_config(task.vocab(), 2, 32, 4, 64);
  std::vector<text::Example> joint;
  std::vector<text::Example> train[2];
  std::vector<text::Batch> dev[2];
  for (int lang = 0; lang < 2; ++lang) {
    train[lang] = task.examples(lang, 3000, rng);
    joint.insert(joint.end(), train[lang].begin(), train[lang].end());
    dev[lang] = text::batch_examples(task.examples(lang, 100, rng), 256, 0).batches;
  }
  Transformer<float> base(cfg, seed);
  training::RunConfig run;
  run.seed = seed;
  run.max_steps = 400;
  run.warmup = 100;
  run.max_tokens = 128;
  training::train_base(base, joint, {}, run);

  InterferenceRun r{};
  run.phase = training::Phase::adapter;
  run.max_steps = 600;
  for (int lang = 0; lang < 2; ++lang) {
    r.base_dev[lang] = training::evaluate_loss<float>(base, nullptr, dev[lang]);
    for (auto mode : {AdapterMode::ciat, AdapterMode::serial}) {
      AdapterBank<float> bank({lang == 0 ? "en-xa" : "en-xb"}, cfg, AdapterConfig::for_mode(mode), seed + 7);
      training::train_adapter(base, bank, train[lang], {}, run);
      ModelView<float> view(base);
      view.plug(bank);
      const double adapted = training::evaluate_loss<float>(base, &view, dev[lang]);
      const double reduction = (r.base_dev[lang] - adapted) / r.base_dev[lang];
      (mode == AdapterMode::ciat ? r.ciat_red : r.serial_red)[lang] = reduction;
    }
  }
  return r;
}

Outcome interference_criterion() {
  std::vector<double> ciat_med, serial_med;
  bool all_ten = true;
  std::ostringstream s;
  std::vector<double> ciat_red[2], serial_red[2];
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = interference_run(seed);
    for (int lang = 0; lang < 2; ++lang) {
      ciat_red[lang].push_back(r.ciat_red[lang]);
      serial_red[lang].push_back(r.serial_red[lang]);
      all_ten = all_ten && r.ciat_red[lang] >= 0.10;
    }
    s << "seed " << seed << ": base dev " << fmt("%.3f", r.base_dev[0]) << "/" << fmt("%.3f", r.base_dev[1])
      << ", ciat " << fmt("%.1f%%", 100 * r.ciat_red[0]) << "/" << fmt("%.1f%%", 100 * r.ciat_red[1]) << ", serial "
      << fmt("%.1f%%", 100 * r.serial_red[0]) << "/" << fmt("%.1f%%", 100 * r.serial_red[1]) << "; ";
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  bool ordered = true;
  for (int lang = 0; lang < 2; ++lang) {
    const double c = median(ciat_red[lang]), sr = median(serial_red[lang]);
    ordered = ordered && c >= sr;
    s << "pair " << lang << " median ciat " << fmt("%.1f%%", 100 * c) << " vs serial " << fmt("%.1f%%", 100 * sr)
      << (lang == 0 ? "; " : "");
  }
  return {all_ten && ordered, s.str()};
}

Outcome provenance_criterion() {
  std::mt19937_64 rng(13);
  std::size_t checked = 0, configs = 0;
  std::string failure;
  for (; configs < 100 && failure.empty(); ++configs) {
    const std::size_t heads = 1 + rng() % 2;
    const std::size_t d = heads * (4 + 2 * (rng() % 3));
    const auto cfg = fixtures::tiny_config(10 + rng() % 10, 1 + rng() % 3, d, heads, d * 2);
    const auto mode = kModes[rng() % kModes.size()];
    Transformer<double> base(cfg, rng());
    Plugged<double> p(base, mode, 1 + rng() % (d - 1), rng());
    for (auto& b : p.banks) fixtures::randomize_bank(b, rng);
    const auto batch = fixtures::random_batch(1 + rng() % 3, 1 + rng() % 5, 1 + rng() % 4, cfg.vocab_size, rng);
    model::ForwardTrace<double> trace;
    (void)base.forward_loss(batch, p.view.options(&trace));
    std::size_t adapted = 0;
    for (const auto& r : trace.records) {
      if (!r.adapted) continue;
      ++adapted;
      const auto& expected = adapters::is_serial(mode) ? r.base_output : r.input;
      if (!r.adapter_input.bit_identical(expected)) failure = adapters::to_string(mode) + (" at " + r.site.name());
      ++checked;
    }
    if (adapted != p.banks[0].placements().size()) failure = std::string(adapters::to_string(mode)) + " skipped sites";
  }
  return {failure.empty() && configs == 100,
          failure.empty() ? std::to_string(configs) + " configs, " + std::to_string(checked) + " adapted sites checked"
                          : "mismatch: " + failure};
}

Outcome bleu_criterion() {
  double worst = 0.0;
  for (const auto& c : fixtures::bleu_cases())
    worst = std::max(worst, std::abs(eval::bleu(c.hyps, c.refs, c.options).score - c.expected));
  const std::vector<std::string> text{"a small corpus for the self check", "with two lines of text"};
  const double self = eval::bleu(text, text).score;
  return {worst < 1e-6 && self == 100.0,
          "10 corpora, max abs error " + fmt("%.1e", worst) + "; self BLEU " + fmt("%.6f", self)};
}

Outcome acs_criterion() {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t vocab = 5 + rng() % 30, d = 2 + rng() % 16;
    const auto table = fixtures::random_tensor<double>({vocab, d}, rng);
    std::vector<std::pair<text::TokenId, text::TokenId>> pairs;
    for (std::size_t i = 0; i < 1 + rng() % 20; ++i)
      pairs.emplace_back(static_cast<text::TokenId>(rng() % vocab), static_cast<text::TokenId>(rng() % vocab));
    long double total = 0;
    for (const auto& [a, b] : pairs) {
      long double dot = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < d; ++k) {
        const long double x = table[a * d + k], y = table[b * d + k];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      total += dot / std::sqrt(na * nb);
    }
    const double oracle = static_cast<double>(total / pairs.size());
    worst = std::max(worst, std::abs(eval::acs(table, pairs).mean - oracle));
  }
  const auto cfg = fixtures::tiny_config(20, 2, 8);
  Transformer<double> base(cfg, 3);
  AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 4);
  ModelView<double> view(base);
  view.plug(bank);
  const std::vector<std::pair<text::TokenId, text::TokenId>> pairs{{5, 6}, {7, 12}, {9, 19}, {4, 8}};
  const double raw = eval::acs(base.params().get("enc.embed").value(), pairs).mean;
  const double zero = eval::acs(eval::embedding_view(view, model::Side::encoder), pairs).mean;
  return {worst < 1e-9 && raw == zero,
          "max error vs oracle " + fmt("%.1e", worst) + "; zero-adapter ACS " + fmt("%.12f", zero) + " vs raw " +
              fmt("%.12f", raw)};
}

Outcome ablation_criterion() {
  const auto corpus = fixtures::word_map_corpus(400, 5);
  const auto bpe = text::learn_bpe({corpus}, 200);
  const auto vocab = text::Vocabulary::build(bpe, text::corpus_languages({corpus}));
  const auto cfg = fixtures::tiny_config(vocab.size(), 2, 16, 2, 32);
  Transformer<float> base(cfg, 21);
  training::RunConfig run;
  run.max_steps = 400;
  run.warmup = 100;
  run.max_tokens = 160;
  training::train_base(base, text::encode_corpus(corpus, 0, vocab, bpe), {}, run);

  const std::vector<std::string> sources(corpus.source.end() - 20, corpus.source.end());
  const std::vector<std::string> targets(corpus.target.end() - 20, corpus.target.end());
  eval::AblationOptions opt;
  opt.translate.beam = {3, 0.6, 12};
  opt.disable_embedding_adapters = true;
  ModelView<float> bare(base);
  const double bare_bleu =
      eval::bleu(inference::translate(bare, vocab, bpe, sources, corpus.pair, opt.translate).sentences, targets)
          .score;
  std::ostringstream s;
  s << "bare BLEU " << fmt("%.4f", bare_bleu) << "; ";
  bool exact = bare_bleu > 0.0;
  std::mt19937_64 rng(22);
  for (auto side : {model::Side::encoder, model::Side::decoder}) {
    // Units on the other side keep zero up-projections.
    AdapterBank<float> bank({"xs-xt"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 23);
    fixtures::randomize_bank(bank, rng, 0.5);
    const std::string other = side == model::Side::encoder ? "dec." : "enc.";
    for (const auto& [name, var] : bank.params().all())
      if (name.starts_with(other) && (name.ends_with(".up.w") || name.ends_with(".up.b"))) {
        Var<float> h = var;
        for (auto& v : h.mutable_value().data()) v = 0.0f;
      }
    ModelView<float> view(base);
    view.plug(bank);
    const auto grid = eval::span_ablation(view, vocab, bpe, sources, targets, corpus.pair, side, opt);
    const double full_span = grid.bleu[0][grid.layers - 1];
    exact = exact && full_span == bare_bleu;
    s << model::to_string(side) << " full span " << fmt("%.4f", full_span) << " (adapted "
      << fmt("%.4f", grid.full_bleu) << "); ";
  }
  AdapterBank<float> zero({"xs-xt"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 24);
  ModelView<float> view(base);
  view.plug(zero);
  const auto profile = eval::norm_ratio_profile(view, text::build_batches({corpus}, vocab, bpe, 160, 0).batches);
  bool all_zero = !profile.sites.empty();
  for (const auto& site : profile.sites) all_zero = all_zero && site.ratio == 0.0;
  s << "zero-bank profile " << (all_zero ? "all zero" : "NONZERO") << " over " << profile.sites.size() << " sites";
  return {exact && all_zero, s.str()};
}

Outcome beam_criterion() {
  std::mt19937_64 rng(31);
  std::size_t mismatches = 0, runs = 0;
  for (int toy = 0; toy < 50; ++toy) {
    const std::size_t v = 2 + rng() % 4, len = 1 + rng() % 4;
    const std::size_t beam = static_cast<std::size_t>(std::pow(v, len)) + rng() % 3;
    fixtures::ToyScorer scorer(v, rng());
    for (double alpha : {0.0, 0.6, 1.0}) {
      ++runs;
      const auto got = inference::beam_search(scorer, {beam, alpha, len});
      const auto want = fixtures::exhaustive_best(scorer, len, alpha);
      if (!got.finished || got.best.tokens != want.tokens || std::abs(got.best.score - want.score) > 1e-12)
        ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(runs) + " searches, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "parameter counts", 1.0, params_criterion},
      {2, "gradient check", 120.0, grad_criterion},
      {3, "identity at zero", 60.0, identity_criterion},
      {4, "freeze contract", 300.0, freeze_criterion},
      {5, "synthetic interference", 1200.0, interference_criterion},
      {6, "serial/parallel provenance", 60.0, provenance_criterion},
      {7, "BLEU", 1.0, bleu_criterion},
      {8, "ACS", 1.0, acs_criterion},
      {9, "ablation and norm profile", 120.0, ablation_criterion},
      {10, "beam search vs exhaustive", 60.0, beam_criterion},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    ++ran;
    std::printf("[%s] criterion %d %s: %s (%.2fs, limit %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
