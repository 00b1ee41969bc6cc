// ciat: command-line front end for tokenizer learning, two-phase training,
// translation and analysis.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "ciat/adapters/model_view.hpp"
#include "ciat/adapters/param_count.hpp"
#include "ciat/error.hpp"
#include "ciat/eval/acs.hpp"
#include "ciat/eval/analysis.hpp"
#include "ciat/eval/bleu.hpp"
#include "ciat/eval/report.hpp"
#include "ciat/inference/translate.hpp"
#include "ciat/model/checkpoint.hpp"
#include "ciat/text/batching.hpp"
#include "ciat/training/trainer.hpp"

#ifndef CIAT_VERSION
#define CIAT_VERSION "unknown"
#endif

namespace {

using namespace ciat;
using adapters::AdapterBank;
using adapters::AdapterConfig;
using model::ModelConfig;
using Model = model::Transformer<float>;
using Bank = AdapterBank<float>;

// Flags that mirror config-file keys. A flag given on the command line
// overrides the file; otherwise the file value (or the default) stands.
class Settings {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options_.emplace_back(key, app->add_option(flag, values_[key], help));
  }

  KeyValues resolve(const std::string& config_path, const std::map<std::string, std::string>& globals) const {
    KeyValues kv;
    if (!config_path.empty()) kv = KeyValues::load(config_path);
    for (const auto& [key, opt] : options_)
      if (opt->count() > 0) kv.set(key, values_.at(key));
    for (const auto& [key, value] : globals) kv.set(key, value);
    return kv;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  std::map<std::string, std::string> overrides() const {
    std::map<std::string, std::string> m;
    if (seed_opt && seed_opt->count() > 0) m["seed"] = std::to_string(seed);
    if (threads_opt && threads_opt->count() > 0) m["threads"] = std::to_string(threads);
    return m;
  }
};

ModelConfig preset(const std::string& name) {
  if (name == "big") return ModelConfig::big();
  if (name == "iwslt" || name.empty()) return ModelConfig::small_iwslt();
  throw Error("unknown preset '" + name + "' (expected big or iwslt)");
}

void write_manifest(const std::string& out, const std::string& verb, const KeyValues& kv,
                    const std::vector<std::string>& argv) {
  if (out.empty()) return;
  KeyValues m = kv;
  m.set("verb", verb);
  m.set("version", CIAT_VERSION);
  std::string cmd;
  for (const auto& a : argv) cmd += (cmd.empty() ? "" : " ") + a;
  m.set("command", cmd);
  m.save(out + ".manifest");
}

std::vector<text::ParallelCorpus> load_corpora(const std::vector<std::string>& specs) {
  std::vector<text::ParallelCorpus> out;
  for (const auto& s : specs) {
    auto [prefix, pair] = text::parse_corpus_spec(s);
    out.push_back(text::load_corpus(prefix, pair));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) out += (out.empty() ? "" : ",") + i;
  return out;
}

struct LoadedModel {
  std::unique_ptr<Model> model;
  text::BpeModel bpe;
  text::Vocabulary vocab;
};

LoadedModel load_model(const std::string& ckpt, const std::string& bpe_path) {
  LoadedModel m;
  KeyValues header;
  m.model = std::make_unique<Model>(model::load_model<float>(ckpt, &header));
  m.bpe = text::BpeModel::load(bpe_path);
  m.vocab = text::Vocabulary::build(m.bpe, split_list(header.get("languages")));
  if (m.vocab.size() != m.model->config().vocab_size) {
    throw Error("tokenizer " + bpe_path + " gives " + std::to_string(m.vocab.size()) + " ids but " + ckpt +
                " expects " + std::to_string(m.model->config().vocab_size));
  }
  return m;
}

std::vector<text::Example> encode_all(const std::vector<text::ParallelCorpus>& corpora, const text::Vocabulary& vocab,
                                      const text::BpeModel& bpe) {
  std::vector<text::Example> out;
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    auto ex = text::encode_corpus(corpora[i], i, vocab, bpe);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

std::vector<text::Batch> eval_batches(const std::vector<text::ParallelCorpus>& corpora, const text::Vocabulary& vocab,
                                      const text::BpeModel& bpe, std::size_t max_tokens, std::uint64_t seed) {
  if (corpora.empty()) return {};
  auto plan = text::batch_examples(encode_all(corpora, vocab, bpe), max_tokens, seed);
  if (plan.skipped) std::cerr << "warning: " << plan.skipped << " evaluation sentences exceed max_tokens\n";
  return std::move(plan.batches);
}

// Plugged banks for translate/acs/analysis verbs.
struct PluggedBanks {
  std::unique_ptr<Bank> pair, src, tgt;

  void load(const std::string& bank, const std::string& src_bank, const std::string& tgt_bank) {
    if (!bank.empty()) pair = std::make_unique<Bank>(Bank::load(bank));
    if (!src_bank.empty() || !tgt_bank.empty()) {
      if (src_bank.empty() || tgt_bank.empty()) throw Error("mono banks need both --src-bank and --tgt-bank");
      if (pair) throw Error("use either --bank or --src-bank/--tgt-bank");
      src = std::make_unique<Bank>(Bank::load(src_bank));
      tgt = std::make_unique<Bank>(Bank::load(tgt_bank));
    }
  }
  void plug(adapters::ModelView<float>& view) const {
    if (pair) view.plug(*pair);
    if (src) view.plug(*src, *tgt);
  }
  bool any() const { return pair || src; }
};

std::string human(std::uint64_t n) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1);
  if (n >= 1000000) s << static_cast<double>(n) / 1e6 << "M";
  else s << static_cast<double>(n) / 1e3 << "k";
  return s.str();
}

int cmd_params(const KeyValues& kv, const std::string& out) {
  const ModelConfig mc = ModelConfig::from_kv(kv, preset(kv.get_or("preset", "")));
  const AdapterConfig ac = AdapterConfig::from_kv(kv);
  const auto pc = adapters::count_params(mc, ac);
  std::ostringstream s;
  s << "mode\t" << adapters::to_string(ac.mode) << "\n";
  s << "bottleneck\t" << ac.resolved_bottleneck(mc) << "\n";
  s << "base\t" << pc.base << "\t" << human(pc.base) << "\n";
  s << "per_bank\t" << pc.per_bank << "\t" << human(pc.per_bank) << "\n";
  if (adapters::is_mono(ac.mode)) s << "per_language_side\t" << pc.per_bank_side << "\t" << human(pc.per_bank_side) << "\n";
  s << "layer_units\t" << pc.layer_units << "\n";
  s << "embedding_adapters\t" << pc.embedding_adapters << "\t" << human(pc.embedding_adapters) << "\n";
  std::cout << s.str();
  if (!out.empty()) {
    std::ofstream f(out);
    f << eval::to_json_line(pc, adapters::to_string(ac.mode)) << '\n';
  }
  return 0;
}

int cmd_bpe_learn(const KeyValues& kv, const std::vector<std::string>& corpora_specs, const std::string& out) {
  const auto corpora = load_corpora(corpora_specs);
  const auto bpe = text::learn_bpe(corpora, kv.get_size("vocab_size", 8000));
  bpe.save(out);
  const auto langs = text::corpus_languages(corpora);
  std::cout << "alphabet " << bpe.alphabet().size() << ", merges " << bpe.merges().size() << ", vocabulary "
            << text::Vocabulary::build(bpe, langs).size() << " (languages " << join_list(langs) << ")\n";
  return 0;
}

int cmd_train_base(const KeyValues& kv, const std::vector<std::string>& corpus_specs,
                   const std::vector<std::string>& dev_specs, const std::string& bpe_path, const std::string& out) {
  const auto corpora = load_corpora(corpus_specs);
  const auto dev = load_corpora(dev_specs);
  const auto bpe = text::BpeModel::load(bpe_path);
  auto all = corpora;
  all.insert(all.end(), dev.begin(), dev.end());
  const auto langs = text::corpus_languages(all);
  const auto vocab = text::Vocabulary::build(bpe, langs);

  ModelConfig mc = ModelConfig::from_kv(kv, preset(kv.get_or("preset", "")));
  mc.vocab_size = vocab.size();
  KeyValues run_kv = kv;
  run_kv.set("phase", "base");
  const auto run = training::RunConfig::from_kv(run_kv);

  const auto examples = encode_all(corpora, vocab, bpe);
  const auto dev_batches = eval_batches(dev, vocab, bpe, run.max_tokens, run.seed);
  Model model(mc, run.seed);
  std::ofstream log(kv.get_or("log", out + ".log"));
  KeyValues extra;
  extra.set("languages", join_list(langs));
  extra.set("seed", std::to_string(run.seed));
  try {
    const auto result = training::train_base(model, examples, dev_batches, run, &log);
    extra.set("steps", result.steps);
    model::save_model(out, model, extra);
    std::cout << "trained " << result.steps << " steps, final loss " << result.log.back().loss;
    if (result.best_dev_loss) std::cout << ", best dev loss " << *result.best_dev_loss;
    std::cout << "\n";
  } catch (const training::TrainingDiverged& e) {
    // The failing step never reached the optimizer, so parameters are the last good ones.
    extra.set("steps", e.step() - 1);
    extra.set("diverged", true);
    model::save_model(out, model, extra);
    throw;
  }
  return 0;
}

int cmd_train_adapter(const KeyValues& kv, const std::string& base_path, const std::string& bpe_path,
                      const std::string& corpus_spec, const std::vector<std::string>& dev_specs,
                      const std::string& init_src, const std::string& init_tgt, const std::string& out) {
  auto m = load_model(base_path, bpe_path);
  const auto corpora = load_corpora({corpus_spec});
  const auto dev = load_corpora(dev_specs);
  const auto& pair = corpora.front().pair;
  for (const auto& d : dev)
    if (d.pair != pair) throw Error("dev corpus " + d.pair.str() + " does not match " + pair.str());

  const AdapterConfig ac = AdapterConfig::from_kv(kv);
  KeyValues run_kv = kv;
  run_kv.set("phase", "adapter");
  const auto run = training::RunConfig::from_kv(run_kv);
  const auto examples = encode_all(corpora, m.vocab, m.bpe);
  const auto dev_batches = eval_batches(dev, m.vocab, m.bpe, run.max_tokens, run.seed);
  const auto before = m.model->params().fingerprints();
  std::ofstream log(kv.get_or("log", out + ".log"));

  auto report = [&](const adapters::ModelView<float>& view) {
    if (dev_batches.empty()) return;
    std::cout << "dev loss: base " << training::evaluate_loss<float>(*m.model, nullptr, dev_batches) << ", adapted "
              << training::evaluate_loss(*m.model, &view, dev_batches) << "\n";
  };

  if (adapters::is_mono(ac.mode)) {
    auto make = [&](const std::string& init, const std::string& lang) {
      if (!init.empty()) {
        Bank b = Bank::load(init);
        if (b.key().value != lang) throw Error(init + " holds bank '" + b.key().value + "', expected " + lang);
        return b;
      }
      return Bank({lang}, m.model->config(), ac, run.seed);
    };
    Bank src = make(init_src, pair.src);
    Bank tgt = make(init_tgt, pair.tgt);
    training::train_adapter(*m.model, src, tgt, examples, dev_batches, run, &log);
    src.save(out + "." + pair.src);
    tgt.save(out + "." + pair.tgt);
    adapters::ModelView<float> view(*m.model);
    view.plug(src, tgt);
    report(view);
    std::cout << "wrote " << out << "." << pair.src << " and " << out << "." << pair.tgt << "\n";
  } else {
    Bank bank({pair.str()}, m.model->config(), ac, run.seed);
    const auto result = training::train_adapter(*m.model, bank, examples, dev_batches, run, &log);
    bank.save(out);
    adapters::ModelView<float> view(*m.model);
    view.plug(bank);
    report(view);
    std::cout << "trained " << result.steps << " steps, wrote " << out << "\n";
  }
  if (m.model->params().fingerprints() != before) throw Error("base parameters changed during adapter training");
  std::cout << "base parameters unchanged\n";
  return 0;
}

inference::TranslateOptions translate_options(const KeyValues& kv) {
  inference::TranslateOptions o;
  o.beam.beam = kv.get_size("beam", 4);
  o.beam.alpha = kv.get_double("alpha", 0.6);
  o.beam.max_len = kv.get_size("max_len_out", 0);
  o.threads = kv.get_size("threads", 1);
  o.strict = kv.get_bool("strict", true);
  return o;
}

int cmd_translate(const KeyValues& kv, const std::string& model_path, const std::string& bpe_path,
                  const std::string& input, const std::string& pair_text, const PluggedBanks& banks,
                  const std::string& out) {
  auto m = load_model(model_path, bpe_path);
  adapters::ModelView<float> view(*m.model);
  banks.plug(view);
  const auto pair = text::LanguagePair::parse(pair_text);
  const auto options = translate_options(kv);
  if (!options.strict && !view.check_pair(pair, false)) {
    std::cerr << "warning: bank '" << view.plugged_key() << "' does not serve " << pair.str() << "\n";
  }
  const auto sources = text::read_lines(input);
  const auto result = inference::translate(view, m.vocab, m.bpe, sources, pair, options);
  if (result.unfinished) std::cerr << "warning: " << result.unfinished << " sentences hit the length limit\n";
  if (out.empty()) {
    for (const auto& s : result.sentences) std::cout << s << '\n';
  } else {
    text::write_lines(out, result.sentences);
  }
  return 0;
}

int cmd_bleu(const KeyValues& kv, const std::string& hyp, const std::string& ref, bool json, const std::string& out) {
  eval::BleuOptions o;
  o.smooth = kv.get_bool("smooth", false);
  const auto r = eval::bleu(text::read_lines(hyp), text::read_lines(ref), o);
  if (json) {
    std::cout << eval::to_json_line(r, hyp) << '\n';
  } else {
    std::cout << std::fixed << std::setprecision(2) << "BLEU = " << r.score << ", " << std::setprecision(1)
              << 100 * r.precisions[0] << "/" << 100 * r.precisions[1] << "/" << 100 * r.precisions[2] << "/"
              << 100 * r.precisions[3] << " (BP=" << std::setprecision(3) << r.brevity_penalty
              << ", hyp_len=" << r.hyp_length << ", ref_len=" << r.ref_length << (r.smoothed ? ", smoothed" : "")
              << ")\n";
  }
  if (!out.empty()) {
    std::ofstream f(out);
    eval::write_bleu_tsv(f, r, hyp);
  }
  return 0;
}

model::Side parse_side(const std::string& s) {
  if (s == "enc" || s == "encoder") return model::Side::encoder;
  if (s == "dec" || s == "decoder") return model::Side::decoder;
  throw Error("unknown side '" + s + "' (expected enc or dec)");
}

int cmd_acs(const KeyValues& kv, const std::string& model_path, const std::string& bpe_path, const std::string& dict,
            const PluggedBanks& banks, const std::string& out) {
  auto m = load_model(model_path, bpe_path);
  adapters::ModelView<float> view(*m.model);
  banks.plug(view);
  const auto side = parse_side(kv.get_or("side", "enc"));
  const auto table = eval::embedding_view(view, side);
  const auto r = eval::acs(table, text::load_dictionary(dict), m.vocab, m.bpe, kv.get_size("top_k", 1000));
  std::cout << std::setprecision(6) << "ACS = " << r.mean << " (retained " << r.retained << ", skipped " << r.skipped
            << (banks.any() ? ", adapted embeddings" : ", base embeddings") << ")\n";
  if (!out.empty()) {
    std::ofstream f(out);
    f << eval::to_json_line(r, dict) << '\n';
  }
  return 0;
}

int cmd_norm_profile(const KeyValues& kv, const std::string& model_path, const std::string& bpe_path,
                     const std::string& corpus_spec, const PluggedBanks& banks, const std::string& out) {
  auto m = load_model(model_path, bpe_path);
  adapters::ModelView<float> view(*m.model);
  banks.plug(view);
  const auto batches = eval_batches(load_corpora({corpus_spec}), m.vocab, m.bpe, kv.get_size("max_tokens", 4096),
                                    kv.get_u64("seed", 1));
  const auto profile = eval::norm_ratio_profile(view, batches);
  if (out.empty()) {
    eval::write_profile_tsv(std::cout, profile);
  } else {
    std::ofstream tsv(out);
    eval::write_profile_tsv(tsv, profile);
    std::ofstream jsonl(out + ".jsonl");
    eval::write_profile_jsonl(jsonl, profile);
  }
  return 0;
}

int cmd_ablate(const KeyValues& kv, const std::string& model_path, const std::string& bpe_path,
               const std::string& corpus_spec, const PluggedBanks& banks, const std::string& out) {
  auto m = load_model(model_path, bpe_path);
  if (!banks.any()) throw Error("ablate needs a bank");
  adapters::ModelView<float> view(*m.model);
  banks.plug(view);
  const auto corpus = load_corpora({corpus_spec}).front();
  eval::AblationOptions o;
  o.translate = translate_options(kv);
  o.disable_embedding_adapters = !kv.get_bool("embedding_adapters", true);
  const std::string side_text = kv.get_or("side", "both");
  std::vector<model::Side> sides;
  if (side_text == "both") sides = {model::Side::encoder, model::Side::decoder};
  else sides = {parse_side(side_text)};
  std::ofstream csv, jsonl;
  if (!out.empty()) {
    csv.open(out);
    jsonl.open(out + ".jsonl");
  }
  for (auto side : sides) {
    const auto grid = eval::span_ablation(view, m.vocab, m.bpe, corpus.source, corpus.target, corpus.pair, side, o);
    std::ostream& dst = out.empty() ? std::cout : csv;
    dst << "# " << model::to_string(side) << " (full model BLEU " << grid.full_bleu << ")\n";
    eval::write_grid_csv(dst, grid);
    if (!out.empty()) eval::write_grid_jsonl(jsonl, grid);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Multilingual translation with counter-interference adapters"};
  app.fallthrough();  // global flags may follow the verb
  app.set_version_flag("--version", std::string(CIAT_VERSION));
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value settings file; flags override it")->check(CLI::ExistingFile);
  g.seed_opt = app.add_option("--seed", g.seed, "seed for every random choice");
  app.add_option("--out", g.out, "output path; a manifest is written beside it");
  g.threads_opt = app.add_option("--threads", g.threads, "worker threads for decoding");

  Settings settings;
  std::vector<std::string> corpora, dev;
  std::string corpus, bpe, model_path, base_path, input, pair, hyp, ref, dict, bank, src_bank, tgt_bank, init_src,
      init_tgt;
  bool json = false;

  auto* params = app.add_subcommand("params", "print parameter counts for a model and adapter mode");
  settings.add(params, "--preset", "preset", "base architecture: iwslt (default) or big");
  settings.add(params, "--mode", "mode", "adapter mode");
  settings.add(params, "--bottleneck", "bottleneck", "adapter bottleneck (default d_model/2)");
  for (const char* k : {"enc_layers", "dec_layers", "d_model", "d_ffn", "heads", "vocab_size"}) {
    std::string flag = std::string("--") + k;
    for (auto& c : flag) if (c == '_') c = '-';
    settings.add(params, flag, k, std::string("override ") + k);
  }

  auto* learn = app.add_subcommand("bpe-learn", "learn a joint BPE model");
  learn->add_option("--corpus", corpora, "corpus as prefix:src-tgt (repeatable)")->required();
  settings.add(learn, "--vocab-size", "vocab_size", "total vocabulary budget");

  auto* base = app.add_subcommand("train-base", "train the shared multilingual model");
  base->add_option("--corpus", corpora, "training corpus prefix:src-tgt (repeatable)")->required();
  base->add_option("--dev", dev, "dev corpus prefix:src-tgt (repeatable)");
  base->add_option("--bpe", bpe, "BPE model file")->required();
  settings.add(base, "--preset", "preset", "base architecture: iwslt (default) or big");
  for (const char* k : {"enc_layers", "dec_layers", "d_model", "d_ffn", "heads", "max_len", "dropout",
                        "label_smoothing", "max_steps", "warmup", "lr_scale", "max_tokens", "clip_norm",
                        "eval_every", "patience", "log"}) {
    std::string flag = std::string("--") + k;
    for (auto& c : flag) if (c == '_') c = '-';
    settings.add(base, flag, k, k);
  }

  auto* adapter = app.add_subcommand("train-adapter", "train one adapter bank on a frozen base");
  adapter->add_option("--base", base_path, "base model checkpoint")->required();
  adapter->add_option("--bpe", bpe, "BPE model file")->required();
  adapter->add_option("--corpus", corpus, "pair corpus prefix:src-tgt")->required();
  adapter->add_option("--dev", dev, "dev corpus for the same pair");
  adapter->add_option("--init-src", init_src, "mono: continue this source-language bank");
  adapter->add_option("--init-tgt", init_tgt, "mono: continue this target-language bank");
  settings.add(adapter, "--mode", "mode", "adapter mode");
  settings.add(adapter, "--bottleneck", "bottleneck", "adapter bottleneck (default d_model/2)");
  for (const char* k : {"max_steps", "warmup", "lr_scale", "max_tokens", "clip_norm", "eval_every", "patience", "log"}) {
    std::string flag = std::string("--") + k;
    for (auto& c : flag) if (c == '_') c = '-';
    settings.add(adapter, flag, k, k);
  }

  auto add_banks = [&](CLI::App* sub) {
    sub->add_option("--bank", bank, "pair bank file");
    sub->add_option("--src-bank", src_bank, "mono: source-language bank");
    sub->add_option("--tgt-bank", tgt_bank, "mono: target-language bank");
  };
  auto add_decoding = [&](CLI::App* sub) {
    settings.add(sub, "--beam", "beam", "beam width (default 4)");
    settings.add(sub, "--alpha", "alpha", "length penalty exponent (default 0.6)");
    settings.add(sub, "--max-len", "max_len_out", "maximum output tokens");
    settings.add(sub, "--strict", "strict", "true: a bank/pair mismatch is an error");
  };

  auto* translate = app.add_subcommand("translate", "beam-search translation");
  translate->add_option("--model", model_path, "model checkpoint")->required();
  translate->add_option("--bpe", bpe, "BPE model file")->required();
  translate->add_option("--input", input, "source sentences, one per line")->required();
  translate->add_option("--pair", pair, "direction src-tgt")->required();
  add_banks(translate);
  add_decoding(translate);

  auto* bleu = app.add_subcommand("bleu", "corpus BLEU on whitespace tokens");
  bleu->add_option("--hyp", hyp, "hypotheses")->required();
  bleu->add_option("--ref", ref, "references")->required();
  bleu->add_flag("--json", json, "print a JSON line");
  settings.add(bleu, "--smooth", "smooth", "true: floor zero n-gram precisions");

  auto* acs = app.add_subcommand("acs", "average cosine similarity of dictionary pairs");
  acs->add_option("--model", model_path, "model checkpoint")->required();
  acs->add_option("--bpe", bpe, "BPE model file")->required();
  acs->add_option("--dict", dict, "two-column dictionary")->required();
  add_banks(acs);
  settings.add(acs, "--top-k", "top_k", "dictionary entries to use (default 1000, 0 = all)");
  settings.add(acs, "--side", "side", "embedding matrix: enc (default) or dec");

  auto* profile = app.add_subcommand("norm-profile", "adapter/base output norm ratios per site");
  profile->add_option("--model", model_path, "model checkpoint")->required();
  profile->add_option("--bpe", bpe, "BPE model file")->required();
  profile->add_option("--corpus", corpus, "evaluation corpus prefix:src-tgt")->required();
  add_banks(profile);
  settings.add(profile, "--max-tokens", "max_tokens", "batch token budget");

  auto* ablate = app.add_subcommand("ablate", "BLEU with continuous layer spans of adapters removed");
  ablate->add_option("--model", model_path, "model checkpoint")->required();
  ablate->add_option("--bpe", bpe, "BPE model file")->required();
  ablate->add_option("--corpus", corpus, "evaluation corpus prefix:src-tgt")->required();
  add_banks(ablate);
  add_decoding(ablate);
  settings.add(ablate, "--side", "side", "enc, dec or both (default)");
  settings.add(ablate, "--embedding-adapters", "embedding_adapters", "false: switch embedding adapters off");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const KeyValues kv = settings.resolve(g.config, g.overrides());
    auto* sub = app.get_subcommands().front();
    const std::string verb = sub->get_name();
    write_manifest(g.out, verb, kv, args);
    PluggedBanks banks;
    if (verb == "params") return cmd_params(kv, g.out);
    if (verb == "bpe-learn" || verb == "train-base" || verb == "train-adapter") {
      if (g.out.empty()) {
        std::cerr << "error: " << verb << " requires --out\n";
        return 2;
      }
    }
    if (verb == "bpe-learn") return cmd_bpe_learn(kv, corpora, g.out);
    if (verb == "train-base") return cmd_train_base(kv, corpora, dev, bpe, g.out);
    if (verb == "train-adapter") return cmd_train_adapter(kv, base_path, bpe, corpus, dev, init_src, init_tgt, g.out);
    banks.load(bank, src_bank, tgt_bank);
    if (verb == "translate") return cmd_translate(kv, model_path, bpe, input, pair, banks, g.out);
    if (verb == "bleu") return cmd_bleu(kv, hyp, ref, json, g.out);
    if (verb == "acs") return cmd_acs(kv, model_path, bpe, dict, banks, g.out);
    if (verb == "norm-profile") return cmd_norm_profile(kv, model_path, bpe, corpus, banks, g.out);
    if (verb == "ablate") return cmd_ablate(kv, model_path, bpe, corpus, banks, g.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
