#include "ciat/training/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <random>

#include "ciat/training/optimizer.hpp"

namespace ciat::training {

using model::ForwardOptions;
using model::Transformer;

template <typename T>
double evaluate_loss(const Transformer<T>& model, const model::SiteHooks<T>* hooks,
                     const std::vector<text::Batch>& batches) {
  if (batches.empty()) throw Error("evaluation set is empty");
  NoGradGuard no_grad;
  ForwardOptions<T> opt;
  opt.hooks = hooks;
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& b : batches) {
    const std::size_t n = b.tgt_out.non_pad_count();
    total += static_cast<double>(model.forward_loss(b, opt).value().item()) * static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

void write_log_header(std::ostream& out) { out << "step\tlr\tloss\tdev_loss\n"; }

namespace {

void write_entry(std::ostream& out, const LogEntry& e) {
  out << e.step << '\t' << std::setprecision(6) << e.lr << '\t' << std::setprecision(8) << e.loss << '\t';
  if (e.dev_loss) out << std::setprecision(8) << *e.dev_loss;
  out << '\n';
}

// Restores requires_grad flags on scope exit.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(model::ParamStore<T>& store) : store_(store) {
    for (const auto& [name, var] : store_.all()) saved_[name] = var.requires_grad();
    store_.set_trainable(false);
  }
  ~FreezeGuard() {
    for (const auto& [name, on] : saved_) store_.get(name).set_requires_grad(on);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  model::ParamStore<T>& store_;
  std::map<std::string, bool> saved_;
};

template <typename T>
TrainResult run_loop(const Transformer<T>& model, const model::SiteHooks<T>* hooks, const ParamList<T>& params,
                     const std::vector<text::Example>& examples, const std::vector<text::Batch>& dev,
                     const RunConfig& run, std::ostream* log) {
  if (examples.empty()) throw Error("training set is empty");
  if (params.empty()) throw Error("nothing to train: no parameter requires a gradient");
  TrainResult result;
  Adam<T> adam(run.adam);
  std::mt19937_64 dropout_rng(run.seed * 0x9E3779B97F4A7C15ULL + 1);
  ForwardOptions<T> opt;
  opt.hooks = hooks;
  opt.training = true;
  opt.rng = &dropout_rng;

  std::vector<text::Batch> epoch;
  std::size_t cursor = 0, epoch_index = 0, bad_evals = 0;
  if (log) write_log_header(*log);
  for (std::size_t step = 1; step <= run.max_steps; ++step) {
    if (cursor == epoch.size()) {
      auto plan = text::batch_examples(examples, run.max_tokens, run.seed + epoch_index++);
      if (plan.batches.empty()) {
        throw Error("every training example exceeds max_tokens=" + std::to_string(run.max_tokens));
      }
      result.skipped_examples = plan.skipped;
      epoch = std::move(plan.batches);
      cursor = 0;
    }
    const text::Batch& batch = epoch[cursor++];
    for (auto [name, var] : params) var.zero_grad();

    Var<T> loss = model.forward_loss(batch, opt);
    const double value = static_cast<double>(loss.value().item());
    if (!std::isfinite(value)) {
      throw TrainingDiverged(step, "training diverged at step " + std::to_string(step) + " (loss " +
                                       std::to_string(value) + ")");
    }
    backward(loss);
    clip_grad_norm(params, run.clip_norm);
    LogEntry entry;
    entry.step = step;
    entry.lr = noam_lr(step, model.config().d_model, run.warmup) * run.lr_scale;
    entry.loss = value;
    adam.step(params, entry.lr);

    if (run.eval_every > 0 && !dev.empty() && step % run.eval_every == 0) {
      entry.dev_loss = evaluate_loss(model, hooks, dev);
      if (!result.best_dev_loss || *entry.dev_loss < *result.best_dev_loss) {
        result.best_dev_loss = entry.dev_loss;
        bad_evals = 0;
      } else {
        ++bad_evals;
      }
    }
    if (log) write_entry(*log, entry);
    result.log.push_back(entry);
    result.steps = step;
    if (run.patience > 0 && bad_evals >= run.patience) {
      result.early_stopped = true;
      break;
    }
  }
  for (auto [name, var] : params) var.zero_grad();
  return result;
}

}  // namespace

template <typename T>
TrainResult train_base(Transformer<T>& model, const std::vector<text::Example>& examples,
                       const std::vector<text::Batch>& dev, const RunConfig& run, std::ostream* log) {
  if (run.phase != Phase::base) throw Error("train_base needs phase=base");
  return run_loop<T>(model, nullptr, trainable(model.params()), examples, dev, run, log);
}

namespace {

template <typename T>
TrainResult adapter_phase(Transformer<T>& base, adapters::ModelView<T>& view,
                          const std::vector<adapters::AdapterBank<T>*>& banks,
                          const std::vector<text::Example>& examples, const std::vector<text::Batch>& dev,
                          const RunConfig& run, std::ostream* log) {
  if (run.phase != Phase::adapter) throw Error("train_adapter needs phase=adapter");
  FreezeGuard<T> freeze(base.params());
  ParamList<T> params;
  for (std::size_t i = 0; i < banks.size(); ++i) {
    banks[i]->params().set_trainable(true);
    auto list = trainable(banks[i]->params(), std::to_string(i) + ":");
    params.insert(params.end(), list.begin(), list.end());
  }
  return run_loop<T>(base, &view, params, examples, dev, run, log);
}

}  // namespace

template <typename T>
TrainResult train_adapter(Transformer<T>& base, adapters::AdapterBank<T>& bank,
                          const std::vector<text::Example>& examples, const std::vector<text::Batch>& dev,
                          const RunConfig& run, std::ostream* log) {
  adapters::ModelView<T> view(base);
  view.plug(bank);
  return adapter_phase<T>(base, view, {&bank}, examples, dev, run, log);
}

template <typename T>
TrainResult train_adapter(Transformer<T>& base, adapters::AdapterBank<T>& src_bank,
                          adapters::AdapterBank<T>& tgt_bank, const std::vector<text::Example>& examples,
                          const std::vector<text::Batch>& dev, const RunConfig& run, std::ostream* log) {
  adapters::ModelView<T> view(base);
  view.plug(src_bank, tgt_bank);
  if (&src_bank == &tgt_bank) return adapter_phase<T>(base, view, {&src_bank}, examples, dev, run, log);
  return adapter_phase<T>(base, view, {&src_bank, &tgt_bank}, examples, dev, run, log);
}

#define CIAT_TRAIN(T)                                                                                          \
  template double evaluate_loss(const Transformer<T>&, const model::SiteHooks<T>*,                            \
                                const std::vector<text::Batch>&);                                             \
  template TrainResult train_base(Transformer<T>&, const std::vector<text::Example>&,                         \
                                  const std::vector<text::Batch>&, const RunConfig&, std::ostream*);         \
  template TrainResult train_adapter(Transformer<T>&, adapters::AdapterBank<T>&,                              \
                                     const std::vector<text::Example>&, const std::vector<text::Batch>&,     \
                                     const RunConfig&, std::ostream*);                                        \
  template TrainResult train_adapter(Transformer<T>&, adapters::AdapterBank<T>&, adapters::AdapterBank<T>&,   \
                                     const std::vector<text::Example>&, const std::vector<text::Batch>&,     \
                                     const RunConfig&, std::ostream*);
CIAT_TRAIN(float)
CIAT_TRAIN(double)
#undef CIAT_TRAIN

}  // namespace ciat::training
