#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "ciat/adapters/model_view.hpp"
#include "ciat/error.hpp"
#include "ciat/model/transformer.hpp"
#include "ciat/text/batching.hpp"
#include "ciat/training/run_config.hpp"

namespace ciat::training {

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct LogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> dev_loss;
};

struct TrainResult {
  std::vector<LogEntry> log;
  std::size_t steps = 0;
  std::size_t skipped_examples = 0;  // per epoch, longer than max_tokens
  bool early_stopped = false;
  std::optional<double> best_dev_loss;
};

// Token-weighted mean loss over `batches`, no dropout, no graph.
template <typename T>
double evaluate_loss(const model::Transformer<T>& model, const model::SiteHooks<T>* hooks,
                     const std::vector<text::Batch>& batches);

// Trains every base parameter. Batches are rebuilt each epoch from
// `examples` (seed + epoch), so corpora are sampled in proportion to size.
// `log`, when given, receives TSV lines "step lr loss [dev_loss]".
template <typename T>
TrainResult train_base(model::Transformer<T>& model, const std::vector<text::Example>& examples,
                       const std::vector<text::Batch>& dev, const RunConfig& run, std::ostream* log = nullptr);

// Trains one pair bank with the base frozen. Base tensors are left
// bit-identical; requires_grad flags are restored afterwards.
template <typename T>
TrainResult train_adapter(model::Transformer<T>& base, adapters::AdapterBank<T>& bank,
                          const std::vector<text::Example>& examples, const std::vector<text::Batch>& dev,
                          const RunConfig& run, std::ostream* log = nullptr);

// Mono modes: encoder units of `src_bank` and decoder units of `tgt_bank`.
template <typename T>
TrainResult train_adapter(model::Transformer<T>& base, adapters::AdapterBank<T>& src_bank,
                          adapters::AdapterBank<T>& tgt_bank, const std::vector<text::Example>& examples,
                          const std::vector<text::Batch>& dev, const RunConfig& run, std::ostream* log = nullptr);

void write_log_header(std::ostream& out);

}  // namespace ciat::training
