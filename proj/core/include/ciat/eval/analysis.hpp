#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ciat/adapters/model_view.hpp"
#include "ciat/eval/bleu.hpp"
#include "ciat/inference/translate.hpp"
#include "ciat/text/batching.hpp"

namespace ciat::eval {

struct SiteRatio {
  model::Site site;
  double ratio = 0.0;  // mean over positions of |adapter out| / |base out|
  std::size_t positions = 0;
};

struct LayerRatio {
  model::Side side = model::Side::encoder;
  std::size_t layer = 0;  // 0-based
  double ratio = 0.0;     // mean of the layer's site ratios
};

struct NormProfile {
  std::vector<SiteRatio> sites;    // forward order, encoder first
  std::vector<LayerRatio> layers;  // per Transformer layer, encoder first
};

// Per-site ratio of the adapter output norm to the base output norm F(x_i)
// (residual included), averaged over non-PAD positions. Needs a plugged
// parallel-mode bank; serial modes are rejected.
template <typename T>
NormProfile norm_ratio_profile(const adapters::ModelView<T>& view, const std::vector<text::Batch>& batches);

struct AblationGrid {
  model::Side side = model::Side::encoder;
  std::size_t layers = 0;
  double full_bleu = 0.0;                 // nothing disabled
  std::vector<std::vector<double>> bleu;  // [a-1][b-1] for a <= b, NaN below the diagonal
};

struct AblationOptions {
  inference::TranslateOptions translate;
  bool disable_embedding_adapters = false;
};

// BLEU with every adapter unit in layers a..b (1-based, inclusive) of
// `side` switched off, for all a <= b.
template <typename T>
AblationGrid span_ablation(adapters::ModelView<T>& view, const text::Vocabulary& vocab, const text::BpeModel& bpe,
                           const std::vector<std::string>& sources, const std::vector<std::string>& references,
                           const text::LanguagePair& pair, model::Side side, const AblationOptions& options);

// Matrix with first removed layer as rows, last removed layer as columns.
void write_grid_csv(std::ostream& out, const AblationGrid& grid);

// 100 * share of pairs where ciat beats every baseline by >= threshold.
double win_ratio(const std::map<std::string, double>& ciat,
                 const std::vector<std::map<std::string, double>>& baselines, double threshold);

}  // namespace ciat::eval
