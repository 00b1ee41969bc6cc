#include "ciat/eval/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

#include "ciat/error.hpp"

namespace ciat::eval {

using model::Side;

namespace {

template <typename T>
double norm_at(const Tensor<T>& t, std::size_t row) {
  const std::size_t d = t.last_dim();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double v = static_cast<double>(t[row * d + i]);
    s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

template <typename T>
NormProfile norm_ratio_profile(const adapters::ModelView<T>& view, const std::vector<text::Batch>& batches) {
  if (!view.plugged()) throw Error("norm profile needs a plugged bank");
  if (adapters::is_serial(view.bank_for(Side::encoder)->config().mode)) {
    throw Error("norm profile is defined for parallel adapters only; the plugged bank is serial");
  }
  if (batches.empty()) throw Error("norm profile needs a non-empty evaluation set");
  NoGradGuard no_grad;
  std::map<model::Site, std::pair<double, std::size_t>> acc;
  for (const auto& b : batches) {
    model::ForwardTrace<T> trace;
    const auto opt = view.options(&trace);
    const auto enc = view.base().encode(b.src, opt);
    view.base().decode(enc, b.tgt_in, opt);
    for (const auto& rec : trace.records) {
      if (!rec.adapted) continue;
      const text::IdMatrix& ids = rec.site.side == Side::encoder ? b.src : b.tgt_in;
      auto& [sum, count] = acc[rec.site];
      for (std::size_t r = 0; r < ids.rows; ++r) {
        for (std::size_t c = 0; c < ids.cols; ++c) {
          if (ids.is_pad(r, c)) continue;
          const std::size_t pos = r * ids.cols + c;
          const double base = norm_at(rec.base_output, pos);
          if (base == 0.0) continue;
          sum += norm_at(rec.adapter_output, pos) / base;
          ++count;
        }
      }
    }
  }
  NormProfile profile;
  std::map<std::pair<Side, std::size_t>, std::pair<double, std::size_t>> per_layer;
  for (const auto& [site, sc] : acc) {
    SiteRatio s{site, sc.second ? sc.first / static_cast<double>(sc.second) : 0.0, sc.second};
    profile.sites.push_back(s);
    auto& [sum, n] = per_layer[{site.side, site.layer}];
    sum += s.ratio;
    ++n;
  }
  for (const auto& [key, sn] : per_layer) {
    profile.layers.push_back({key.first, key.second, sn.first / static_cast<double>(sn.second)});
  }
  return profile;
}

template <typename T>
AblationGrid span_ablation(adapters::ModelView<T>& view, const text::Vocabulary& vocab, const text::BpeModel& bpe,
                           const std::vector<std::string>& sources, const std::vector<std::string>& references,
                           const text::LanguagePair& pair, Side side, const AblationOptions& options) {
  if (sources.empty()) throw Error("span ablation needs a non-empty evaluation set");
  if (sources.size() != references.size()) throw Error("span ablation: source and reference counts differ");
  AblationGrid grid;
  grid.side = side;
  grid.layers = side == Side::encoder ? view.base().config().enc_layers : view.base().config().dec_layers;
  auto score = [&] {
    const auto out = inference::translate(view, vocab, bpe, sources, pair, options.translate);
    return bleu(out.sentences, references).score;
  };
  view.enable_all_layers();
  view.set_embedding_adapters_enabled(!options.disable_embedding_adapters);
  grid.full_bleu = score();
  grid.bleu.assign(grid.layers, std::vector<double>(grid.layers, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t a = 1; a <= grid.layers; ++a) {
    for (std::size_t b = a; b <= grid.layers; ++b) {
      view.enable_all_layers();
      view.disable_layers(side, a, b);
      grid.bleu[a - 1][b - 1] = score();
    }
  }
  view.enable_all_layers();
  view.set_embedding_adapters_enabled(true);
  return grid;
}

void write_grid_csv(std::ostream& out, const AblationGrid& grid) {
  out << "first\\last";
  for (std::size_t b = 1; b <= grid.layers; ++b) out << ',' << b;
  out << '\n';
  for (std::size_t a = 1; a <= grid.layers; ++a) {
    out << a;
    for (std::size_t b = 1; b <= grid.layers; ++b) {
      out << ',';
      if (b >= a) out << std::setprecision(10) << grid.bleu[a - 1][b - 1];
    }
    out << '\n';
  }
}

double win_ratio(const std::map<std::string, double>& ciat,
                 const std::vector<std::map<std::string, double>>& baselines, double threshold) {
  if (ciat.empty()) throw Error("win ratio over zero pairs");
  if (baselines.empty()) throw Error("win ratio needs at least one baseline");
  std::size_t wins = 0;
  for (const auto& [pair, score] : ciat) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : baselines) {
      auto it = b.find(pair);
      if (it == b.end() || b.size() != ciat.size()) throw Error("win ratio: baseline pair sets differ (" + pair + ")");
      best = std::max(best, it->second);
    }
    // Margins come from subtracting rounded scores; allow for that.
    if (score - best >= threshold - 1e-9) ++wins;
  }
  return 100.0 * static_cast<double>(wins) / static_cast<double>(ciat.size());
}

template NormProfile norm_ratio_profile(const adapters::ModelView<float>&, const std::vector<text::Batch>&);
template NormProfile norm_ratio_profile(const adapters::ModelView<double>&, const std::vector<text::Batch>&);
template AblationGrid span_ablation(adapters::ModelView<float>&, const text::Vocabulary&, const text::BpeModel&,
                                    const std::vector<std::string>&, const std::vector<std::string>&,
                                    const text::LanguagePair&, Side, const AblationOptions&);
template AblationGrid span_ablation(adapters::ModelView<double>&, const text::Vocabulary&, const text::BpeModel&,
                                    const std::vector<std::string>&, const std::vector<std::string>&,
                                    const text::LanguagePair&, Side, const AblationOptions&);

}  // namespace ciat::eval
