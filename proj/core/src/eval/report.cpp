#include "ciat/eval/report.hpp"

#include <cmath>
#include <iomanip>

#include <nlohmann/json.hpp>

namespace ciat::eval {

using nlohmann::json;

std::string to_json_line(const BleuReport& r, const std::string& label) {
  json j;
  j["label"] = label;
  j["bleu"] = r.score;
  j["precisions"] = r.precisions;
  j["matches"] = r.matches;
  j["totals"] = r.totals;
  j["brevity_penalty"] = r.brevity_penalty;
  j["hyp_length"] = r.hyp_length;
  j["ref_length"] = r.ref_length;
  j["smoothed"] = r.smoothed;
  return j.dump();
}

std::string to_json_line(const AcsReport& r, const std::string& label) {
  json j;
  j["label"] = label;
  j["acs"] = r.mean;
  j["retained"] = r.retained;
  j["skipped"] = r.skipped;
  return j.dump();
}

std::string to_json_line(const adapters::ParamCount& c, const std::string& label) {
  json j;
  j["label"] = label;
  j["base"] = c.base;
  j["per_bank"] = c.per_bank;
  j["per_bank_side"] = c.per_bank_side;
  j["layer_adapters"] = c.layer_adapters;
  j["embedding_adapters"] = c.embedding_adapters;
  j["layer_units"] = c.layer_units;
  return j.dump();
}

void write_bleu_tsv(std::ostream& out, const BleuReport& r, const std::string& label) {
  out << "label\tbleu\tp1\tp2\tp3\tp4\tbp\thyp_len\tref_len\tsmoothed\n";
  out << label << '\t' << std::fixed << std::setprecision(2) << r.score;
  out << std::setprecision(4);
  for (double p : r.precisions) out << '\t' << 100.0 * p;
  out << '\t' << std::setprecision(4) << r.brevity_penalty << '\t' << r.hyp_length << '\t' << r.ref_length << '\t'
      << (r.smoothed ? "yes" : "no") << '\n';
  out << std::defaultfloat;
}

void write_profile_tsv(std::ostream& out, const NormProfile& profile) {
  out << "site\tratio\tpositions\n";
  for (const auto& s : profile.sites) {
    out << s.site.name() << '\t' << std::setprecision(8) << s.ratio << '\t' << s.positions << '\n';
  }
}

void write_profile_jsonl(std::ostream& out, const NormProfile& profile) {
  for (const auto& s : profile.sites) {
    out << json{{"site", s.site.name()}, {"ratio", s.ratio}, {"positions", s.positions}}.dump() << '\n';
  }
  for (const auto& l : profile.layers) {
    out << json{{"side", model::to_string(l.side)}, {"layer", l.layer + 1}, {"ratio", l.ratio}}.dump() << '\n';
  }
}

void write_grid_jsonl(std::ostream& out, const AblationGrid& grid) {
  out << json{{"side", model::to_string(grid.side)}, {"first", 0}, {"last", 0}, {"bleu", grid.full_bleu}}.dump()
      << '\n';
  for (std::size_t a = 1; a <= grid.layers; ++a) {
    for (std::size_t b = a; b <= grid.layers; ++b) {
      const double v = grid.bleu[a - 1][b - 1];
      out << json{{"side", model::to_string(grid.side)}, {"first", a}, {"last", b}, {"bleu", v},
                  {"drop", grid.full_bleu - v}}
                 .dump()
          << '\n';
    }
  }
}

}  // namespace ciat::eval
