#pragma once

#include <ostream>
#include <string>

#include "ciat/adapters/param_count.hpp"
#include "ciat/eval/acs.hpp"
#include "ciat/eval/analysis.hpp"
#include "ciat/eval/bleu.hpp"

namespace ciat::eval {

// One JSON object per line; TSV files start with a header row.
std::string to_json_line(const BleuReport& report, const std::string& label);
std::string to_json_line(const AcsReport& report, const std::string& label);
std::string to_json_line(const adapters::ParamCount& count, const std::string& label);

void write_bleu_tsv(std::ostream& out, const BleuReport& report, const std::string& label);
void write_profile_tsv(std::ostream& out, const NormProfile& profile);
void write_profile_jsonl(std::ostream& out, const NormProfile& profile);
void write_grid_jsonl(std::ostream& out, const AblationGrid& grid);

}  // namespace ciat::eval
