#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ciat/numerics/autograd.hpp"

namespace ciat {

struct NamedParam {
  std::string name;
  Var<double> var;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> per_param;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor: err = |a - n| / max(|a|, |n|, floor). Keeps entries
  // whose true derivative is ~0 from reporting pure round-off as error.
  double floor = 1e-4;
  // Upper bound on checked elements per parameter (evenly strided); 0 = all.
  std::size_t max_elements_per_param = 0;
};

// Compares reverse-mode gradients of `f` against central differences.
// `f` must build a fresh scalar graph on every call. Throws if two
// evaluations at the same point disagree.
GradCheckReport grad_check(const std::function<Var<double>()>& f, std::vector<NamedParam> params,
                           const GradCheckOptions& options = {});

}  // namespace ciat
