#include "ciat/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ciat {

GradCheckReport grad_check(const std::function<Var<double>()>& f, std::vector<NamedParam> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.var.zero_grad();
  const Var<double> loss = f();
  const double reference = loss.value().item();
  if (const double again = f().value().item(); again != reference) {
    throw Error("grad_check: function is not deterministic (" + std::to_string(reference) +
                " vs " + std::to_string(again) + ")");
  }
  backward(loss);

  GradCheckReport report;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    Tensor<double>& value = p.var.mutable_value();
    const std::size_t n = value.numel();
    const std::size_t stride =
        options.max_elements_per_param == 0 || n <= options.max_elements_per_param
            ? 1
            : (n + options.max_elements_per_param - 1) / options.max_elements_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double analytic = p.var.has_grad() ? p.var.grad()[i] : 0.0;
      const double saved = value[i];
      value[i] = saved + options.eps;
      const double up = f().value().item();
      value[i] = saved - options.eps;
      const double down = f().value().item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double err = std::abs(analytic - numeric) / denom;
      if (i == 0 || err > entry.max_rel_err) {
        entry.max_rel_err = err;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_err >= report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = entry.name;
    }
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ciat
