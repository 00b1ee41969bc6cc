#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ciat/model/param_store.hpp"

namespace ciat::training {

// d^-0.5 * min(step^-0.5, step * warmup^-1.5); throws for step 0.
double noam_lr(std::size_t step, std::size_t d_model, std::size_t warmup);

template <typename T>
using ParamList = std::vector<std::pair<std::string, Var<T>>>;

// Parameters of `store` with requires_grad set, names prefixed.
template <typename T>
ParamList<T> trainable(const model::ParamStore<T>& store, const std::string& prefix = "");

// Scales gradients so their global L2 norm is at most `max_norm`. Returns
// the norm before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Bias-corrected Adam. Moments are created lazily for parameters that
// receive a gradient; parameters without one are left alone.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Throws on a non-finite gradient before touching any parameter.
  void step(const ParamList<T>& params, double lr);

  std::size_t steps() const { return step_; }
  bool has_moments(const std::string& name) const { return m_.count(name) != 0; }

 private:
  AdamOptions options_;
  std::size_t step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace ciat::training
