#include "ciat/training/optimizer.hpp"

#include <cmath>

#include "ciat/error.hpp"

namespace ciat::training {

double noam_lr(std::size_t step, std::size_t d_model, std::size_t warmup) {
  if (step == 0) throw Error("learning-rate schedule starts at step 1");
  if (warmup == 0) throw Error("warmup must be at least 1 step");
  const double s = static_cast<double>(step);
  return std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(static_cast<double>(warmup), -1.5));
}

template <typename T>
ParamList<T> trainable(const model::ParamStore<T>& store, const std::string& prefix) {
  ParamList<T> out;
  for (const auto& [name, var] : store.all())
    if (var.requires_grad()) out.emplace_back(prefix + name, var);
  return out;
}

template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, var] : params) {
    if (!var.has_grad()) continue;
    for (T g : var.grad().data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (const auto& [name, var] : params) {
      if (!var.has_grad()) continue;
      for (T& g : var.node()->grad.data()) g *= factor;
    }
  }
  return norm;
}

template <typename T>
void Adam<T>::step(const ParamList<T>& params, double lr) {
  for (const auto& [name, var] : params) {
    if (!var.has_grad()) continue;
    const auto g = var.grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(static_cast<double>(g[i]))) {
        throw Error("non-finite gradient in '" + name + "' at element " + std::to_string(i) + " (value " +
                    std::to_string(static_cast<double>(g[i])) + ")");
      }
    }
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (const auto& [name, var] : params) {
    if (!var.has_grad()) continue;
    const auto g = var.grad().data();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    auto w = var.node()->value.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template ParamList<float> trainable(const model::ParamStore<float>&, const std::string&);
template ParamList<double> trainable(const model::ParamStore<double>&, const std::string&);
template double clip_grad_norm(const ParamList<float>&, double);
template double clip_grad_norm(const ParamList<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace ciat::training
