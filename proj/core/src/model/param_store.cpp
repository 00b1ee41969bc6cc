#include "ciat/model/param_store.hpp"

#include "ciat/error.hpp"

namespace ciat::model {

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
const Var<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value, bool trainable) {
  auto [it, inserted] = params_.emplace(name, Var<T>(std::move(value), trainable));
  if (!inserted) throw Error("duplicate parameter name '" + name + "'");
  return it->second;
}

template <typename T>
const Var<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
Var<T>& ParamStore<T>::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().numel();
  return n;
}

template <typename T>
void ParamStore<T>::set_trainable(bool trainable) {
  for (auto& [_, v] : params_) v.set_requires_grad(trainable);
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

template <typename T>
ParamStore<T> ParamStore<T>::clone() const {
  ParamStore<T> out;
  for (const auto& [name, v] : params_) out.add(name, v.value(), v.requires_grad());
  return out;
}

template <typename T>
std::uint64_t ParamStore<T>::fingerprint(const std::string& name) const {
  const auto& t = get(name).value();
  return fnv1a64(t.raw(), t.numel() * sizeof(T));
}

template <typename T>
std::map<std::string, std::uint64_t> ParamStore<T>::fingerprints() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [name, _] : params_) out.emplace(name, fingerprint(name));
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace ciat::model
