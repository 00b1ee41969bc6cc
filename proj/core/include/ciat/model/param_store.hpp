#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ciat/numerics/autograd.hpp"

namespace ciat::model {

// Named parameter tensors, iterated in name order.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  const Var<T>& add(const std::string& name, Tensor<T> value, bool trainable = true);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Var<T>& get(const std::string& name) const;
  Var<T>& get(const std::string& name);

  const std::map<std::string, Var<T>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void set_trainable(bool trainable);
  void zero_grad();

  // Deep copy with fresh graph nodes.
  ParamStore clone() const;

  // FNV-1a 64 over the raw payload of one tensor / of all tensors in order.
  std::uint64_t fingerprint(const std::string& name) const;
  std::map<std::string, std::uint64_t> fingerprints() const;

 private:
  std::map<std::string, Var<T>> params_;
};

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace ciat::model
