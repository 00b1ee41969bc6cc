#pragma once

#include <cstdint>

#include "ciat/adapters/adapter.hpp"

namespace ciat::adapters {

struct ParamCount {
  std::uint64_t base = 0;
  std::uint64_t per_bank = 0;            // one pair bank, or one language bank (both sides) in mono modes
  std::uint64_t per_bank_side = 0;       // mono: encoder half of a language bank; otherwise = per_bank
  std::uint64_t layer_adapters = 0;      // part of per_bank spent on layer units
  std::uint64_t embedding_adapters = 0;  // part of per_bank spent on embedding adapters
  std::size_t layer_units = 0;
};

// Closed-form parameter accounting; no tensors are allocated.
std::uint64_t count_base_params(const ModelConfig& model);
std::uint64_t count_unit_params(std::size_t d_model, std::size_t bottleneck, bool own_ln);
ParamCount count_params(const ModelConfig& model, const AdapterConfig& config);

}  // namespace ciat::adapters
