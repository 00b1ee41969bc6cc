#pragma once

#include <cstdint>
#include <string>

#include "ciat/key_values.hpp"
#include "ciat/training/optimizer.hpp"

namespace ciat::training {

enum class Phase { base, adapter };

Phase parse_phase(const std::string& text);
const char* to_string(Phase phase);

// Training budget and optimizer settings. Keys (all optional):
//   phase, seed, max_steps, warmup, lr_scale, max_tokens, clip_norm,
//   eval_every, patience, adam_beta1, adam_beta2, adam_eps
struct RunConfig {
  Phase phase = Phase::base;
  std::uint64_t seed = 1;
  std::size_t max_steps = 1000;
  std::size_t warmup = 4000;
  double lr_scale = 1.0;
  std::size_t max_tokens = 4096;
  double clip_norm = 1.0;
  std::size_t eval_every = 0;  // 0: no dev evaluation during training
  std::size_t patience = 5;    // non-improving evaluations before stopping
  AdamOptions adam;

  KeyValues to_kv() const;
  static RunConfig from_kv(const KeyValues& kv, const RunConfig& defaults);
  static RunConfig from_kv(const KeyValues& kv);
};

}  // namespace ciat::training
