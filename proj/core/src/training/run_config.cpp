#include "ciat/training/run_config.hpp"

#include "ciat/error.hpp"

namespace ciat::training {

Phase parse_phase(const std::string& text) {
  if (text == "base") return Phase::base;
  if (text == "adapter") return Phase::adapter;
  throw Error("unknown training phase '" + text + "' (expected base or adapter)");
}

const char* to_string(Phase phase) { return phase == Phase::base ? "base" : "adapter"; }

KeyValues RunConfig::to_kv() const {
  KeyValues kv;
  kv.set("phase", to_string(phase));
  kv.set("seed", std::to_string(seed));
  kv.set("max_steps", max_steps);
  kv.set("warmup", warmup);
  kv.set("lr_scale", lr_scale);
  kv.set("max_tokens", max_tokens);
  kv.set("clip_norm", clip_norm);
  kv.set("eval_every", eval_every);
  kv.set("patience", patience);
  kv.set("adam_beta1", adam.beta1);
  kv.set("adam_beta2", adam.beta2);
  kv.set("adam_eps", adam.eps);
  return kv;
}

RunConfig RunConfig::from_kv(const KeyValues& kv) { return from_kv(kv, RunConfig{}); }

RunConfig RunConfig::from_kv(const KeyValues& kv, const RunConfig& d) {
  RunConfig r;
  r.phase = parse_phase(kv.get_or("phase", to_string(d.phase)));
  r.seed = kv.get_u64("seed", d.seed);
  r.max_steps = kv.get_size("max_steps", d.max_steps);
  r.warmup = kv.get_size("warmup", d.warmup);
  r.lr_scale = kv.get_double("lr_scale", d.lr_scale);
  r.max_tokens = kv.get_size("max_tokens", d.max_tokens);
  r.clip_norm = kv.get_double("clip_norm", d.clip_norm);
  r.eval_every = kv.get_size("eval_every", d.eval_every);
  r.patience = kv.get_size("patience", d.patience);
  r.adam.beta1 = kv.get_double("adam_beta1", d.adam.beta1);
  r.adam.beta2 = kv.get_double("adam_beta2", d.adam.beta2);
  r.adam.eps = kv.get_double("adam_eps", d.adam.eps);
  if (r.warmup == 0) throw Error("warmup must be at least 1");
  if (r.max_tokens == 0) throw Error("max_tokens must be positive");
  if (r.lr_scale < 0.0) throw Error("lr_scale must be non-negative");
  return r;
}

}  // namespace ciat::training
