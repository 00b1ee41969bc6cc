#pragma once

#include <filesystem>
#include <string>

#include "ciat/key_values.hpp"
#include "ciat/model/param_store.hpp"
#include "ciat/model/transformer.hpp"

namespace ciat::model {

inline constexpr const char* kCheckpointMagic = "ciat-ckpt-v1";

// Header block plus named tensors. Tensors stored at either precision are
// converted to T on load.
template <typename T>
struct Container {
  KeyValues header;
  ParamStore<T> tensors;
};

// Layout: magic line, u64 header length, header text ("key=value" lines),
// u64 tensor count, then per tensor (name order): u32 name length, name,
// u8 dtype (0 = f32, 1 = f64), u32 rank, u64 dims, little-endian payload.
template <typename T>
void save_container(const std::filesystem::path& path, const KeyValues& header,
                    const ParamStore<T>& tensors);

template <typename T>
Container<T> load_container(const std::filesystem::path& path);

// Header only; skips the payload.
KeyValues read_header(const std::filesystem::path& path);

// Model checkpoint: header carries kind=model and the config under "model.".
template <typename T>
void save_model(const std::filesystem::path& path, const Transformer<T>& model,
                const KeyValues& extra = {});

template <typename T>
Transformer<T> load_model(const std::filesystem::path& path, KeyValues* header = nullptr);

}  // namespace ciat::model
