#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ciat/numerics/autograd.hpp"

namespace ciat::ops {

// Attention visibility mask of shape (batch, queries, keys); 1 = visible.
struct AttentionMask {
  std::size_t batch = 0;
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<std::uint8_t> visible;

  bool at(std::size_t b, std::size_t q, std::size_t k) const {
    return visible[(b * queries + q) * keys + k] != 0;
  }
};

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);

// x + c where c is a constant tensor of the same shape (no gradient to c).
template <typename T> Var<T> add_constant(const Var<T>& x, const Tensor<T>& c);

// x(..., k) @ w(k, n) + b(n). `b` may be undefined.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// x(..., k) @ m(n, k)^T. Used for the tied output projection.
template <typename T> Var<T> matmul_nt(const Var<T>& x, const Var<T>& m);

// Batched product of a(B, m, k) with b(B, k, n), or b(B, n, k) transposed.
template <typename T> Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b);

template <typename T> Var<T> relu(const Var<T>& x);

// Softmax over the last axis.
template <typename T> Var<T> softmax(const Var<T>& x);

// Softmax over the last axis of x(batch*heads, queries, keys). Invisible
// entries get probability exactly zero; a fully hidden row yields zeros.
template <typename T>
Var<T> masked_softmax(const Var<T>& x, const AttentionMask& mask, std::size_t heads);

// Normalizes over the last axis with population variance.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps);

// Row gather: out[..., :] = table[ids[...], :]. `prefix` is the shape of ids.
template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, const Shape& prefix);

// (B, S, H*d) <-> (B*H, S, d)
template <typename T> Var<T> split_heads(const Var<T>& x, std::size_t heads);
template <typename T> Var<T> merge_heads(const Var<T>& x, std::size_t heads);

template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);

// Inverted dropout. p == 0 returns x unchanged.
template <typename T> Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng);

// Mean label-smoothed cross-entropy over rows whose target != ignore_id.
// Target distribution: (1 - smoothing) on the gold id plus smoothing / V
// spread uniformly over the vocabulary.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets, T smoothing,
                     std::int32_t ignore_id);

// Row-wise log-softmax of a plain tensor (no graph).
template <typename T> Tensor<T> log_softmax_rows(const Tensor<T>& x);

}  // namespace ciat::ops
