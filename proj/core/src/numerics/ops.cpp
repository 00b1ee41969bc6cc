#include "ciat/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ciat::ops {
namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// C(m, n) (+)= A(m, k) * B(k, n)
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m, n) (+)= A(m, k) * B(n, k)^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

// C(m, n) (+)= A(k, m)^T * B(k, n)
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
bool needs(const Node<T>& self, std::size_t i) {
  return self.inputs[i]->requires_grad;
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const T* x = a.value().raw();
  const T* y = b.value().raw();
  T* o = out.raw();
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) o[i] = x[i] + y[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (needs(self, i)) self.inputs[i]->accumulate(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const T* x = a.value().raw();
  const T* y = b.value().raw();
  T* o = out.raw();
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) o[i] = x[i] - y[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (needs(self, 0)) self.inputs[0]->accumulate(self.grad);
    if (needs(self, 1)) {
      Tensor<T> g = self.grad;
      for (auto& v : g.data()) v = -v;
      self.inputs[1]->accumulate(g);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0, n = out.numel(); i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    if (needs(self, 0)) {
      Tensor<T> g(x.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * y[i];
      self.inputs[0]->accumulate(g);
    }
    if (needs(self, 1)) {
      Tensor<T> g(y.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * x[i];
      self.inputs[1]->accumulate(g);
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= factor;
  return make_op<T>(std::move(out), {a}, [factor](Node<T>& self) {
    Tensor<T> g = self.grad;
    for (auto& v : g.data()) v *= factor;
    self.inputs[0]->accumulate(g);
  });
}

template <typename T>
Var<T> add_constant(const Var<T>& x, const Tensor<T>& c) {
  if (x.value().numel() != c.numel()) {
    throw ShapeError("add_constant: shape mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(c.shape()));
  }
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c[i];
  return make_op<T>(std::move(out), {x},
                    [](Node<T>& self) { self.inputs[0]->accumulate(self.grad); });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& ws = w.shape();
  if (ws.size() != 2 || x.value().last_dim() != ws[0]) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(ws));
  }
  const std::size_t k = ws[0], n = ws[1], m = x.value().rows();
  const bool has_bias = b.defined();
  if (has_bias && b.value().numel() != n) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " for output width " +
                     std::to_string(n));
  }
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Tensor<T> out(out_shape);
  if (has_bias) {
    for (std::size_t i = 0; i < m; ++i)
      std::copy(b.value().raw(), b.value().raw() + n, out.raw() + i * n);
  }
  gemm_nn(m, k, n, x.value().raw(), w.value().raw(), out.raw(), has_bias);
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_op<T>(std::move(out), std::move(inputs), [m, k, n, has_bias](Node<T>& self) {
    const T* dy = self.grad.raw();
    if (needs(self, 0)) {
      Tensor<T> dx(self.inputs[0]->value.shape());
      gemm_nt(m, n, k, dy, self.inputs[1]->value.raw(), dx.raw(), false);
      self.inputs[0]->accumulate(dx);
    }
    if (needs(self, 1)) {
      auto& dw = self.inputs[1]->grad_buffer();
      gemm_tn(k, m, n, self.inputs[0]->value.raw(), dy, dw.raw(), true);
    }
    if (has_bias && needs(self, 2)) {
      auto& db = self.inputs[2]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += dy[i * n + j];
    }
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& x, const Var<T>& mat) {
  const auto& ms = mat.shape();
  if (ms.size() != 2 || x.value().last_dim() != ms[1]) {
    throw ShapeError("matmul_nt: input " + shape_str(x.shape()) + " incompatible with " +
                     shape_str(ms));
  }
  const std::size_t n = ms[0], k = ms[1], m = x.value().rows();
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Tensor<T> out(out_shape);
  gemm_nt(m, k, n, x.value().raw(), mat.value().raw(), out.raw(), false);
  return make_op<T>(std::move(out), {x, mat}, [m, k, n](Node<T>& self) {
    const T* dy = self.grad.raw();
    if (needs(self, 0)) {
      Tensor<T> dx(self.inputs[0]->value.shape());
      gemm_nn(m, n, k, dy, self.inputs[1]->value.raw(), dx.raw(), false);
      self.inputs[0]->accumulate(dx);
    }
    if (needs(self, 1)) {
      auto& dm = self.inputs[1]->grad_buffer();
      gemm_tn(n, m, k, dy, self.inputs[0]->value.raw(), dm.raw(), true);
    }
  });
}

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0]) {
    throw ShapeError("bmm: expected rank-3 operands with equal batch, got " + shape_str(as) +
                     " and " + shape_str(bs));
  }
  const std::size_t batch = as[0], m = as[1], k = as[2];
  const std::size_t n = transpose_b ? bs[1] : bs[2];
  if ((transpose_b ? bs[2] : bs[1]) != k) {
    throw ShapeError("bmm: inner dimension mismatch " + shape_str(as) + " vs " + shape_str(bs));
  }
  Tensor<T> out(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    const T* ap = a.value().raw() + i * m * k;
    const T* bp = b.value().raw() + i * k * n;
    T* cp = out.raw() + i * m * n;
    if (transpose_b)
      gemm_nt(m, k, n, ap, bp, cp, false);
    else
      gemm_nn(m, k, n, ap, bp, cp, false);
  }
  return make_op<T>(std::move(out), {a, b}, [batch, m, k, n, transpose_b](Node<T>& self) {
    const bool da = needs(self, 0), db = needs(self, 1);
    Tensor<T> ga, gb;
    if (da) ga = Tensor<T>(self.inputs[0]->value.shape());
    if (db) gb = Tensor<T>(self.inputs[1]->value.shape());
    for (std::size_t i = 0; i < batch; ++i) {
      const T* dy = self.grad.raw() + i * m * n;
      const T* ap = self.inputs[0]->value.raw() + i * m * k;
      const T* bp = self.inputs[1]->value.raw() + i * k * n;
      if (transpose_b) {
        // C = A B^T: dA = dC B, dB = dC^T A
        if (da) gemm_nn(m, n, k, dy, bp, ga.raw() + i * m * k, false);
        if (db) gemm_tn(n, m, k, dy, ap, gb.raw() + i * k * n, false);
      } else {
        // C = A B: dA = dC B^T, dB = A^T dC
        if (da) gemm_nt(m, n, k, dy, bp, ga.raw() + i * m * k, false);
        if (db) gemm_tn(k, m, n, ap, dy, gb.raw() + i * k * n, false);
      }
    }
    if (da) self.inputs[0]->accumulate(ga);
    if (db) self.inputs[1]->accumulate(gb);
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    Tensor<T> g = self.grad;
    const auto& y = self.value;
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!(y[i] > T{0})) g[i] = T{0};
    self.inputs[0]->accumulate(g);
  });
}

namespace {

template <typename T>
void softmax_backward_rows(Node<T>& self) {
  const auto& y = self.value;
  const std::size_t cols = y.last_dim(), rows = y.rows();
  Tensor<T> g(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* yr = y.raw() + r * cols;
    const T* dr = self.grad.raw() + r * cols;
    T dot{0};
    for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * dr[c];
    T* gr = g.raw() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] = yr[c] * (dr[c] - dot);
  }
  self.inputs[0]->accumulate(g);
}

}  // namespace

template <typename T>
Var<T> softmax(const Var<T>& x) {
  if (x.value().rank() == 0 || x.value().last_dim() == 0) {
    throw ShapeError("softmax over an empty axis");
  }
  const std::size_t cols = x.value().last_dim(), rows = x.value().rows();
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.value().raw() + r * cols;
    T* yr = out.raw() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) total += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
  }
  return make_op<T>(std::move(out), {x}, softmax_backward_rows<T>);
}

template <typename T>
Var<T> masked_softmax(const Var<T>& x, const AttentionMask& mask, std::size_t heads) {
  const auto& s = x.shape();
  if (s.size() != 3 || s[0] != mask.batch * heads || s[1] != mask.queries || s[2] != mask.keys) {
    throw ShapeError("masked_softmax: scores " + shape_str(s) + " vs mask (" +
                     std::to_string(mask.batch) + "x" + std::to_string(heads) + ", " +
                     std::to_string(mask.queries) + ", " + std::to_string(mask.keys) + ")");
  }
  if (mask.keys == 0) throw ShapeError("masked_softmax over an empty axis");
  const std::size_t q = s[1], k = s[2];
  Tensor<T> out(s);
  for (std::size_t bh = 0; bh < s[0]; ++bh) {
    const std::size_t b = bh / heads;
    for (std::size_t i = 0; i < q; ++i) {
      const T* xr = x.value().raw() + (bh * q + i) * k;
      T* yr = out.raw() + (bh * q + i) * k;
      const std::uint8_t* vis = mask.visible.data() + (b * q + i) * k;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < k; ++j)
        if (vis[j]) mx = std::max(mx, xr[j]);
      if (mx == -std::numeric_limits<T>::infinity()) continue;  // nothing visible
      T total{0};
      for (std::size_t j = 0; j < k; ++j)
        if (vis[j]) total += (yr[j] = std::exp(xr[j] - mx));
      for (std::size_t j = 0; j < k; ++j)
        if (vis[j]) yr[j] /= total;
    }
  }
  // Masked entries carry y = 0, so the plain softmax backward zeroes them.
  return make_op<T>(std::move(out), {x}, softmax_backward_rows<T>);
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const std::size_t d = x.value().last_dim();
  if (x.value().rank() == 0 || d < 2) {
    throw ShapeError("layer_norm needs a normalized dimension >= 2, got " + shape_str(x.shape()));
  }
  if (gain.value().numel() != d || bias.value().numel() != d) {
    throw ShapeError("layer_norm: gain/bias size does not match dimension " + std::to_string(d));
  }
  const std::size_t rows = x.value().rows();
  Tensor<T> out(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(rows);
  const T* g = gain.value().raw();
  const T* bt = bias.value().raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.value().raw() + r * d;
    T mu{0};
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<T>(d);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    T* hr = xhat.raw() + r * d;
    T* yr = out.raw() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      hr[c] = (xr[c] - mu) * is;
      yr[c] = hr[c] * g[c] + bt[c];
    }
  }
  return make_op<T>(
      std::move(out), {x, gain, bias},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const T* dy = self.grad.raw();
        const T* g = self.inputs[1]->value.raw();
        if (needs(self, 0)) {
          Tensor<T> dx(self.inputs[0]->value.shape());
          std::vector<T> dyg(d);
          for (std::size_t r = 0; r < rows; ++r) {
            const T* dr = dy + r * d;
            const T* hr = xhat.raw() + r * d;
            T mean_dy{0}, mean_dyh{0};
            for (std::size_t c = 0; c < d; ++c) {
              dyg[c] = dr[c] * g[c];
              mean_dy += dyg[c];
              mean_dyh += dyg[c] * hr[c];
            }
            mean_dy /= static_cast<T>(d);
            mean_dyh /= static_cast<T>(d);
            T* out = dx.raw() + r * d;
            for (std::size_t c = 0; c < d; ++c)
              out[c] = inv_std[r] * (dyg[c] - mean_dy - hr[c] * mean_dyh);
          }
          self.inputs[0]->accumulate(dx);
        }
        if (needs(self, 1)) {
          auto& dg = self.inputs[1]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) dg[c] += dy[r * d + c] * xhat[r * d + c];
        }
        if (needs(self, 2)) {
          auto& db = self.inputs[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) db[c] += dy[r * d + c];
        }
      });
}

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, const Shape& prefix) {
  const auto& ts = table.shape();
  if (ts.size() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_str(ts));
  if (shape_numel(prefix) != ids.size()) throw ShapeError("embedding: ids do not match prefix shape");
  const std::size_t vocab = ts[0], d = ts[1];
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw Error("token id " + std::to_string(id) + " out of range for vocabulary of " +
                  std::to_string(vocab));
    }
  }
  Shape out_shape = prefix;
  out_shape.push_back(d);
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const T* row = table.value().raw() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(row, row + d, out.raw() + i * d);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return make_op<T>(std::move(out), {table}, [d, saved = std::move(saved)](Node<T>& self) {
    auto& dt = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      T* row = dt.raw() + static_cast<std::size_t>(saved[i]) * d;
      const T* g = self.grad.raw() + i * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += g[c];
    }
  });
}

template <typename T>
Var<T> split_heads(const Var<T>& x, std::size_t heads) {
  const auto& s = x.shape();
  if (s.size() != 3 || heads == 0 || s[2] % heads != 0) {
    throw ShapeError("split_heads: cannot split " + shape_str(s) + " into " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t b = s[0], len = s[1], dh = s[2] / heads;
  Tensor<T> out(Shape{b * heads, len, dh});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t h = 0; h < heads; ++h) {
        const T* src = x.value().raw() + (bi * len + t) * s[2] + h * dh;
        std::copy(src, src + dh, out.raw() + ((bi * heads + h) * len + t) * dh);
      }
  return make_op<T>(std::move(out), {x}, [b, len, dh, heads](Node<T>& self) {
    Tensor<T> g(self.inputs[0]->value.shape());
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t h = 0; h < heads; ++h) {
          const T* src = self.grad.raw() + ((bi * heads + h) * len + t) * dh;
          std::copy(src, src + dh, g.raw() + (bi * len + t) * heads * dh + h * dh);
        }
    self.inputs[0]->accumulate(g);
  });
}

template <typename T>
Var<T> merge_heads(const Var<T>& x, std::size_t heads) {
  const auto& s = x.shape();
  if (s.size() != 3 || heads == 0 || s[0] % heads != 0) {
    throw ShapeError("merge_heads: cannot merge " + shape_str(s) + " over " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t b = s[0] / heads, len = s[1], dh = s[2];
  Tensor<T> out(Shape{b, len, heads * dh});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t h = 0; h < heads; ++h) {
        const T* src = x.value().raw() + ((bi * heads + h) * len + t) * dh;
        std::copy(src, src + dh, out.raw() + (bi * len + t) * heads * dh + h * dh);
      }
  return make_op<T>(std::move(out), {x}, [b, len, dh, heads](Node<T>& self) {
    Tensor<T> g(self.inputs[0]->value.shape());
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t h = 0; h < heads; ++h) {
          const T* src = self.grad.raw() + (bi * len + t) * heads * dh + h * dh;
          std::copy(src, src + dh, g.raw() + ((bi * heads + h) * len + t) * dh);
        }
    self.inputs[0]->accumulate(g);
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    self.inputs[0]->accumulate(self.grad);
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  return make_op<T>(Tensor<T>::scalar(total), {x}, [](Node<T>& self) {
    self.inputs[0]->accumulate(Tensor<T>(self.inputs[0]->value.shape(), self.grad.item()));
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), T{1} / static_cast<T>(n));
}

template <typename T>
Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng) {
  if (p <= T{0}) return x;
  if (p >= T{1}) throw Error("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T factor = T{1} / (T{1} - p);
  Tensor<T> mask(x.shape());
  for (auto& m : mask.data()) m = keep(rng) ? factor : T{0};
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return make_op<T>(std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
    Tensor<T> g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= mask[i];
    self.inputs[0]->accumulate(g);
  });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
  const std::size_t cols = x.last_dim(), rows = x.rows();
  if (cols == 0) throw ShapeError("log_softmax over an empty axis");
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.raw() + r * cols;
    T* yr = out.raw() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(xr[c] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
  }
  return out;
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets, T smoothing,
                     std::int32_t ignore_id) {
  const std::size_t vocab = logits.value().last_dim(), rows = logits.value().rows();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  std::size_t counted = 0;
  for (auto t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab)
      throw Error("cross_entropy: target id " + std::to_string(t) + " out of range");
    ++counted;
  }
  if (counted == 0) throw Error("cross_entropy: every target position is padding");
  Tensor<T> logp = log_softmax_rows(logits.value());
  const T off = smoothing / static_cast<T>(vocab);
  const T on = T{1} - smoothing + off;
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const T* lr = logp.raw() + r * vocab;
    T row_sum{0};
    if (smoothing != T{0}) {
      for (std::size_t c = 0; c < vocab; ++c) row_sum += lr[c];
    }
    total -= (T{1} - smoothing) * lr[targets[r]] + off * row_sum;
  }
  const T inv = T{1} / static_cast<T>(counted);
  std::vector<std::int32_t> saved(targets.begin(), targets.end());
  return make_op<T>(
      Tensor<T>::scalar(total * inv), {logits},
      [vocab, rows, inv, on, off, ignore_id, saved = std::move(saved),
       logp = std::move(logp)](Node<T>& self) {
        const T upstream = self.grad.item() * inv;
        Tensor<T> g(self.inputs[0]->value.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          if (saved[r] == ignore_id) continue;
          const T* lr = logp.raw() + r * vocab;
          T* gr = g.raw() + r * vocab;
          for (std::size_t c = 0; c < vocab; ++c) gr[c] = upstream * (std::exp(lr[c]) - off);
          gr[saved[r]] -= upstream * (on - off);
        }
        self.inputs[0]->accumulate(g);
      });
}

#define CIAT_INSTANTIATE_OPS(T)                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> add_constant(const Var<T>&, const Tensor<T>&);                             \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                   \
  template Var<T> bmm(const Var<T>&, const Var<T>&, bool);                                   \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> softmax(const Var<T>&);                                                    \
  template Var<T> masked_softmax(const Var<T>&, const AttentionMask&, std::size_t);          \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                \
  template Var<T> embedding(const Var<T>&, std::span<const std::int32_t>, const Shape&);     \
  template Var<T> split_heads(const Var<T>&, std::size_t);                                   \
  template Var<T> merge_heads(const Var<T>&, std::size_t);                                   \
  template Var<T> reshape(const Var<T>&, Shape);                                             \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> dropout(const Var<T>&, T, std::mt19937_64&);                               \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::int32_t>, T, std::int32_t); \
  template Tensor<T> log_softmax_rows(const Tensor<T>&);

CIAT_INSTANTIATE_OPS(float)
CIAT_INSTANTIATE_OPS(double)

#undef CIAT_INSTANTIATE_OPS

}  // namespace ciat::ops
