#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/gemm.hpp"
#include "arr/numerics/kernels.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

template <class T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  const Tensor<T>& value() const { return graph_->value(id_); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Graph<T>* graph() const { return graph_; }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

namespace detail {

/// Softmax of one row restricted to allowed entries (all entries when
/// `allowed` is null). Returns false if no entry is allowed.
template <class T>
bool softmax_row(const T* in, T* out, std::size_t n, const std::uint8_t* allowed) {
  T mx = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t c = 0; c < n; ++c) {
    if (allowed && !allowed[c]) continue;
    any = true;
    mx = std::max(mx, in[c]);
  }
  if (!any) return false;
  T sum = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (allowed && !allowed[c]) {
      out[c] = T{0};
      continue;
    }
    out[c] = std::exp(in[c] - mx);
    sum += out[c];
  }
  const T inv = T{1} / sum;
  for (std::size_t c = 0; c < n; ++c) out[c] *= inv;
  return true;
}

}  // namespace detail

/// Reverse-mode tape over 2-D tensors. Nodes are appended in topological
/// order; backward() walks them in reverse.
template <class T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

  /// Leaf whose gradient is wanted (grad_check, feature inputs).
  Var<T> input(Tensor<T> value) { return push(std::move(value), true, nullptr); }

  /// Leaf bound to an external parameter. The value is referenced, not
  /// copied; repeated binds of the same parameter share a node.
  Var<T> param(Parameter<T>& p, bool trainable = true) {
    if (auto it = bindings_.find(&p); it != bindings_.end()) return Var<T>(this, it->second);
    Node n;
    n.external = &p.value;
    n.requires_grad = trainable;
    nodes_.push_back(std::move(n));
    const std::size_t id = nodes_.size() - 1;
    bindings_.emplace(&p, id);
    if (trainable) bound_.emplace_back(&p, id);
    return Var<T>(this, id);
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  bool has_grad(std::size_t id) const { return nodes_[id].grad_ready; }

  /// Gradient accumulator of a node, zero-initialized on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.grad_ready) {
      n.grad = Tensor<T>(value(id).shape());
      n.grad_ready = true;
    }
    return n.grad;
  }
  Tensor<T>& grad(Var<T> v) { return grad(v.id()); }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var<T> loss) {
    if (value(loss.id()).size() != 1) throw ShapeError("backward: loss must be a scalar");
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id())[0] += T{1};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad_ready) n.backward(*this, i);
    }
  }

  /// Adds gradients of every trainable bound parameter into Parameter::grad.
  void accumulate_param_grads() {
    for (auto& [p, id] : bound_) {
      if (!nodes_[id].grad_ready) continue;
      if (p->grad.shape() != p->value.shape()) p->grad = Tensor<T>(p->value.shape());
      p->grad += nodes_[id].grad;
    }
  }

  /// Appends a node. `backward` is dropped when no input needs a gradient.
  Var<T> push(Tensor<T> value, bool requires_grad, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool grad_ready = false;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> bindings_;
  std::vector<std::pair<Parameter<T>*, std::size_t>> bound_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every op checks shapes and records a backward
// closure only when some input requires a gradient.
// ---------------------------------------------------------------------------

namespace ops {

template <class T>
bool any_grad(Var<T> a) {
  return a.graph()->requires_grad(a.id());
}
template <class T, class... Rest>
bool any_grad(Var<T> a, Rest... rest) {
  return any_grad(a) || any_grad(rest...);
}

/// a [m x k] times b [k x n].
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph();
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor<T> out = Tensor<T>::matrix(m, n);
  detail::gemm_nn(av.data(), bv.data(), out.data(), m, k, n, false);
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), any_grad(a, b), [ia, ib, m, k, n](Graph<T>& gr, std::size_t self) {
    const T* dout = gr.grad(self).data();
    if (gr.requires_grad(ia)) {
      const auto bt = detail::transpose(gr.value(ib).data(), k, n);
      detail::gemm_nn(dout, bt.data(), gr.grad(ia).data(), m, n, k, true);
    }
    if (gr.requires_grad(ib)) {
      const auto at = detail::transpose(gr.value(ia).data(), m, k);
      detail::gemm_nn(at.data(), dout, gr.grad(ib).data(), k, m, n, true);
    }
  });
}

/// Adds a bias vector of width cols() to every row.
template <class T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  Graph<T>& g = *x.graph();
  const auto& xv = x.value();
  const auto& bv = bias.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (bv.size() != cols) throw ShapeError("add_bias: bias width " + std::to_string(bv.size()) + " vs " + std::to_string(cols));
  Tensor<T> out = xv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  const std::size_t ix = x.id(), ib = bias.id();
  return g.push(std::move(out), any_grad(x, bias), [ix, ib, rows, cols](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    if (gr.requires_grad(ix)) gr.grad(ix) += d;
    if (gr.requires_grad(ib)) {
      Tensor<T>& db = gr.grad(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) db[c] += d[r * cols + c];
    }
  });
}

/// x [rows x in] W [in x out] + b [out].
template <class T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  return add_bias(matmul(x, weight), bias);
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph();
  a.value().require_same_shape(b.value(), "add");
  Tensor<T> out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), any_grad(a, b), [ia, ib](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    if (gr.requires_grad(ia)) gr.grad(ia) += d;
    if (gr.requires_grad(ib)) gr.grad(ib) += d;
  });
}

template <class T>
Var<T> scale(Var<T> x, T s) {
  Graph<T>& g = *x.graph();
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ix = x.id();
  return g.push(std::move(out), any_grad(x), [ix, s](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    Tensor<T>& dx = gr.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += s * d[i];
  });
}

/// wa * a + wb * b for scalars or equal-shape tensors.
template <class T>
Var<T> weighted_sum(Var<T> a, T wa, Var<T> b, T wb) {
  return add(scale(a, wa), scale(b, wb));
}

template <class T>
Var<T> sum(Var<T> x) {
  Graph<T>& g = *x.graph();
  T s = 0;
  for (T v : x.value().values()) s += v;
  const std::size_t ix = x.id();
  return g.push(Tensor<T>({1}, s), any_grad(x), [ix](Graph<T>& gr, std::size_t self) {
    const T d = gr.grad(self)[0];
    for (auto& v : gr.grad(ix).values()) v += d;
  });
}

template <class T>
Var<T> gelu(Var<T> x) {
  Graph<T>& g = *x.graph();
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = arr::gelu(v);
  const std::size_t ix = x.id();
  return g.push(std::move(out), any_grad(x), [ix](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    const Tensor<T>& xv = gr.value(ix);
    Tensor<T>& dx = gr.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * gelu_grad(xv[i]);
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  Graph<T>& g = *x.graph();
  LayerNormStats<T> stats;
  Tensor<T> out = arr::layer_norm(x.value(), gamma.value(), beta.value(), eps, &stats);
  const std::size_t ix = x.id(), ig = gamma.id(), ibeta = beta.id();
  return g.push(std::move(out), any_grad(x, gamma, beta),
                [ix, ig, ibeta, stats = std::move(stats)](Graph<T>& gr, std::size_t self) {
                  const Tensor<T>& d = gr.grad(self);
                  const Tensor<T>& xv = gr.value(ix);
                  const Tensor<T>& gv = gr.value(ig);
                  const std::size_t rows = xv.rows(), cols = xv.cols();
                  const bool need_x = gr.requires_grad(ix);
                  const bool need_g = gr.requires_grad(ig);
                  const bool need_b = gr.requires_grad(ibeta);
                  std::vector<T> xhat(cols), dxhat(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const T* xr = xv.data() + r * cols;
                    const T* dr = d.data() + r * cols;
                    T mean_dxhat = 0, mean_dxhat_xhat = 0;
                    for (std::size_t c = 0; c < cols; ++c) {
                      xhat[c] = (xr[c] - stats.mean[r]) * stats.rstd[r];
                      dxhat[c] = dr[c] * gv[c];
                      mean_dxhat += dxhat[c];
                      mean_dxhat_xhat += dxhat[c] * xhat[c];
                    }
                    if (need_g) {
                      Tensor<T>& dg = gr.grad(ig);
                      for (std::size_t c = 0; c < cols; ++c) dg[c] += dr[c] * xhat[c];
                    }
                    if (need_b) {
                      Tensor<T>& db = gr.grad(ibeta);
                      for (std::size_t c = 0; c < cols; ++c) db[c] += dr[c];
                    }
                    if (need_x) {
                      mean_dxhat /= static_cast<T>(cols);
                      mean_dxhat_xhat /= static_cast<T>(cols);
                      T* dx = gr.grad(ix).data() + r * cols;
                      for (std::size_t c = 0; c < cols; ++c)
                        dx[c] += stats.rstd[r] * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
                    }
                  }
                });
}

/// Row-wise masked softmax as a graph op (mask broadcast as in arr::masked_softmax).
template <class T>
Var<T> masked_softmax(Var<T> x, const std::optional<Mask>& mask = std::nullopt) {
  Graph<T>& g = *x.graph();
  Tensor<T> out = arr::masked_softmax(x.value(), mask);
  const std::size_t ix = x.id();
  return g.push(std::move(out), any_grad(x), [ix](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    const Tensor<T>& y = gr.value(self);
    Tensor<T>& dx = gr.grad(ix);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += d[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += y[r * cols + c] * (d[r * cols + c] - dot);
    }
  });
}

/// Multi-head scaled dot-product attention applied independently to
/// consecutive groups of `group_len` rows. With `causal`, row i of a group
/// attends to rows j <= i only.
template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t group_len, std::size_t heads, bool causal) {
  Graph<T>& g = *q.graph();
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  const std::size_t rows = qv.rows(), d = qv.cols();
  if (kv.shape() != qv.shape() || vv.shape() != qv.shape()) throw ShapeError("attention: q/k/v shapes differ");
  if (group_len == 0 || rows % group_len != 0) {
    throw ShapeError("attention: " + std::to_string(rows) + " rows not divisible into groups of " +
                     std::to_string(group_len));
  }
  if (heads == 0 || d % heads != 0) throw ShapeError("attention: width " + std::to_string(d) + " not divisible by heads");
  const std::size_t L = group_len, groups = rows / L, dh = d / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));

  std::vector<std::uint8_t> causal_mask(L * L, 1);
  if (causal)
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = i + 1; j < L; ++j) causal_mask[i * L + j] = 0;

  // probs layout: [group][head][i][j]
  std::vector<T> probs(groups * heads * L * L);
  std::vector<T> scores(L);
  Tensor<T> out(qv.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * L;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < L; ++i) {
        const T* qi = qv.data() + (base + i) * d + off;
        for (std::size_t j = 0; j < L; ++j) {
          if (!causal_mask[i * L + j]) {
            scores[j] = T{0};
            continue;
          }
          const T* kj = kv.data() + (base + j) * d + off;
          T s = 0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          scores[j] = s * inv_sqrt;
        }
        T* p = probs.data() + ((gi * heads + h) * L + i) * L;
        detail::softmax_row(scores.data(), p, L, causal_mask.data() + i * L);
        T* oi = out.data() + (base + i) * d + off;
        for (std::size_t j = 0; j < L; ++j) {
          if (p[j] == T{0}) continue;
          const T* vj = vv.data() + (base + j) * d + off;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }

  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return g.push(std::move(out), any_grad(q, k, v),
                [iq, ik, iv, L, groups, heads, dh, d, inv_sqrt, probs = std::move(probs)](Graph<T>& gr,
                                                                                          std::size_t self) {
                  const Tensor<T>& dout = gr.grad(self);
                  const Tensor<T>& qv = gr.value(iq);
                  const Tensor<T>& kv = gr.value(ik);
                  const Tensor<T>& vv = gr.value(iv);
                  const bool need_q = gr.requires_grad(iq), need_k = gr.requires_grad(ik), need_v = gr.requires_grad(iv);
                  T* dq = need_q ? gr.grad(iq).data() : nullptr;
                  T* dk = need_k ? gr.grad(ik).data() : nullptr;
                  T* dv = need_v ? gr.grad(iv).data() : nullptr;
                  std::vector<T> dp(L), ds(L);
                  for (std::size_t gi = 0; gi < groups; ++gi) {
                    const std::size_t base = gi * L;
                    for (std::size_t h = 0; h < heads; ++h) {
                      const std::size_t off = h * dh;
                      for (std::size_t i = 0; i < L; ++i) {
                        const T* p = probs.data() + ((gi * heads + h) * L + i) * L;
                        const T* doi = dout.data() + (base + i) * d + off;
                        T dot = 0;
                        for (std::size_t j = 0; j < L; ++j) {
                          if (p[j] == T{0}) {
                            dp[j] = T{0};
                            continue;
                          }
                          const T* vj = vv.data() + (base + j) * d + off;
                          T s = 0;
                          for (std::size_t c = 0; c < dh; ++c) s += doi[c] * vj[c];
                          dp[j] = s;
                          dot += p[j] * s;
                          if (dv) {
                            T* dvj = dv + (base + j) * d + off;
                            for (std::size_t c = 0; c < dh; ++c) dvj[c] += p[j] * doi[c];
                          }
                        }
                        for (std::size_t j = 0; j < L; ++j) ds[j] = p[j] * (dp[j] - dot) * inv_sqrt;
                        const T* qi = qv.data() + (base + i) * d + off;
                        for (std::size_t j = 0; j < L; ++j) {
                          if (ds[j] == T{0}) continue;
                          const T* kj = kv.data() + (base + j) * d + off;
                          if (dq) {
                            T* dqi = dq + (base + i) * d + off;
                            for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds[j] * kj[c];
                          }
                          if (dk) {
                            T* dkj = dk + (base + j) * d + off;
                            for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds[j] * qi[c];
                          }
                        }
                      }
                    }
                  }
                });
}

/// Row lookup: out row i = table row ids[i].
template <class T>
Var<T> embedding(Var<T> table, const std::vector<int>& ids) {
  Graph<T>& g = *table.graph();
  const auto& tv = table.value();
  const std::size_t n = tv.rows(), d = tv.cols();
  Tensor<T> out = Tensor<T>::matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= n) {
      throw DataError("embedding: index " + std::to_string(ids[i]) + " outside [0, " + std::to_string(n) + ")");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  const std::size_t it = table.id();
  return g.push(std::move(out), any_grad(table), [it, ids, d](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& dout = gr.grad(self);
    Tensor<T>& dt = gr.grad(it);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      T* row = dt.data() + static_cast<std::size_t>(ids[i]) * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += dout[i * d + c];
    }
  });
}

/// out row i = x row index[i]; indices may repeat.
template <class T>
Var<T> gather_rows(Var<T> x, const std::vector<std::size_t>& index) {
  Graph<T>& g = *x.graph();
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor<T> out = Tensor<T>::matrix(index.size(), d);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(xv.data() + index[i] * d, d, out.data() + i * d);
  }
  const std::size_t ix = x.id();
  return g.push(std::move(out), any_grad(x), [ix, index, d](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& dout = gr.grad(self);
    Tensor<T>& dx = gr.grad(ix);
    for (std::size_t i = 0; i < index.size(); ++i) {
      T* row = dx.data() + index[i] * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += dout[i * d + c];
    }
  });
}

/// Stacks the rows of a on top of the rows of b.
template <class T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph();
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("concat_rows: widths differ");
  Tensor<T> out = Tensor<T>::matrix(av.rows() + bv.rows(), av.cols());
  std::copy(av.values().begin(), av.values().end(), out.data());
  std::copy(bv.values().begin(), bv.values().end(), out.data() + av.size());
  const std::size_t ia = a.id(), ib = b.id(), na = av.size();
  return g.push(std::move(out), any_grad(a, b), [ia, ib, na](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& d = gr.grad(self);
    if (gr.requires_grad(ia)) {
      Tensor<T>& da = gr.grad(ia);
      for (std::size_t i = 0; i < na; ++i) da[i] += d[i];
    }
    if (gr.requires_grad(ib)) {
      Tensor<T>& db = gr.grad(ib);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += d[na + i];
    }
  });
}

/// Mean over consecutive blocks of `group` rows.
template <class T>
Var<T> mean_groups(Var<T> x, std::size_t group) {
  Graph<T>& g = *x.graph();
  const auto& xv = x.value();
  const std::size_t rows = xv.rows(), d = xv.cols();
  if (group == 0 || rows % group != 0) throw ShapeError("mean_groups: rows not divisible by group");
  const std::size_t out_rows = rows / group;
  const T inv = T{1} / static_cast<T>(group);
  Tensor<T> out = Tensor<T>::matrix(out_rows, d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) out[(r / group) * d + c] += xv[r * d + c] * inv;
  const std::size_t ix = x.id();
  return g.push(std::move(out), any_grad(x), [ix, group, rows, d, inv](Graph<T>& gr, std::size_t self) {
    const Tensor<T>& dout = gr.grad(self);
    Tensor<T>& dx = gr.grad(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < d; ++c) dx[r * d + c] += dout[(r / group) * d + c] * inv;
  });
}

/// scale * sum over rows of cross-entropy(logits_r, targets_r).
template <class T>
Var<T> cross_entropy(Var<T> logits, const std::vector<int>& targets, T scale_by = T{1}) {
  Graph<T>& g = *logits.graph();
  LossWithGrad<T> ce = arr::cross_entropy(logits.value(), targets);
  const std::size_t il = logits.id();
  return g.push(Tensor<T>({1}, ce.loss * scale_by), any_grad(logits),
                [il, scale_by, grad = std::move(ce.grad)](Graph<T>& gr, std::size_t self) {
                  const T d = gr.grad(self)[0] * scale_by;
                  Tensor<T>& dl = gr.grad(il);
                  for (std::size_t i = 0; i < grad.size(); ++i) dl[i] += d * grad[i];
                });
}

/// scale * sum of squared elementwise differences.
template <class T>
Var<T> squared_error(Var<T> pred, Var<T> target, T scale_by) {
  Graph<T>& g = *pred.graph();
  const auto& pv = pred.value();
  const auto& tv = target.value();
  pv.require_same_shape(tv, "squared_error");
  T s = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) s += (pv[i] - tv[i]) * (pv[i] - tv[i]);
  const std::size_t ip = pred.id(), it = target.id();
  return g.push(Tensor<T>({1}, s * scale_by), any_grad(pred, target), [ip, it, scale_by](Graph<T>& gr, std::size_t self) {
    const T d = gr.grad(self)[0] * scale_by * T{2};
    const Tensor<T>& pv = gr.value(ip);
    const Tensor<T>& tv = gr.value(it);
    if (gr.requires_grad(ip)) {
      Tensor<T>& dp = gr.grad(ip);
      for (std::size_t i = 0; i < pv.size(); ++i) dp[i] += d * (pv[i] - tv[i]);
    }
    if (gr.requires_grad(it)) {
      Tensor<T>& dt = gr.grad(it);
      for (std::size_t i = 0; i < pv.size(); ++i) dt[i] -= d * (pv[i] - tv[i]);
    }
  });
}

/// Mean squared error as a graph op.
template <class T>
Var<T> mse(Var<T> pred, Var<T> target) {
  const std::size_t n = pred.value().size();
  return squared_error(pred, target, n ? T{1} / static_cast<T>(n) : T{0});
}

}  // namespace ops
}  // namespace arr
