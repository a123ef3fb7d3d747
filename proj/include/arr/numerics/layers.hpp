#pragma once

#include <cstddef>
#include <string>

#include "arr/numerics/graph.hpp"
#include "arr/numerics/rng.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(stddev * standard_normal(rng));
  return t;
}

/// Affine map x W + b with W stored as [in, out].
template <class T>
struct Linear {
  Parameter<T> weight;
  Parameter<T> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, double stddev = 0.02)
      : weight(stddev > 0 ? normal_tensor<T>({in, out}, stddev, rng) : Tensor<T>({in, out})), bias(Tensor<T>({out})) {}

  std::size_t in_features() const { return weight.value.dim(0); }
  std::size_t out_features() const { return weight.value.dim(1); }

  Var<T> operator()(Graph<T>& g, Var<T> x) { return ops::linear(x, g.param(weight), g.param(bias)); }

  void visit(ParameterList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
  }
};

template <class T>
struct LayerNorm {
  Parameter<T> gamma;
  Parameter<T> beta;
  T eps = T(1e-5);

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d) : gamma(Tensor<T>({d}, T{1})), beta(Tensor<T>({d})) {}

  Var<T> operator()(Graph<T>& g, Var<T> x) { return ops::layer_norm(x, g.param(gamma), g.param(beta), eps); }

  void visit(ParameterList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
  }
};

/// Multi-head self-attention with separate q/k/v/output projections.
template <class T>
struct SelfAttention {
  Linear<T> wq, wk, wv, wo;
  std::size_t heads = 1;

  SelfAttention() = default;
  SelfAttention(std::size_t d, std::size_t n_heads, Rng& rng, bool zero_output = false)
      : wq(d, d, rng), wk(d, d, rng), wv(d, d, rng), wo(d, d, rng, zero_output ? 0.0 : 0.02), heads(n_heads) {}

  /// Attends within consecutive groups of `group_len` rows.
  Var<T> operator()(Graph<T>& g, Var<T> x, std::size_t group_len, bool causal) {
    Var<T> a = ops::attention(wq(g, x), wk(g, x), wv(g, x), group_len, heads, causal);
    return wo(g, a);
  }

  void visit(ParameterList<T>& out, const std::string& prefix) {
    wq.visit(out, prefix + ".wq");
    wk.visit(out, prefix + ".wk");
    wv.visit(out, prefix + ".wv");
    wo.visit(out, prefix + ".wo");
  }
};

/// Two-layer GELU feed-forward network.
template <class T>
struct FeedForward {
  Linear<T> fc1, fc2;

  FeedForward() = default;
  FeedForward(std::size_t d, std::size_t hidden, Rng& rng) : fc1(d, hidden, rng), fc2(hidden, d, rng) {}

  Var<T> operator()(Graph<T>& g, Var<T> x) { return fc2(g, ops::gelu(fc1(g, x))); }

  void visit(ParameterList<T>& out, const std::string& prefix) {
    fc1.visit(out, prefix + ".fc1");
    fc2.visit(out, prefix + ".fc2");
  }
};

}  // namespace arr
