#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "arr/metrics/metrics.hpp"
#include "arr/numerics/grad_check.hpp"
#include "arr/numerics/rng.hpp"

namespace arr::oracle {

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = scale * standard_normal(rng);
  return t;
}

inline std::size_t random_dim(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

// ---- metrics: full stable sort by (score desc, index asc) -----------------

inline std::vector<std::size_t> ranking(const double* s, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

inline bool brute_hit(const double* s, std::size_t n, int target, std::size_t k) {
  const auto r = ranking(s, n);
  for (std::size_t i = 0; i < std::min(k, n); ++i)
    if (r[i] == static_cast<std::size_t>(target)) return true;
  return false;
}

inline double brute_cm(const EvalBatch& b, std::size_t k) {
  std::map<int, std::pair<int, int>> per;  // class -> (hits, count)
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto& e = per[b.targets[i]];
    e.second += 1;
    e.first += brute_hit(b.row(i), b.classes, b.targets[i], k);
  }
  double sum = 0;
  for (auto& [c, e] : per) sum += static_cast<double>(e.first) / e.second;
  return sum / static_cast<double>(per.size());
}

inline double brute_acc(const EvalBatch& b, std::size_t k) {
  int hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) hits += brute_hit(b.row(i), b.classes, b.targets[i], k);
  return static_cast<double>(hits) / static_cast<double>(b.size());
}

/// Sum of action probabilities per verb (or noun), by scanning all pairs.
inline std::vector<double> brute_marginal(const std::vector<double>& p, const ActionVocabulary& vocab, bool verb) {
  const std::size_t width = verb ? vocab.n_verbs : vocab.n_nouns;
  std::vector<double> out(width, 0.0);
  for (std::size_t x = 0; x < width; ++x)
    for (std::size_t a = 0; a < p.size(); ++a)
      if ((verb ? vocab.actions[a].first : vocab.actions[a].second) == static_cast<int>(x)) out[x] += p[a];
  return out;
}

inline EvalBatch random_batch(Rng& rng, std::size_t K, std::size_t M, bool ties) {
  EvalBatch b;
  b.classes = K;
  for (std::size_t i = 0; i < M * K; ++i)
    b.scores.push_back(ties ? static_cast<double>(uniform_index(rng, 4)) : uniform01(rng));
  for (std::size_t i = 0; i < M; ++i) b.targets.push_back(static_cast<int>(uniform_index(rng, K)));
  return b;
}

/// Random verb/noun vocabulary with a random subset of pairs.
inline ActionVocabulary random_vocabulary(Rng& rng) {
  ActionVocabulary vocab;
  vocab.n_verbs = 1 + uniform_index(rng, 4);
  vocab.n_nouns = 1 + uniform_index(rng, 4);
  for (std::size_t v = 0; v < vocab.n_verbs; ++v)
    for (std::size_t n = 0; n < vocab.n_nouns; ++n)
      if (uniform01(rng) < 0.6 || (v == 0 && n == 0)) vocab.actions.emplace_back(int(v), int(n));
  return vocab;
}

// ---- gradients: every differentiable op on random shapes ------------------

// A random scalar readout so every output coordinate matters.
inline Var<double> readout(Graph<double>& g, Var<double> y, std::uint64_t seed) {
  auto w = random_tensor(y.value().shape(), seed ^ 0xabcdefULL);
  Var<double> wv = g.constant(w);
  return ops::squared_error(ops::add(y, wv), g.constant(Tensor<double>(y.value().shape())), 0.5);
}

inline Mask lower_triangle(std::size_t L) {
  Mask m(L, L, false);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

struct OpCheck {
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
};

/// Central-difference check of each op with shapes drawn from `seed`.
inline void check_ops(std::uint64_t seed, OpCheck& out) {
  auto check = [&](const std::string& name, auto f, const Tensor<double>& x) {
    auto r = grad_check(f, x);
    ++out.checks;
    if (r.max_rel_error > out.worst || out.where.empty()) {
      out.worst = std::max(out.worst, r.max_rel_error);
      out.where = name + " " + r.worst + " seed " + std::to_string(seed);
    }
  };
  Rng rng(seed);
  const std::size_t m = random_dim(rng, 1, 5), k = random_dim(rng, 1, 6), n = random_dim(rng, 1, 5);
  auto other = random_tensor({k, n}, seed + 1);
  check("matmul", [&](Graph<double>& g, Var<double> x) { return readout(g, ops::matmul(x, g.constant(other)), seed); },
        random_tensor({m, k}, seed + 2));
  auto lhs = random_tensor({m, k}, seed + 3);
  check("matmul_rhs", [&](Graph<double>& g, Var<double> x) { return readout(g, ops::matmul(g.constant(lhs), x), seed); },
        random_tensor({k, n}, seed + 4));
  auto bias = random_tensor({k}, seed + 5);
  check("add_bias", [&](Graph<double>& g, Var<double> x) { return readout(g, ops::add_bias(x, g.input(bias)), seed); },
        random_tensor({m, k}, seed + 6));
  check("gelu", [&](Graph<double>& g, Var<double> x) { return readout(g, ops::gelu(x), seed); },
        random_tensor({m, k}, seed + 7, 2.0));
  auto gamma = random_tensor({k + 1}, seed + 8), beta = random_tensor({k + 1}, seed + 9);
  check("layer_norm", [&](Graph<double>& g, Var<double> x) {
    return readout(g, ops::layer_norm(x, g.input(gamma), g.input(beta), 1e-5), seed);
  }, random_tensor({m, k + 1}, seed + 10));
  check("layer_norm_gamma", [&](Graph<double>& g, Var<double> x) {
    return readout(g, ops::layer_norm(g.constant(random_tensor({m, k + 1}, seed + 10)), x, g.input(beta), 1e-5), seed);
  }, gamma);
  const std::size_t L = random_dim(rng, 1, 5);
  check("masked_softmax", [&](Graph<double>& g, Var<double> x) {
    return readout(g, ops::masked_softmax(x, lower_triangle(L)), seed);
  }, random_tensor({2 * L, L}, seed + 11));
  const std::size_t heads = random_dim(rng, 1, 3), dh = random_dim(rng, 1, 3), groups = random_dim(rng, 1, 3);
  const std::size_t rows = groups * L, d = heads * dh;
  auto kk = random_tensor({rows, d}, seed + 12), vv = random_tensor({rows, d}, seed + 13);
  for (bool causal : {true, false}) {
    check("attention_q", [&](Graph<double>& g, Var<double> x) {
      return readout(g, ops::attention(x, g.constant(kk), g.constant(vv), L, heads, causal), seed);
    }, random_tensor({rows, d}, seed + 14));
    check("attention_kv", [&](Graph<double>& g, Var<double> x) {
      return readout(g, ops::attention(g.constant(kk), x, x, L, heads, causal), seed);
    }, random_tensor({rows, d}, seed + 15));
  }
  std::vector<int> ids{0, 2, 2, 1};
  check("embedding", [&](Graph<double>& g, Var<double> x) { return readout(g, ops::embedding(x, ids), seed); },
        random_tensor({3, k}, seed + 16));
  check("gather_concat_mean", [&](Graph<double>& g, Var<double> x) {
    Var<double> c = ops::concat_rows(x, ops::scale(x, 2.0));
    return readout(g, ops::mean_groups(ops::gather_rows(c, {3, 0, 1, 1}), 2), seed);
  }, random_tensor({2, k}, seed + 17));
  std::vector<int> targets(m);
  for (auto& t : targets) t = static_cast<int>(uniform_index(rng, n));
  check("cross_entropy", [&](Graph<double>&, Var<double> x) { return ops::cross_entropy(x, targets, 0.5); },
        random_tensor({m, n}, seed + 18));
  auto tgt = random_tensor({m, n}, seed + 19);
  check("mse", [&](Graph<double>& g, Var<double> x) { return ops::mse(x, g.constant(tgt)); },
        random_tensor({m, n}, seed + 20));
}

}  // namespace arr::oracle
