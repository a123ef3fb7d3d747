#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/rng.hpp"
#include "json.hpp"

namespace arr {

/// First-order Markov chain over K actions with at most s successors per row.
struct MarkovChainSpec {
  std::size_t K = 0;
  std::size_t successors_per_row = 0;
  std::uint64_t seed = 0;
  std::vector<double> transitions;  // K x K, row-major

  double operator()(std::size_t from, std::size_t to) const { return transitions[from * K + to]; }
  const double* row(std::size_t from) const { return transitions.data() + from * K; }

  std::size_t nonzeros(std::size_t from) const {
    return static_cast<std::size_t>(std::count_if(row(from), row(from) + K, [](double p) { return p > 0.0; }));
  }

  void validate() const {
    if (K == 0 || transitions.size() != K * K) throw DataError("markov chain: transition matrix must be K x K");
    for (std::size_t a = 0; a < K; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < K; ++b) {
        const double p = (*this)(a, b);
        if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("markov chain: invalid probability in row " + std::to_string(a));
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw DataError("markov chain: row " + std::to_string(a) + " does not sum to 1");
      if (nonzeros(a) > successors_per_row) {
        throw DataError("markov chain: row " + std::to_string(a) + " exceeds the successor bound");
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < K; ++a) rows.push_back(std::vector<double>(row(a), row(a) + K));
    return {{"K", K}, {"successors_per_row", successors_per_row}, {"seed", seed}, {"transitions", rows}};
  }

  static MarkovChainSpec from_json(const nlohmann::json& j) {
    MarkovChainSpec c;
    c.K = j.at("K").get<std::size_t>();
    c.successors_per_row = j.at("successors_per_row").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto rows = j.at("transitions").get<std::vector<std::vector<double>>>();
    if (rows.size() != c.K) throw DataError("markov chain: expected " + std::to_string(c.K) + " rows");
    for (const auto& r : rows) {
      if (r.size() != c.K) throw DataError("markov chain: ragged transition row");
      c.transitions.insert(c.transitions.end(), r.begin(), r.end());
    }
    c.validate();
    return c;
  }
};

/// Each row gets s distinct successors drawn uniformly, weighted by a
/// symmetric Dirichlet(1) draw.
inline MarkovChainSpec gen_markov_chain(std::size_t K, std::size_t s, std::uint64_t seed) {
  if (K == 0 || s == 0 || s > K) throw ConfigError("markov chain needs 1 <= s <= K");
  MarkovChainSpec c;
  c.K = K;
  c.successors_per_row = s;
  c.seed = seed;
  c.transitions.assign(K * K, 0.0);
  std::vector<std::size_t> perm(K);
  for (std::size_t a = 0; a < K; ++a) {
    Rng rng(derive_seed(seed, a));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) std::swap(perm[i], perm[i + uniform_index(rng, K - i)]);
    std::vector<double> w(s);
    double total = 0.0;
    for (auto& x : w) {
      // Zero-probability draws would silently shrink the support.
      do x = standard_exponential(rng);
      while (x == 0.0);
      total += x;
    }
    for (std::size_t i = 0; i < s; ++i) c.transitions[a * K + perm[i]] = w[i] / total;
  }
  return c;
}

/// Draws an index from an unnormalized-free categorical row (sums to 1).
inline std::size_t sample_categorical(const double* probs, std::size_t n, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    last_nonzero = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_nonzero;
}

/// M sequences of L states; the first state is uniform over K.
inline std::vector<std::vector<int>> gen_label_sequences(const MarkovChainSpec& chain, std::size_t L, std::size_t M,
                                                         std::uint64_t seed) {
  if (L < 2) throw ConfigError("label sequences need length >= 2");
  std::vector<std::vector<int>> out(M, std::vector<int>(L));
  for (std::size_t m = 0; m < M; ++m) {
    Rng rng(derive_seed(seed, m));
    std::size_t state = uniform_index(rng, chain.K);
    out[m][0] = static_cast<int>(state);
    for (std::size_t t = 1; t < L; ++t) {
      state = sample_categorical(chain.row(state), chain.K, rng);
      out[m][t] = static_cast<int>(state);
    }
  }
  return out;
}

/// Number of closed communicating classes of the transition graph.
inline std::size_t closed_class_count(const MarkovChainSpec& chain) {
  const std::size_t K = chain.K;
  // reach[a][b]: b reachable from a (Floyd-Warshall closure, K is small).
  std::vector<std::uint8_t> reach(K * K, 0);
  for (std::size_t a = 0; a < K; ++a) {
    reach[a * K + a] = 1;
    for (std::size_t b = 0; b < K; ++b)
      if (chain(a, b) > 0.0) reach[a * K + b] = 1;
  }
  for (std::size_t m = 0; m < K; ++m)
    for (std::size_t a = 0; a < K; ++a)
      if (reach[a * K + m])
        for (std::size_t b = 0; b < K; ++b)
          if (reach[m * K + b]) reach[a * K + b] = 1;
  std::size_t count = 0;
  std::vector<std::uint8_t> assigned(K, 0);
  for (std::size_t a = 0; a < K; ++a) {
    if (assigned[a]) continue;
    bool closed = true;
    for (std::size_t b = 0; b < K; ++b) {
      const bool same = reach[a * K + b] && reach[b * K + a];
      if (same) assigned[b] = 1;
      if (reach[a * K + b] && !reach[b * K + a]) closed = false;
    }
    if (closed) ++count;
  }
  return count;
}

/// Stationary distribution reached from the uniform start by iterating the
/// lazy chain (P + I) / 2, which has the same fixed points as P but does not
/// oscillate on periodic chains. Iterates until the L1 change is < tol.
inline std::vector<double> stationary_distribution(const MarkovChainSpec& chain, double tol = 1e-12,
                                                   std::size_t max_iter = 1000000) {
  const std::size_t K = chain.K;
  std::vector<double> pi(K, 1.0 / static_cast<double>(K)), next(K);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < K; ++a) {
      next[a] += 0.5 * pi[a];
      for (std::size_t b = 0; b < K; ++b) next[b] += 0.5 * pi[a] * chain(a, b);
    }
    double change = 0.0;
    for (std::size_t a = 0; a < K; ++a) change += std::abs(next[a] - pi[a]);
    pi.swap(next);
    if (change < tol) return pi;
  }
  throw NumericError("stationary distribution did not converge");
}

/// Indices of the k largest entries of a row; ties go to the lower index.
inline std::vector<std::size_t> topk_indices(const double* scores, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  return idx;
}

struct BayesRecall {
  std::vector<double> per_class;  // NaN for classes that never occur as a next state
  double class_mean = 0.0;
  std::vector<double> stationary;
};

/// Recall of the predictor that answers the k most probable successors of the
/// current state, under the stationary state distribution.
inline BayesRecall bayes_topk_recall(const MarkovChainSpec& chain, std::size_t k) {
  chain.validate();
  if (k == 0) throw ConfigError("bayes recall needs k >= 1");
  const std::size_t K = chain.K;
  std::size_t max_nonzeros = 0;
  for (std::size_t a = 0; a < K; ++a) max_nonzeros = std::max(max_nonzeros, chain.nonzeros(a));
  // With k covering every row's support the answer is 1 for every reachable
  // class whatever the stationary weights, so only a reducible chain with a
  // k below the support makes the oracle ill-defined.
  if (k < max_nonzeros && closed_class_count(chain) > 1) {
    throw DataError("markov chain seed " + std::to_string(chain.seed) +
                    " is reducible (no unique stationary distribution); try a different seed");
  }
  BayesRecall out;
  out.stationary = stationary_distribution(chain);
  std::vector<double> num(K, 0.0), den(K, 0.0);
  for (std::size_t a = 0; a < K; ++a) {
    const auto top = topk_indices(chain.row(a), K, k);
    std::vector<std::uint8_t> in_top(K, 0);
    for (auto c : top) in_top[c] = 1;
    for (std::size_t c = 0; c < K; ++c) {
      const double mass = out.stationary[a] * chain(a, c);
      den[c] += mass;
      if (in_top[c]) num[c] += mass;
    }
  }
  out.per_class.assign(K, std::nan(""));
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < K; ++c) {
    if (den[c] > 0.0) {
      out.per_class[c] = num[c] / den[c];
      sum += out.per_class[c];
      ++counted;
    }
  }
  out.class_mean = counted ? sum / static_cast<double>(counted) : 0.0;
  return out;
}

}  // namespace arr
