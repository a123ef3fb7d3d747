#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/graph.hpp"
#include "arr/training/config.hpp"

namespace arr {

/// Shift-by-one supervision: input t is labels[t], its target labels[t+1].
struct NapPairs {
  std::vector<int> inputs;
  std::vector<int> targets;
};

inline NapPairs nap_targets(const std::vector<int>& labels, std::size_t T) {
  if (labels.size() != T + 1) {
    throw DataError("nap_targets: expected " + std::to_string(T + 1) + " labels, got " + std::to_string(labels.size()));
  }
  if (T == 0) throw DataError("nap_targets: T must be >= 1");
  return {std::vector<int>(labels.begin(), labels.end() - 1), std::vector<int>(labels.begin() + 1, labels.end())};
}

inline NapPairs nap_targets(const std::vector<int>& labels) {
  if (labels.size() < 2) throw DataError("nap_targets: need at least 2 labels");
  return nap_targets(labels, labels.size() - 1);
}

/// Recognition loss: cross-entropy summed over the T observed positions,
/// averaged over the batch. Logits rows are [sequence][position].
template <class T>
Var<T> loss_rec(Var<T> logits, const std::vector<int>& labels, std::size_t batch) {
  if (batch == 0) throw ShapeError("loss_rec: empty batch");
  return ops::cross_entropy(logits, labels, static_cast<T>(1.0 / static_cast<double>(batch)));
}

/// Next-action prediction loss; `targets` are the shifted labels.
template <class T>
Var<T> loss_pre(Var<T> logits, const std::vector<int>& targets, std::size_t batch) {
  if (batch == 0) throw ShapeError("loss_pre: empty batch");
  return ops::cross_entropy(logits, targets, static_cast<T>(1.0 / static_cast<double>(batch)));
}

template <class T>
Var<T> loss_total(Var<T> l_rec, Var<T> l_pre, const LossWeights& w) {
  if (w.rec < 0.0 || w.pre < 0.0) throw ConfigError("loss weights must be >= 0");
  return ops::weighted_sum(l_rec, static_cast<T>(w.rec), l_pre, static_cast<T>(w.pre));
}

inline double loss_total(double l_rec, double l_pre, const LossWeights& w = {}) {
  if (w.rec < 0.0 || w.pre < 0.0) throw ConfigError("loss weights must be >= 0");
  return w.rec * l_rec + w.pre * l_pre;
}

/// Per-epoch (or per-batch) loss summary.
struct LossReport {
  double l_rec = 0.0;
  double l_pre = 0.0;
  double l_total = 0.0;
  std::vector<double> per_position;  // mean NAP cross-entropy at each position
};

}  // namespace arr
