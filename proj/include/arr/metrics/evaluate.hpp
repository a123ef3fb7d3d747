#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "arr/data/corpus.hpp"
#include "arr/metrics/metrics.hpp"
#include "arr/training/forward.hpp"
#include "arr/training/model.hpp"

namespace arr {

/// Softmax of one logit row, computed in double.
template <class T>
std::vector<double> softmax_probs(std::span<const T> logits) {
  double mx = -INFINITY;
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(static_cast<double>(logits[i]) - mx));
  for (auto& v : p) v /= sum;
  return p;
}

/// Anticipation scores: softmax of the final position's next-action logits
/// for every sample, with the last label as target.
struct Predictions {
  EvalBatch anticipation;
  std::size_t rec_correct = 0;
  std::size_t rec_total = 0;
};

template <class T>
Predictions predict(ArrModel<T>& m, const SequenceDataset& ds, std::size_t batch_size = 256) {
  ds.validate();
  Predictions out;
  out.anticipation.classes = ds.classes();
  const std::size_t T_ = ds.T();
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    Graph<T> g;
    const auto b = forward_batch(g, m, ds, idx, /*train_encoder=*/false);
    const auto& logits = b.nap_logits.value();
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const auto probs = softmax_probs<T>(logits.row(s * T_ + T_ - 1));
      out.anticipation.scores.insert(out.anticipation.scores.end(), probs.begin(), probs.end());
      out.anticipation.targets.push_back(ds.labels[idx[s]][T_]);
    }
    if (b.has_rec) {
      const auto& rl = b.rec_logits.value();
      for (std::size_t r = 0; r < rl.rows(); ++r) {
        const auto row = rl.row(r);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        out.rec_correct += best == b.rec_labels[r];
        ++out.rec_total;
      }
    }
  }
  return out;
}

/// Metrics of the anticipation target (final position only) plus, for
/// video models, recognition accuracy on the observed clips. Pure: the model
/// is not modified.
template <class T>
MetricReport evaluate(ArrModel<T>& m, const SequenceDataset& ds, std::size_t batch_size = 256) {
  const auto pred = predict(m, ds, batch_size);
  MetricReport r = build_report(pred.anticipation, ds.vocab);
  if (pred.rec_total > 0) r.recognition_top1 = static_cast<double>(pred.rec_correct) / static_cast<double>(pred.rec_total);
  return r;
}

}  // namespace arr
