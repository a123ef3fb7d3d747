#pragma once

#include <cstddef>
#include <vector>

#include "arr/data/corpus.hpp"
#include "arr/numerics/graph.hpp"
#include "arr/training/losses.hpp"
#include "arr/training/model.hpp"

namespace arr {

/// Outputs of one batch; rows are [sequence][position] over T positions.
template <class T>
struct BatchOutput {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  bool has_rec = false;
  Var<T> rec_logits;              // recognition of each observed clip
  Var<T> nap_logits;              // row t scores the action at t + 1
  std::vector<int> rec_labels;    // labels[0..T) per sequence
  std::vector<int> nap_targets;   // labels[1..T] per sequence
};

/// Clips of positions `positions` for every listed sample, in
/// [sample][position] order. `frames` overrides the clip length when > 0.
inline std::vector<Clip> gather_clips(const SequenceDataset& ds, const std::vector<std::size_t>& idx,
                                      const std::vector<std::size_t>& positions, std::size_t frames = 0) {
  if (!ds.render) throw ConfigError("video model needs a dataset with a render configuration");
  RenderConfig rc = *ds.render;
  if (frames > 0) rc.frames = frames;
  std::vector<Clip> clips;
  clips.reserve(idx.size() * positions.size());
  for (auto i : idx)
    for (auto p : positions)
      clips.push_back(render_clip(ds.visible_action(i, p), rc, derive_seed(ds.noise_seed, ds.source(i), p)));
  return clips;
}

inline std::vector<std::size_t> iota_positions(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

/// Encoder features of a clip list computed outside any training graph.
template <class T>
Tensor<T> encode_frozen(ToyVideoEncoder<T>& enc, const std::vector<Clip>& clips) {
  std::vector<const Clip*> ptrs;
  ptrs.reserve(clips.size());
  for (const auto& c : clips) ptrs.push_back(&c);
  Graph<T> g;
  return enc.encode(g, ptrs).value();
}

/// Runs the model on samples `idx`. With `train_encoder` false the clip
/// features enter the graph as constants, so no gradient reaches the encoder.
template <class T>
BatchOutput<T> forward_batch(Graph<T>& g, ArrModel<T>& m, const SequenceDataset& ds, const std::vector<std::size_t>& idx,
                             bool train_encoder = true) {
  BatchOutput<T> out;
  out.batch = idx.size();
  out.seq_len = ds.T();
  const std::size_t T_ = out.seq_len;
  if (out.batch == 0) throw ShapeError("forward_batch: empty batch");
  if (ds.classes() != m.config().num_classes) {
    throw ConfigError("dataset has " + std::to_string(ds.classes()) + " classes, model has " +
                      std::to_string(m.config().num_classes));
  }
  out.rec_labels.reserve(out.batch * T_);
  out.nap_targets.reserve(out.batch * T_);
  for (auto i : idx) {
    const auto pairs = nap_targets(ds.labels[i], T_);
    out.rec_labels.insert(out.rec_labels.end(), pairs.inputs.begin(), pairs.inputs.end());
    out.nap_targets.insert(out.nap_targets.end(), pairs.targets.begin(), pairs.targets.end());
  }
  Var<T> P;
  if (!m.has_encoder()) {
    P = m.decoder().forward_labels(g, out.rec_labels, T_);
  } else {
    const auto clips = gather_clips(ds, idx, iota_positions(T_));
    Var<T> Z;
    if (train_encoder) {
      std::vector<const Clip*> ptrs;
      ptrs.reserve(clips.size());
      for (const auto& c : clips) ptrs.push_back(&c);
      Z = m.encoder().encode(g, ptrs);
    } else {
      Z = g.constant(encode_frozen(m.encoder(), clips));
    }
    out.has_rec = true;
    out.rec_logits = m.rec_head()(g, Z, ds.classes());
    P = m.decoder().forward(g, Z, T_);
  }
  out.nap_logits = m.nap_head()(g, P, ds.classes());
  return out;
}

/// Next-feature regression over precomputed features Z ([B*n x D], rows
/// [sequence][frame]): prediction at frame t is compared with z_{t+1};
/// squared error is averaged over feature dims and sequences and summed
/// over the n - 1 predicted frames.
template <class T>
Var<T> pretrain_loss(Graph<T>& g, ArrModel<T>& m, const Tensor<T>& Z, std::size_t batch, std::size_t n) {
  if (n < 2) throw ConfigError("pre-training needs at least 2 frames per sequence");
  if (Z.rows() != batch * n) throw ShapeError("pretrain_loss: feature rows do not match batch x frames");
  const std::size_t D = Z.cols();
  Var<T> P = m.decoder().forward(g, g.constant(Z), n);
  Var<T> pred = m.feat_head()(g, P);
  std::vector<std::size_t> rows;
  Tensor<T> target = Tensor<T>::matrix(batch * (n - 1), D);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t + 1 < n; ++t) {
      rows.push_back(b * n + t);
      std::copy(Z.row(b * n + t + 1).begin(), Z.row(b * n + t + 1).end(), target.row(rows.size() - 1).begin());
    }
  return ops::squared_error(ops::gather_rows(pred, rows), g.constant(std::move(target)),
                            static_cast<T>(1.0 / static_cast<double>(batch * D)));
}

}  // namespace arr
