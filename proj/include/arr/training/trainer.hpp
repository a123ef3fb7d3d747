#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arr/data/corpus.hpp"
#include "arr/metrics/evaluate.hpp"
#include "arr/numerics/optim.hpp"
#include "arr/training/config.hpp"
#include "arr/training/forward.hpp"
#include "arr/training/losses.hpp"
#include "arr/training/model.hpp"

namespace arr {

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the initialized model, before any update
  double l_rec = std::numeric_limits<double>::quiet_NaN();
  double l_pre = std::numeric_limits<double>::quiet_NaN();
  double l_total = std::numeric_limits<double>::quiet_NaN();
  double cm_recall5 = std::numeric_limits<double>::quiet_NaN();
  double top1 = std::numeric_limits<double>::quiet_NaN();
  double recognition_top1 = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,l_rec,l_pre,l_total,cm_recall@5,top1\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << format_double(e.l_rec) << ',' << format_double(e.l_pre) << ',' << format_double(e.l_total)
       << ',' << format_double(e.cm_recall5) << ',' << format_double(e.top1) << '\n';
  }
  return os.str();
}

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_cm_recall5 = -1.0;
  Checkpoint best;
  Checkpoint final;
  std::size_t steps = 0;
};

namespace detail {

inline std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

template <class T>
void check_finite(T v, const char* what, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(static_cast<double>(v))) {
    throw NumericError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) + ", step " +
                       std::to_string(step));
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochLog&)>;

/// Supervised training in label-only or end-to-end mode.
template <class T>
TrainResult fit(ArrModel<T>& m, const SequenceDataset& train, const SequenceDataset* val, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {}) {
  cfg.validate();
  train.validate();
  if (cfg.mode == TrainMode::Pretrain) throw ConfigError("fit: use pretrain_decoder for pre-training");
  if (cfg.mode == TrainMode::LabelOnly && m.has_encoder()) throw ConfigError("label-only training takes a decoder-only model");
  if (cfg.mode == TrainMode::EndToEnd && !m.has_encoder()) throw ConfigError("end-to-end training needs an encoder");
  if (cfg.mode == TrainMode::EndToEnd && !train.render) throw ConfigError("end-to-end training needs rendered clips");

  ParameterList<T> params;
  auto append = [&](const ParameterList<T>& more) { params.insert(params.end(), more.begin(), more.end()); };
  if (cfg.mode == TrainMode::EndToEnd) {
    if (!cfg.freeze_encoder) append(m.encoder_params());
    append(m.rec_head_params());
  }
  append(m.decoder_params());
  append(m.nap_head_params());

  const nlohmann::json meta = {{"train_config", cfg}};
  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  Adam<T> opt(acfg);
  LrSchedule sched;
  sched.base_lr = cfg.lr;
  sched.warmup_epochs = cfg.warmup_epochs;
  sched.cosine_epochs = cfg.cosine_epochs;
  sched.steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  auto validate_into = [&](EpochLog& e) {
    if (!val || val->size() == 0) return;
    const auto rep = evaluate(m, *val, cfg.eval_batch_size);
    e.cm_recall5 = rep.action.cm_recall5;
    e.top1 = rep.action.top1;
    if (rep.recognition_top1) e.recognition_top1 = *rep.recognition_top1;
  };
  auto record = [&](EpochLog e) {
    result.log.push_back(e);
    const bool better = !std::isnan(e.cm_recall5) && e.cm_recall5 > result.best_cm_recall5;
    if (result.log.size() == 1 || better) {
      if (better) result.best_cm_recall5 = e.cm_recall5;
      result.best_epoch = e.epoch;
      result.best = m.to_checkpoint({{"epoch", e.epoch}, {"train_config", cfg}});
    }
    if (on_epoch) on_epoch(e);
  };

  EpochLog init;
  validate_into(init);
  record(init);

  const bool train_encoder = cfg.mode == TrainMode::EndToEnd && !cfg.freeze_encoder;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = detail::shuffled(train.size(), derive_seed(cfg.seed, epoch));
    double sum_rec = 0.0, sum_pre = 0.0, sum_total = 0.0, lr = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
      zero_grads(params);
      Graph<T> g;
      auto out = forward_batch(g, m, train, idx, train_encoder);
      Var<T> l_pre = loss_pre(out.nap_logits, out.nap_targets, out.batch);
      Var<T> l_rec = out.has_rec ? loss_rec(out.rec_logits, out.rec_labels, out.batch) : g.constant(Tensor<T>({1}));
      Var<T> total = loss_total(l_rec, l_pre, out.has_rec ? cfg.weights : LossWeights{0.0, cfg.weights.pre});
      detail::check_finite(total.value()[0], "loss", epoch, result.steps + 1);
      g.backward(total);
      g.accumulate_param_grads();
      ++result.steps;
      lr = lr_at_step(sched, result.steps);
      opt.step(params, lr);
      sum_rec += static_cast<double>(l_rec.value()[0]);
      sum_pre += static_cast<double>(l_pre.value()[0]);
      sum_total += static_cast<double>(total.value()[0]);
      ++batches;
    }
    EpochLog e;
    e.epoch = epoch;
    e.l_rec = cfg.mode == TrainMode::EndToEnd ? sum_rec / static_cast<double>(batches) : 0.0;
    e.l_pre = sum_pre / static_cast<double>(batches);
    e.l_total = sum_total / static_cast<double>(batches);
    e.lr = lr;
    validate_into(e);
    record(e);
  }
  result.final = m.to_checkpoint({{"epoch", cfg.epochs}, {"train_config", cfg}});
  if (!val || val->size() == 0) {
    result.best = result.final;
    result.best_epoch = cfg.epochs;
  }
  return result;
}

struct PretrainEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean training-batch loss over the epoch
  double lr = 0.0;
};

struct PretrainResult {
  double initial_loss = 0.0;  // full pass over the corpus before any update
  double final_loss = 0.0;    // full pass after the last update
  std::vector<PretrainEpoch> log;
  Checkpoint checkpoint;
  std::size_t steps = 0;
  std::size_t frames_per_sequence = 0;
};

inline std::string pretrain_log_csv(const std::vector<PretrainEpoch>& log) {
  std::ostringstream os;
  os << "epoch,l_feat,lr\n";
  for (const auto& e : log) os << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.lr) << '\n';
  return os.str();
}

/// Unsupervised decoder pre-training: frames sampled every `pretrain_stride`
/// positions from each unlabeled sequence are encoded one frame per clip by
/// the fixed encoder, and the decoder with its feature head learns to
/// predict the next frame's feature. Labels are never read. Only the decoder
/// and the feature head are updated.
template <class T>
PretrainResult pretrain_decoder(ArrModel<T>& m, const SequenceDataset& unlabeled, const TrainConfig& cfg,
                                const std::function<void(const PretrainEpoch&)>& on_epoch = {}) {
  cfg.validate();
  if (!m.has_encoder()) throw ConfigError("pre-training needs an encoder");
  if (!unlabeled.render) throw ConfigError("pre-training needs rendered frames");
  if (unlabeled.size() == 0) throw DataError("pre-training corpus is empty");
  const std::size_t L = unlabeled.labels.front().size();
  std::vector<std::size_t> positions;
  for (std::size_t p = 0; p < L; p += cfg.pretrain_stride) positions.push_back(p);
  const std::size_t n = positions.size();
  if (n < 2) throw ConfigError("pre-training needs at least 2 frames per sequence (got " + std::to_string(n) + ")");

  // The encoder is fixed, so features are computed once.
  const std::size_t N = unlabeled.size(), D = m.encoder().feature_dim();
  Tensor<T> Z = Tensor<T>::matrix(N * n, D);
  for (std::size_t start = 0; start < N; start += cfg.eval_batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(N, start + cfg.eval_batch_size); ++i) idx.push_back(i);
    const auto feats = encode_frozen(m.encoder(), gather_clips(unlabeled, idx, positions, /*frames=*/1));
    std::copy(feats.values().begin(), feats.values().end(), Z.data() + start * n * D);
  }
  auto batch_features = [&](const std::vector<std::size_t>& idx) {
    Tensor<T> out = Tensor<T>::matrix(idx.size() * n, D);
    for (std::size_t b = 0; b < idx.size(); ++b)
      std::copy(Z.data() + idx[b] * n * D, Z.data() + (idx[b] + 1) * n * D, out.data() + b * n * D);
    return out;
  };
  auto full_pass = [&] {
    double total = 0.0;
    for (std::size_t start = 0; start < N; start += cfg.eval_batch_size) {
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(N, start + cfg.eval_batch_size); ++i) idx.push_back(i);
      Graph<T> g;
      total += static_cast<double>(pretrain_loss(g, m, batch_features(idx), idx.size(), n).value()[0]) *
               static_cast<double>(idx.size());
    }
    return total / static_cast<double>(N);
  };

  ParameterList<T> params = m.decoder_params();
  const auto fh = m.feat_head_params();
  params.insert(params.end(), fh.begin(), fh.end());
  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  Adam<T> opt(acfg);
  LrSchedule sched;
  sched.base_lr = cfg.lr;
  sched.warmup_epochs = cfg.warmup_epochs;
  sched.cosine_epochs = cfg.cosine_epochs;
  sched.steps_per_epoch = (N + cfg.batch_size - 1) / cfg.batch_size;

  PretrainResult result;
  result.frames_per_sequence = n;
  result.initial_loss = full_pass();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = detail::shuffled(N, derive_seed(cfg.seed, epoch));
    double sum = 0.0, lr = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(N, start + cfg.batch_size)));
      zero_grads(params);
      Graph<T> g;
      Var<T> loss = pretrain_loss(g, m, batch_features(idx), idx.size(), n);
      detail::check_finite(loss.value()[0], "pre-training loss", epoch, result.steps + 1);
      g.backward(loss);
      g.accumulate_param_grads();
      ++result.steps;
      lr = lr_at_step(sched, result.steps);
      opt.step(params, lr);
      sum += static_cast<double>(loss.value()[0]);
      ++batches;
    }
    PretrainEpoch e{epoch, sum / static_cast<double>(batches), lr};
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  result.final_loss = full_pass();
  m.set_pretrained_decoder(true);
  result.checkpoint = m.to_checkpoint({{"train_config", cfg},
                                       {"pretrain_initial_loss", result.initial_loss},
                                       {"pretrain_final_loss", result.final_loss}});
  return result;
}

}  // namespace arr
