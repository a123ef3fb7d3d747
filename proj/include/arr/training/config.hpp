#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "arr/decoder/decoder.hpp"
#include "arr/encoder/encoder.hpp"
#include "arr/error.hpp"
#include "json.hpp"

namespace arr {

enum class TrainMode { LabelOnly, Pretrain, EndToEnd };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::LabelOnly: return "label-only";
    case TrainMode::Pretrain: return "pretrain";
    case TrainMode::EndToEnd: return "end-to-end";
  }
  return "label-only";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "label-only" || s == "label_only") return TrainMode::LabelOnly;
  if (s == "pretrain") return TrainMode::Pretrain;
  if (s == "end-to-end" || s == "end_to_end") return TrainMode::EndToEnd;
  throw ConfigError("unknown training mode '" + s + "' (expected label-only, pretrain or end-to-end)");
}

struct LossWeights {
  double rec = 1.0;
  double pre = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t warmup_epochs = 20;
  std::size_t cosine_epochs = 30;
  double lr = 1e-4;
  double weight_decay = 4e-5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::LabelOnly;
  LossWeights weights;
  bool freeze_encoder = false;      // end-to-end: features from a fixed encoder
  std::size_t pretrain_stride = 1;  // spacing of the frames sampled for pre-training
  std::size_t eval_batch_size = 256;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (epochs > 0 && warmup_epochs + cosine_epochs > epochs) {
      throw ConfigError("warmup_epochs + cosine_epochs (" + std::to_string(warmup_epochs + cosine_epochs) +
                        ") exceeds epochs (" + std::to_string(epochs) + ")");
    }
    if (weights.rec < 0.0 || weights.pre < 0.0) throw ConfigError("loss weights must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (pretrain_stride == 0) throw ConfigError("pretrain_stride must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"warmup_epochs", c.warmup_epochs},
       {"cosine_epochs", c.cosine_epochs},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"mode", to_string(c.mode)},
       {"loss_weight_rec", c.weights.rec},
       {"loss_weight_pre", c.weights.pre},
       {"freeze_encoder", c.freeze_encoder},
       {"pretrain_stride", c.pretrain_stride},
       {"eval_batch_size", c.eval_batch_size}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.cosine_epochs = j.value("cosine_epochs", c.cosine_epochs);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode").get<std::string>());
  c.weights.rec = j.value("loss_weight_rec", c.weights.rec);
  c.weights.pre = j.value("loss_weight_pre", c.weights.pre);
  c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
  c.pretrain_stride = j.value("pretrain_stride", c.pretrain_stride);
  c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
}

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"height", c.height},       {"width", c.width},         {"channels", c.channels},
       {"patch_size", c.patch_size}, {"embed_dim", c.embed_dim}, {"depth", c.depth},
       {"heads", c.heads},         {"n_frames", c.n_frames},   {"mlp_ratio", c.mlp_ratio},
       {"temporal", c.temporal}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.channels = j.value("channels", c.channels);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.n_frames = j.value("n_frames", c.n_frames);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.temporal = j.value("temporal", c.temporal);
}

inline void to_json(nlohmann::json& j, const DecoderConfig& c) {
  j = {{"model_dim", c.model_dim},
       {"depth", c.depth},
       {"heads", c.heads},
       {"max_T", c.max_T},
       {"mlp_ratio", c.mlp_ratio},
       {"input", c.input == DecoderInput::Labels ? "labels" : "features"},
       {"input_dim", c.input_dim},
       {"vocab_size", c.vocab_size},
       {"causal", c.causal}};
}

inline void from_json(const nlohmann::json& j, DecoderConfig& c) {
  c.model_dim = j.value("model_dim", c.model_dim);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.max_T = j.value("max_T", c.max_T);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  if (j.contains("input")) c.input = j.at("input").get<std::string>() == "labels" ? DecoderInput::Labels : DecoderInput::Features;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.causal = j.value("causal", c.causal);
}

/// Architecture of a full model. Label-only models have no encoder.
struct ModelConfig {
  bool has_encoder = false;
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;

  /// Decoder-only model reading action labels.
  static ModelConfig label_only(std::size_t classes, DecoderConfig dec, std::uint64_t seed) {
    ModelConfig m;
    m.num_classes = classes;
    dec.input = DecoderInput::Labels;
    dec.vocab_size = classes;
    m.decoder = dec;
    m.seed = seed;
    return m;
  }

  /// Encoder + feature decoder.
  static ModelConfig video(std::size_t classes, EncoderConfig enc, DecoderConfig dec, std::uint64_t seed) {
    ModelConfig m;
    m.has_encoder = true;
    m.num_classes = classes;
    m.encoder = enc;
    dec.input = DecoderInput::Features;
    dec.input_dim = enc.embed_dim;
    m.decoder = dec;
    m.seed = seed;
    return m;
  }

  void validate() const {
    if (num_classes == 0) throw ConfigError("model needs at least one class");
    decoder.validate();
    if (has_encoder) {
      encoder.validate();
      if (decoder.input != DecoderInput::Features || decoder.input_dim != encoder.embed_dim) {
        throw ConfigError("video model: decoder input must be encoder features");
      }
    } else if (decoder.input != DecoderInput::Labels || decoder.vocab_size != num_classes) {
      throw ConfigError("label-only model: decoder must embed the class vocabulary");
    }
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"has_encoder", c.has_encoder}, {"decoder", c.decoder}, {"num_classes", c.num_classes}, {"seed", c.seed}};
  if (c.has_encoder) j["encoder"] = c.encoder;
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.has_encoder = j.at("has_encoder").get<bool>();
  c.decoder = j.at("decoder").get<DecoderConfig>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (c.has_encoder) c.encoder = j.at("encoder").get<EncoderConfig>();
}

}  // namespace arr
