#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arr/data/corpus.hpp"
#include "arr/decoder/decoder.hpp"
#include "arr/encoder/encoder.hpp"
#include "arr/numerics/checkpoint.hpp"
#include "arr/training/config.hpp"

namespace arr {

/// Encoder (optional), recognition head, causal decoder, next-action head
/// and next-feature head, with checkpoint naming
/// encoder.* / rec_head.* / decoder.* / nap_head.* / feat_head.*.
template <class T>
class ArrModel {
 public:
  ArrModel() = default;

  explicit ArrModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.has_encoder) encoder_.emplace(cfg_.encoder, derive_seed(cfg_.seed, 1));
    decoder_ = CausalDecoder<T>(cfg_.decoder, derive_seed(cfg_.seed, 2));
    Rng rng(derive_seed(cfg_.seed, 3));
    nap_head_ = ClassificationHead<T>(cfg_.decoder.model_dim, cfg_.num_classes, rng);
    if (cfg_.has_encoder) {
      rec_head_ = RecognitionHead<T>(cfg_.encoder.embed_dim, cfg_.num_classes, rng);
      feat_head_ = FeatureHead<T>(cfg_.decoder.model_dim, cfg_.encoder.embed_dim, rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  bool has_encoder() const { return encoder_.has_value(); }
  ToyVideoEncoder<T>& encoder() {
    if (!encoder_) throw ConfigError("model has no encoder");
    return *encoder_;
  }
  CausalDecoder<T>& decoder() { return decoder_; }
  RecognitionHead<T>& rec_head() { return rec_head_; }
  ClassificationHead<T>& nap_head() { return nap_head_; }
  FeatureHead<T>& feat_head() { return feat_head_; }

  bool pretrained_decoder() const { return pretrained_decoder_; }
  void set_pretrained_decoder(bool v) { pretrained_decoder_ = v; }

  ParameterList<T> encoder_params() {
    ParameterList<T> out;
    if (encoder_) encoder_->visit(out, "encoder");
    return out;
  }
  ParameterList<T> rec_head_params() {
    ParameterList<T> out;
    if (encoder_) rec_head_.visit(out, "rec_head");
    return out;
  }
  ParameterList<T> decoder_params() {
    ParameterList<T> out;
    decoder_.visit(out, "decoder");
    return out;
  }
  ParameterList<T> nap_head_params() {
    ParameterList<T> out;
    nap_head_.visit(out, "nap_head");
    return out;
  }
  ParameterList<T> feat_head_params() {
    ParameterList<T> out;
    if (encoder_) feat_head_.visit(out, "feat_head");
    return out;
  }

  ParameterList<T> all_params() {
    ParameterList<T> out;
    append(out, encoder_params());
    append(out, rec_head_params());
    append(out, decoder_params());
    append(out, nap_head_params());
    append(out, feat_head_params());
    return out;
  }

  Checkpoint to_checkpoint(const nlohmann::json& extra = {}) {
    Checkpoint ck;
    ck.metadata = extra.is_object() ? extra : nlohmann::json::object();
    ck.metadata["model"] = cfg_;
    ck.metadata["pretrained_decoder"] = pretrained_decoder_;
    ck.add_parameters(all_params());
    return ck;
  }

  static ArrModel from_checkpoint(const Checkpoint& ck) {
    if (!ck.metadata.contains("model")) throw DataError("checkpoint has no model configuration");
    ArrModel m(ck.metadata.at("model").get<ModelConfig>());
    ck.load_into(m.all_params());
    m.pretrained_decoder_ = ck.metadata.value("pretrained_decoder", false);
    return m;
  }

  /// Copies decoder.* (and encoder.* when requested and present) from a
  /// checkpoint; every shape must match.
  void load_decoder_from(const Checkpoint& ck, bool include_encoder) {
    ck.load_into(decoder_params());
    if (include_encoder && encoder_) ck.load_into(encoder_params());
    pretrained_decoder_ = ck.metadata.value("pretrained_decoder", false);
  }

 private:
  static void append(ParameterList<T>& out, const ParameterList<T>& more) { out.insert(out.end(), more.begin(), more.end()); }

  ModelConfig cfg_;
  std::optional<ToyVideoEncoder<T>> encoder_;
  RecognitionHead<T> rec_head_;
  CausalDecoder<T> decoder_;
  ClassificationHead<T> nap_head_;
  FeatureHead<T> feat_head_;
  bool pretrained_decoder_ = false;
};

}  // namespace arr
