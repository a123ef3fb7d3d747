#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/graph.hpp"
#include "arr/numerics/kernels.hpp"
#include "arr/numerics/layers.hpp"
#include "arr/numerics/rng.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

enum class DecoderInput { Labels, Features };

struct DecoderConfig {
  std::size_t model_dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t max_T = 16;
  std::size_t mlp_ratio = 4;
  DecoderInput input = DecoderInput::Features;
  std::size_t input_dim = 32;   // encoder feature width (Features mode)
  std::size_t vocab_size = 0;   // label vocabulary incl. UNKNOWN (Labels mode)
  bool causal = true;           // false only for leakage experiments

  std::size_t head_dim() const { return model_dim / heads; }

  void validate() const {
    if (heads == 0 || model_dim % heads != 0) throw ConfigError("decoder: model_dim must be divisible by heads");
    if (max_T == 0) throw ConfigError("decoder: max_T must be >= 1");
    if (input == DecoderInput::Labels && vocab_size == 0) throw ConfigError("decoder: label input needs vocab_size > 0");
    if (input == DecoderInput::Features && input_dim == 0) throw ConfigError("decoder: feature input needs input_dim > 0");
  }
};

/// Lower-triangular (inclusive) attention mask: (i, j) allowed iff j <= i.
inline Mask causal_mask(std::size_t T) {
  if (T == 0) throw ConfigError("causal_mask: T must be >= 1");
  Mask m(T, T, false);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

/// Pre-norm causal transformer decoder. Rows of the input are laid out
/// [sequence][position]; output row (b, t) depends on rows (b, 0..t) only.
template <class T>
class CausalDecoder {
 public:
  struct Block {
    LayerNorm<T> norm_attn, norm_mlp;
    SelfAttention<T> attn;
    FeedForward<T> mlp;
  };

  CausalDecoder() = default;

  CausalDecoder(const DecoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.model_dim;
    if (cfg_.input == DecoderInput::Labels) {
      label_embed_ = Parameter<T>(normal_tensor<T>({cfg_.vocab_size, d}, 0.02, rng));
    } else if (cfg_.input_dim != d) {
      input_proj_ = Linear<T>(cfg_.input_dim, d, rng);
      has_input_proj_ = true;
    }
    pos_embed_ = Parameter<T>(normal_tensor<T>({cfg_.max_T, d}, 0.02, rng));
    for (std::size_t b = 0; b < cfg_.depth; ++b) {
      Block blk;
      blk.norm_attn = LayerNorm<T>(d);
      blk.norm_mlp = LayerNorm<T>(d);
      blk.attn = SelfAttention<T>(d, cfg_.heads, rng);
      blk.mlp = FeedForward<T>(d, d * cfg_.mlp_ratio, rng);
      blocks_.push_back(std::move(blk));
    }
    final_norm_ = LayerNorm<T>(d);
  }

  const DecoderConfig& config() const { return cfg_; }
  void set_causal(bool causal) { cfg_.causal = causal; }

  /// Learned label embedding lookup (before positional embeddings).
  Var<T> embed_labels(Graph<T>& g, const std::vector<int>& ids) {
    if (cfg_.input != DecoderInput::Labels) throw ConfigError("embed_labels: decoder takes feature input");
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
        throw DataError("embed_labels: label " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(cfg_.vocab_size));
      }
    }
    return ops::embedding(g.param(label_embed_), ids);
  }

  /// Feature sequences Z [batch*T x input_dim] -> P [batch*T x model_dim].
  Var<T> forward(Graph<T>& g, Var<T> z, std::size_t seq_len) {
    if (cfg_.input != DecoderInput::Features) throw ConfigError("decoder forward: decoder takes label input");
    if (z.cols() != cfg_.input_dim) {
      throw ShapeError("decoder forward: feature width " + std::to_string(z.cols()) + " vs input_dim " +
                       std::to_string(cfg_.input_dim));
    }
    Var<T> x = has_input_proj_ ? input_proj_(g, z) : z;
    return trunk(g, x, seq_len);
  }

  /// Label sequences [batch*T ids] -> P [batch*T x model_dim].
  Var<T> forward_labels(Graph<T>& g, const std::vector<int>& ids, std::size_t seq_len) {
    return trunk(g, embed_labels(g, ids), seq_len);
  }

  /// Shared blocks: positional embedding, masked self-attention blocks, final norm.
  Var<T> trunk(Graph<T>& g, Var<T> x, std::size_t seq_len) {
    if (seq_len == 0 || seq_len > cfg_.max_T) {
      throw ConfigError("decoder: sequence length " + std::to_string(seq_len) + " exceeds max_T " + std::to_string(cfg_.max_T));
    }
    if (x.rows() % seq_len != 0) throw ShapeError("decoder: rows are not a whole number of sequences");
    std::vector<int> pos(x.rows());
    for (std::size_t r = 0; r < pos.size(); ++r) pos[r] = static_cast<int>(r % seq_len);
    x = ops::add(x, ops::embedding(g.param(pos_embed_), pos));
    for (auto& blk : blocks_) {
      x = ops::add(x, blk.attn(g, blk.norm_attn(g, x), seq_len, cfg_.causal));
      x = ops::add(x, blk.mlp(g, blk.norm_mlp(g, x)));
    }
    return final_norm_(g, x);
  }

  /// Parameters of the input pathway only.
  void visit_input(ParameterList<T>& out, const std::string& prefix) {
    if (cfg_.input == DecoderInput::Labels) {
      out.push_back({prefix + ".label_embed", &label_embed_});
    } else if (has_input_proj_) {
      input_proj_.visit(out, prefix + ".input_proj");
    }
  }

  /// Parameters shared by both input modes.
  void visit_trunk(ParameterList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".pos_embed", &pos_embed_});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const std::string p = prefix + ".blocks." + std::to_string(b);
      blocks_[b].norm_attn.visit(out, p + ".norm_attn");
      blocks_[b].attn.visit(out, p + ".attn");
      blocks_[b].norm_mlp.visit(out, p + ".norm_mlp");
      blocks_[b].mlp.visit(out, p + ".mlp");
    }
    final_norm_.visit(out, prefix + ".final_norm");
  }

  void visit(ParameterList<T>& out, const std::string& prefix) {
    visit_input(out, prefix);
    visit_trunk(out, prefix);
  }

 private:
  DecoderConfig cfg_;
  Parameter<T> label_embed_;
  Linear<T> input_proj_;
  bool has_input_proj_ = false;
  Parameter<T> pos_embed_;
  std::vector<Block> blocks_;
  LayerNorm<T> final_norm_;
};

/// Next-action classifier: logits at position t score the action at t+1.
template <class T>
struct ClassificationHead {
  Linear<T> proj;

  ClassificationHead() = default;
  ClassificationHead(std::size_t model_dim, std::size_t num_actions, Rng& rng) : proj(model_dim, num_actions, rng) {}

  std::size_t num_classes() const { return proj.out_features(); }

  Var<T> operator()(Graph<T>& g, Var<T> p, std::size_t vocab_size) {
    if (vocab_size != num_classes()) {
      throw ConfigError("classification head has " + std::to_string(num_classes()) + " classes, vocabulary has " +
                        std::to_string(vocab_size));
    }
    return proj(g, p);
  }

  void visit(ParameterList<T>& out, const std::string& prefix) { proj.visit(out, prefix + ".proj"); }
};

/// Next-feature regressor used by unsupervised pre-training: row t predicts z_{t+1}.
template <class T>
struct FeatureHead {
  Linear<T> proj;

  FeatureHead() = default;
  FeatureHead(std::size_t model_dim, std::size_t feature_dim, Rng& rng) : proj(model_dim, feature_dim, rng) {}

  std::size_t feature_dim() const { return proj.out_features(); }

  Var<T> operator()(Graph<T>& g, Var<T> p) { return proj(g, p); }

  void visit(ParameterList<T>& out, const std::string& prefix) { proj.visit(out, prefix + ".proj"); }
};

}  // namespace arr
