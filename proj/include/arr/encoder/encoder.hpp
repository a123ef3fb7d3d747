#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/graph.hpp"
#include "arr/numerics/layers.hpp"
#include "arr/numerics/rng.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

/// n frames of H x W x C pixels in [0, 1], stored frame-major then row-major.
struct Clip {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  Clip() = default;
  Clip(std::size_t n, std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : frames(n), height(h), width(w), channels(c), pixels(n * h * w * c, fill) {}

  std::size_t frame_size() const { return height * width * channels; }
  float& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) {
    return pixels[((f * height + y) * width + x) * channels + c];
  }
  float at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[((f * height + y) * width + x) * channels + c];
  }
  std::span<const float> frame(std::size_t f) const { return {pixels.data() + f * frame_size(), frame_size()}; }

  bool same_geometry(const Clip& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }

  void validate() const {
    if (frames < 1) throw ShapeError("clip must contain at least one frame");
    if (pixels.size() != frames * frame_size()) throw ShapeError("clip pixel buffer does not match its geometry");
    for (float v : pixels)
      if (!(v >= 0.0f && v <= 1.0f)) throw DataError("clip pixel outside [0, 1]");
  }
};

struct EncoderConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 32;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t n_frames = 4;  // largest clip length; sizes the temporal embedding
  std::size_t mlp_ratio = 4;
  bool temporal = true;  // false removes the temporal sublayers entirely

  std::size_t tokens_per_frame() const { return (height / patch_size) * (width / patch_size); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  void validate() const {
    if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
      throw ConfigError("encoder: frame " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by patch size " + std::to_string(patch_size));
    }
    if (heads == 0 || embed_dim % heads != 0) throw ConfigError("encoder: embed_dim must be divisible by heads");
    if (n_frames == 0) throw ConfigError("encoder: n_frames must be >= 1");
  }
};

/// Splits one frame (H x W x C) into non-overlapping patches, row-major over
/// patch positions; each token is its patch flattened as (dy, dx, c).
template <class T>
Tensor<T> patchify(std::span<const float> frame, std::size_t height, std::size_t width, std::size_t channels,
                   std::size_t patch_size) {
  if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
    throw ShapeError("patchify: " + std::to_string(height) + "x" + std::to_string(width) + " frame not divisible by patch " +
                     std::to_string(patch_size));
  }
  if (frame.size() != height * width * channels) throw ShapeError("patchify: frame buffer size mismatch");
  const std::size_t ph = height / patch_size, pw = width / patch_size;
  const std::size_t pd = patch_size * patch_size * channels;
  Tensor<T> out = Tensor<T>::matrix(ph * pw, pd);
  for (std::size_t py = 0; py < ph; ++py)
    for (std::size_t px = 0; px < pw; ++px) {
      T* tok = out.data() + (py * pw + px) * pd;
      std::size_t o = 0;
      for (std::size_t dy = 0; dy < patch_size; ++dy)
        for (std::size_t dx = 0; dx < patch_size; ++dx)
          for (std::size_t c = 0; c < channels; ++c)
            tok[o++] = static_cast<T>(frame[((py * patch_size + dy) * width + px * patch_size + dx) * channels + c]);
    }
  return out;
}

/// Recognition network interface: each clip maps to one feature row,
/// independently of every other clip in the batch.
template <class T>
class ClipEncoder {
 public:
  virtual ~ClipEncoder() = default;
  virtual std::size_t feature_dim() const = 0;
  /// Returns a [clips.size() x feature_dim()] node.
  virtual Var<T> encode(Graph<T>& g, std::span<const Clip* const> clips) = 0;
  virtual void visit(ParameterList<T>& out, const std::string& prefix) = 0;
  virtual std::unique_ptr<ClipEncoder<T>> clone() const = 0;
};

/// Toy factorized space-time transformer. Each block applies temporal
/// attention (each token position attends across the clip's frames, with a
/// zero-initialized output projection), then spatial attention within each
/// frame over N patch tokens plus a class token, then an MLP. The clip
/// feature is the mean of the per-frame class tokens after a final norm.
template <class T>
class ToyVideoEncoder final : public ClipEncoder<T> {
 public:
  struct Block {
    LayerNorm<T> norm_t, norm_s, norm_mlp;
    SelfAttention<T> temporal, spatial;
    FeedForward<T> mlp;
  };

  ToyVideoEncoder() = default;

  ToyVideoEncoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.embed_dim, n_tok = cfg_.tokens_per_frame();
    patch_embed_ = Linear<T>(cfg_.patch_dim(), d, rng);
    cls_token_ = Parameter<T>(normal_tensor<T>({1, d}, 0.02, rng));
    spatial_pos_ = Parameter<T>(normal_tensor<T>({n_tok + 1, d}, 0.02, rng));
    temporal_pos_ = Parameter<T>(normal_tensor<T>({cfg_.n_frames, d}, 0.02, rng));
    for (std::size_t b = 0; b < cfg_.depth; ++b) {
      Block blk;
      blk.norm_t = LayerNorm<T>(d);
      blk.norm_s = LayerNorm<T>(d);
      blk.norm_mlp = LayerNorm<T>(d);
      blk.temporal = SelfAttention<T>(d, cfg_.heads, rng, /*zero_output=*/true);
      blk.spatial = SelfAttention<T>(d, cfg_.heads, rng);
      blk.mlp = FeedForward<T>(d, d * cfg_.mlp_ratio, rng);
      blocks_.push_back(std::move(blk));
    }
    final_norm_ = LayerNorm<T>(d);
  }

  const EncoderConfig& config() const { return cfg_; }
  /// Drops (or restores) the temporal sublayers without touching weights.
  void set_temporal_enabled(bool on) { cfg_.temporal = on; }
  std::vector<Block>& blocks() { return blocks_; }
  std::size_t feature_dim() const override { return cfg_.embed_dim; }

  Var<T> encode(Graph<T>& g, std::span<const Clip* const> clips) override {
    if (clips.empty()) throw ShapeError("encode: no clips");
    const Clip& first = *clips[0];
    const std::size_t n = first.frames;
    for (const Clip* c : clips) {
      if (!c->same_geometry(first)) throw ShapeError("encode: clips in one batch must share a shape");
    }
    if (first.height != cfg_.height || first.width != cfg_.width || first.channels != cfg_.channels) {
      throw ShapeError("encode: clip geometry does not match encoder config");
    }
    if (n < 1 || n > cfg_.n_frames) {
      throw ShapeError("encode: clip has " + std::to_string(n) + " frames, encoder supports 1.." +
                       std::to_string(cfg_.n_frames));
    }
    const std::size_t B = clips.size(), N = cfg_.tokens_per_frame(), L = N + 1, pd = cfg_.patch_dim();

    Tensor<T> patches = Tensor<T>::matrix(B * n * N, pd);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < n; ++f) {
        Tensor<T> p = patchify<T>(clips[b]->frame(f), cfg_.height, cfg_.width, cfg_.channels, cfg_.patch_size);
        std::copy(p.values().begin(), p.values().end(), patches.data() + (b * n + f) * N * pd);
      }
    Var<T> emb = patch_embed_(g, g.constant(std::move(patches)));
    Var<T> cls = ops::embedding(g.param(cls_token_), std::vector<int>(B * n, 0));

    // Token order [clip][frame][position], position 0 is the class token.
    std::vector<std::size_t> layout(B * n * L);
    std::vector<int> spatial_idx(B * n * L), temporal_idx(B * n * L);
    for (std::size_t bf = 0; bf < B * n; ++bf)
      for (std::size_t j = 0; j < L; ++j) {
        const std::size_t r = bf * L + j;
        layout[r] = j == 0 ? bf : B * n + bf * N + (j - 1);
        spatial_idx[r] = static_cast<int>(j);
        temporal_idx[r] = static_cast<int>(bf % n);
      }
    Var<T> x = ops::gather_rows(ops::concat_rows(cls, emb), layout);
    x = ops::add(x, ops::embedding(g.param(spatial_pos_), spatial_idx));
    x = ops::add(x, ops::embedding(g.param(temporal_pos_), temporal_idx));

    // [clip][frame][pos] <-> [clip][pos][frame]
    std::vector<std::size_t> to_time(B * n * L), from_time(B * n * L);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t f = 0; f < n; ++f) {
          const std::size_t src = (b * n + f) * L + j;
          const std::size_t dst = (b * L + j) * n + f;
          to_time[dst] = src;
          from_time[src] = dst;
        }

    for (auto& blk : blocks_) {
      if (cfg_.temporal) {
        Var<T> h = ops::gather_rows(blk.norm_t(g, x), to_time);
        Var<T> a = blk.temporal(g, h, n, /*causal=*/false);
        x = ops::add(x, ops::gather_rows(a, from_time));
      }
      x = ops::add(x, blk.spatial(g, blk.norm_s(g, x), L, /*causal=*/false));
      x = ops::add(x, blk.mlp(g, blk.norm_mlp(g, x)));
    }

    std::vector<std::size_t> cls_rows(B * n);
    for (std::size_t bf = 0; bf < B * n; ++bf) cls_rows[bf] = bf * L;
    return ops::mean_groups(final_norm_(g, ops::gather_rows(x, cls_rows)), n);
  }

  void visit(ParameterList<T>& out, const std::string& prefix) override {
    patch_embed_.visit(out, prefix + ".patch_embed");
    out.push_back({prefix + ".cls_token", &cls_token_});
    out.push_back({prefix + ".spatial_pos", &spatial_pos_});
    out.push_back({prefix + ".temporal_pos", &temporal_pos_});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const std::string p = prefix + ".blocks." + std::to_string(b);
      auto& blk = blocks_[b];
      if (cfg_.temporal) {
        blk.norm_t.visit(out, p + ".norm_t");
        blk.temporal.visit(out, p + ".temporal");
      }
      blk.norm_s.visit(out, p + ".norm_s");
      blk.spatial.visit(out, p + ".spatial");
      blk.norm_mlp.visit(out, p + ".norm_mlp");
      blk.mlp.visit(out, p + ".mlp");
    }
    final_norm_.visit(out, prefix + ".final_norm");
  }

  std::unique_ptr<ClipEncoder<T>> clone() const override { return std::make_unique<ToyVideoEncoder<T>>(*this); }

 private:
  EncoderConfig cfg_;
  Linear<T> patch_embed_;
  Parameter<T> cls_token_;
  Parameter<T> spatial_pos_;
  Parameter<T> temporal_pos_;
  std::vector<Block> blocks_;
  LayerNorm<T> final_norm_;
};

/// Feature of a single clip, computed without recording gradients.
template <class T>
Tensor<T> encode_clip(ClipEncoder<T>& encoder, const Clip& clip) {
  Graph<T> g;
  const Clip* ptr = &clip;
  return encoder.encode(g, std::span<const Clip* const>(&ptr, 1)).value();
}

/// Z [T x D]; row t depends on clip t only.
template <class T>
Tensor<T> encode_sequence(ClipEncoder<T>& encoder, const std::vector<Clip>& clips) {
  if (clips.empty()) throw ShapeError("encode_sequence: empty clip sequence");
  std::vector<const Clip*> ptrs;
  for (const auto& c : clips) {
    if (!c.same_geometry(clips.front())) throw ShapeError("encode_sequence: clips have heterogeneous shapes");
    ptrs.push_back(&c);
  }
  Graph<T> g;
  return encoder.encode(g, ptrs).value();
}

/// Linear classifier over clip features; emits logits (no softmax).
template <class T>
struct RecognitionHead {
  Linear<T> proj;

  RecognitionHead() = default;
  RecognitionHead(std::size_t feature_dim, std::size_t num_actions, Rng& rng) : proj(feature_dim, num_actions, rng) {}

  std::size_t num_classes() const { return proj.out_features(); }

  Var<T> operator()(Graph<T>& g, Var<T> z, std::size_t vocab_size) {
    if (vocab_size != num_classes()) {
      throw ConfigError("recognition head has " + std::to_string(num_classes()) + " classes, vocabulary has " +
                        std::to_string(vocab_size));
    }
    return proj(g, z);
  }

  void visit(ParameterList<T>& out, const std::string& prefix) { proj.visit(out, prefix + ".proj"); }
};

}  // namespace arr
