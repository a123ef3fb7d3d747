#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "json.hpp"

namespace arr::cli {

// Flat settings of each command. Field names double as JSON keys, and as
// flag names with '_' written '-'.

struct GenDataSpec {
  std::string out;
  bool force = false;
  std::size_t k = 20;
  std::size_t succ = 5;
  std::size_t num = 1000;
  std::size_t len = 9;
  std::uint64_t seed = 0;
  // Clip rendering
  bool render = false;
  double sigma = 0.25;
  std::size_t frames = 4;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  bool save_clips = false;
  // Timelines with unannotated gaps instead of plain label sequences
  bool timelines = false;
  std::size_t videos = 200;
  std::size_t actions_per_video = 40;
  double gap_probability = 0.3;
  double max_gap = 2.0;

  void validate() const {
    if (k < 1) throw ConfigError("--k must be >= 1");
    if (succ < 1 || succ > k) throw ConfigError("--succ must be in [1, k]");
    if (!timelines) {
      if (len < 2) throw ConfigError("--len must be >= 2: next-action prediction needs an input and a target");
      if (num < 1) throw ConfigError("--num must be >= 1");
    } else if (videos < 1 || actions_per_video < 1) {
      throw ConfigError("--videos and --actions-per-video must be >= 1");
    }
    if (sigma < 0.0) throw ConfigError("--sigma must be >= 0");
    if (gap_probability < 0.0 || gap_probability > 1.0) throw ConfigError("--gap-probability must be in [0, 1]");
  }
};

struct TrainSpec {
  std::string data;
  std::string out;
  std::string dtype = "float";
  std::string mode = "label-only";
  // Optimization; defaults follow the reference recipe
  std::size_t epochs = 50;
  std::size_t warmup = 20;
  std::size_t cosine = 30;
  double lr = 1e-4;
  double wd = 4e-5;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  double rec_weight = 1.0;
  double pre_weight = 1.0;
  bool freeze_encoder = false;
  std::size_t stride = 1;
  std::size_t eval_batch = 256;
  std::string init;          // checkpoint whose parameters initialize the whole model
  std::string init_decoder;  // checkpoint supplying decoder (and its encoder)
  // Decoder
  std::size_t dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  // Encoder
  std::size_t enc_dim = 32;
  std::size_t enc_depth = 2;
  std::size_t enc_heads = 4;
  std::size_t patch = 8;
  // Sampling of timeline corpora; T = 0 keeps the corpus default
  std::size_t T = 0;
  double tau_a = 1.0;
  std::string gap_strategy = "unknown";
  double fps = 30.0;
  std::size_t frames = 0;  // clip length override, 0 keeps the corpus render setting

  void validate() const {
    if (data.empty()) throw ConfigError("--data is required");
    if (dtype != "float" && dtype != "double") throw ConfigError("--dtype must be float or double");
    if (mode != "label-only" && mode != "pretrain" && mode != "end-to-end") {
      throw ConfigError("--mode must be label-only, pretrain or end-to-end");
    }
    if (!init.empty() && !init_decoder.empty()) throw ConfigError("--init and --init-decoder are exclusive");
  }
};

struct EvalSpec {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string split = "val";
  std::size_t eval_batch = 256;
  std::size_t T = 0;
  double tau_a = 1.0;
  std::string gap_strategy = "unknown";
  double fps = 30.0;
  std::size_t frames = 0;

  void validate() const {
    if (data.empty()) throw ConfigError("--data is required");
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
    if (split != "val" && split != "train" && split != "all") throw ConfigError("--split must be val, train or all");
  }
};

struct SweepSpec {
  TrainSpec base;
  std::string out;
  std::string param = "T";
  std::vector<std::string> values;
  std::vector<std::string> strategies;  // optional second axis for a T sweep

  void validate() const {
    if (param != "T" && param != "gap_strategy" && param != "n") {
      throw ConfigError("unknown sweep parameter '" + param + "' (expected T, gap_strategy or n)");
    }
    if (values.empty()) throw ConfigError("--values must list at least one value");
    if (!strategies.empty() && param != "T") throw ConfigError("--strategies only combines with a T sweep");
    base.validate();
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenDataSpec, out, force, k, succ, num, len, seed, render, sigma, frames,
                                                height, width, channels, save_clips, timelines, videos,
                                                actions_per_video, gap_probability, max_gap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainSpec, data, out, dtype, mode, epochs, warmup, cosine, lr, wd, batch,
                                                seed, rec_weight, pre_weight, freeze_encoder, stride, eval_batch, init,
                                                init_decoder, dim, depth, heads, enc_dim, enc_depth, enc_heads, patch, T,
                                                tau_a, gap_strategy, fps, frames)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalSpec, data, checkpoint, out, split, eval_batch, T, tau_a,
                                                gap_strategy, fps, frames)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepSpec, base, out, param, values, strategies)

}  // namespace arr::cli
