#pragma once

#include <algorithm>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "arr/cli/commands.hpp"

namespace arr::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

/// --config reader for JSON objects. Keys name flags of the selected
/// subcommand ('_' and '-' are interchangeable); nested objects are
/// flattened, so a manifest's config block can be passed back in.
class ConfigJSON : public CLI::Config {
 public:
  explicit ConfigJSON(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? nlohmann::json(opt->results().front()) : nlohmann::json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, items);
    // Config files are read by the root app; route the values to the subcommand.
    const auto subs = root_->get_subcommands();
    if (!subs.empty())
      for (auto& item : items) item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* root_;

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& j, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_null()) continue;
      if (value.is_object()) {
        flatten(value, items);
        continue;
      }
      CLI::ConfigItem item;
      item.name = key;
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

inline void add_sampling_flags(CLI::App* app, std::size_t& T, double& tau_a, std::string& gap, double& fps,
                               std::size_t& frames) {
  app->add_option("--T", T, "Clips per sample; cuts label sequences, samples timelines (0: corpus default)");
  app->add_option("--tau-a", tau_a, "Anticipation time for timeline corpora, seconds");
  app->add_option("--gap-strategy", gap, "Label of unannotated gaps: unknown, random or previous");
  app->add_option("--fps", fps, "Frame rate used to index timeline frames");
  app->add_option("--frames", frames, "Frames per clip (0: corpus setting)");
}

inline void add_train_flags(CLI::App* app, TrainSpec& s, bool with_out = true) {
  app->add_option("--data", s.data, "Corpus directory written by gen-data");
  if (with_out) app->add_option("--out", s.out, "Run directory (default: timestamped under $ARR_OUTPUT_ROOT)");
  app->add_option("--dtype", s.dtype, "Scalar type: float or double");
  app->add_option("--mode", s.mode, "label-only, pretrain or end-to-end");
  app->add_option("--epochs", s.epochs);
  app->add_option("--warmup", s.warmup, "Linear warmup epochs");
  app->add_option("--cosine", s.cosine, "Cosine decay epochs");
  app->add_option("--lr", s.lr);
  app->add_option("--wd", s.wd, "Decoupled weight decay");
  app->add_option("--batch", s.batch);
  app->add_option("--seed", s.seed);
  app->add_option("--rec-weight", s.rec_weight, "Weight of the recognition loss");
  app->add_option("--pre-weight", s.pre_weight, "Weight of the next-action loss");
  app->add_flag("--freeze-encoder", s.freeze_encoder, "Keep encoder parameters fixed in end-to-end training");
  app->add_option("--stride", s.stride, "Frame spacing for decoder pre-training");
  app->add_option("--eval-batch", s.eval_batch);
  app->add_option("--init", s.init, "Checkpoint initializing every model parameter");
  app->add_option("--init-decoder", s.init_decoder, "Checkpoint supplying the decoder (and its encoder)");
  app->add_option("--dim", s.dim, "Decoder width");
  app->add_option("--depth", s.depth, "Decoder blocks");
  app->add_option("--heads", s.heads, "Decoder attention heads");
  app->add_option("--enc-dim", s.enc_dim, "Encoder feature width");
  app->add_option("--enc-depth", s.enc_depth, "Encoder blocks");
  app->add_option("--enc-heads", s.enc_heads, "Encoder attention heads");
  app->add_option("--patch", s.patch, "Encoder patch size");
  add_sampling_flags(app, s.T, s.tau_a, s.gap_strategy, s.fps, s.frames);
}

inline void print_metrics(std::ostream& out, const nlohmann::json& metrics) {
  if (metrics.contains("val")) {
    const auto& a = metrics["val"]["action"];
    out << "val cm_recall@5 " << fixed(a["cm_recall@5"].get<double>(), 4) << "  top1 " << fixed(a["top1"].get<double>(), 4);
    if (metrics["val"].contains("recognition_top1"))
      out << "  recognition top1 " << fixed(metrics["val"]["recognition_top1"].get<double>(), 4);
    out << '\n';
  }
  if (metrics.contains("loss_ratio")) {
    out << "pre-training loss " << format_double(metrics["initial_loss"].get<double>()) << " -> "
        << format_double(metrics["final_loss"].get<double>()) << '\n';
  }
}

/// Entry point of the `arr` tool. Never throws; returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Action anticipation by recognition and reasoning: data, training, evaluation and sweeps."};
  app.config_formatter(std::make_shared<ConfigJSON>(&app));
  app.set_config("--config", "", "JSON file with flag values; explicit flags win");
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  GenDataSpec gen;
  auto* g = app.add_subcommand("gen-data", "Generate a Markov-chain corpus (label sequences or timelines)");
  g->add_option("--out", gen.out, "Output directory (default: timestamped under $ARR_OUTPUT_ROOT)");
  g->add_flag("--force", gen.force, "Replace a non-empty output directory");
  g->add_option("--k", gen.k, "Number of actions");
  g->add_option("--succ", gen.succ, "Successors per action");
  g->add_option("--num", gen.num, "Number of sequences");
  g->add_option("--len", gen.len, "Labels per sequence (T + 1)");
  g->add_option("--seed", gen.seed);
  g->add_flag("--render", gen.render, "Attach synthetic clip rendering");
  g->add_option("--sigma", gen.sigma, "Pixel noise of rendered clips");
  g->add_option("--frames", gen.frames, "Frames per clip");
  g->add_option("--height", gen.height);
  g->add_option("--width", gen.width);
  g->add_option("--channels", gen.channels);
  g->add_flag("--save-clips", gen.save_clips, "Also write every rendered clip to clips.ckpt");
  g->add_flag("--timelines", gen.timelines, "Write annotated video timelines with gaps instead of sequences");
  g->add_option("--videos", gen.videos);
  g->add_option("--actions-per-video", gen.actions_per_video);
  g->add_option("--gap-probability", gen.gap_probability);
  g->add_option("--max-gap", gen.max_gap, "Longest unannotated gap, seconds");

  TrainSpec tr;
  auto* t = app.add_subcommand("train", "Train in label-only, pretrain or end-to-end mode");
  add_train_flags(t, tr);

  EvalSpec ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  e->add_option("--data", ev.data, "Corpus directory");
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  e->add_option("--out", ev.out, "Report directory");
  e->add_option("--split", ev.split, "val, train or all");
  e->add_option("--eval-batch", ev.eval_batch);
  add_sampling_flags(e, ev.T, ev.tau_a, ev.gap_strategy, ev.fps, ev.frames);

  SweepSpec sw;
  auto* s = app.add_subcommand("sweep", "One training run per value of T, gap_strategy or n");
  s->add_option("--param", sw.param, "T, gap_strategy or n");
  s->add_option("--values", sw.values, "Comma-separated values")->delimiter(',');
  s->add_option("--strategies", sw.strategies, "Gap strategies crossed with a T sweep")->delimiter(',');
  s->add_option("--out", sw.out, "Sweep directory");
  add_train_flags(s, sw.base, /*with_out=*/false);

  std::string manifest, rerun_out;
  auto* r = app.add_subcommand("rerun", "Re-execute a run from its manifest and compare outputs bitwise");
  r->add_option("manifest", manifest, "manifest.json of the original run")->required();
  r->add_option("--out", rerun_out, "Directory for the rerun");

  std::vector<std::string> runs;
  auto* c = app.add_subcommand("compare", "Tabulate final metrics of train runs and their differences");
  c->add_option("runs", runs, "Run directories")->required()->expected(2, -1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*g) {
      const auto res = gen_data(gen);
      out << res.dir.string() << '\n';
    } else if (*t) {
      const auto res = train(tr, err);
      out << res.dir.string() << '\n';
      print_metrics(out, res.metrics);
    } else if (*e) {
      const auto res = eval(ev);
      out << res.dir.string() << '\n' << res.report.table();
    } else if (*s) {
      const auto res = sweep(sw, err);
      out << res.dir.string() << '\n' << res.table;
    } else if (*r) {
      const auto res = rerun(manifest, rerun_out, err);
      out << res.dir.string() << '\n';
      if (!res.reproduced) {
        for (const auto& d : res.differences) err << "differs: " << d << '\n';
        err << "rerun did not reproduce the original outputs\n";
        return kRuntimeError;
      }
      out << "reproduced: all outputs identical\n";
    } else if (*c) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      out << compare(dirs);
    }
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kConfigError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace arr::cli
