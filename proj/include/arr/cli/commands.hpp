#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "arr/cli/hash.hpp"
#include "arr/cli/specs.hpp"
#include "arr/data/annotations.hpp"
#include "arr/data/corpus.hpp"
#include "arr/data/markov.hpp"
#include "arr/data/sampling.hpp"
#include "arr/metrics/evaluate.hpp"
#include "arr/training/trainer.hpp"

namespace arr::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run directories and manifests

inline fs::path output_root() {
  if (const char* env = std::getenv("ARR_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

inline bool is_nonempty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

/// `requested` when given (must be empty unless `force`), otherwise a fresh
/// timestamped directory under the output root.
inline fs::path make_run_dir(const std::string& requested, const std::string& command, bool force = false) {
  fs::path dir;
  if (!requested.empty()) {
    dir = requested;
    if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
    if (is_nonempty_dir(dir)) {
      if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
      fs::remove_all(dir);
    }
  } else {
    const fs::path base = output_root() / (command + "-" + timestamp());
    dir = base;
    for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  }
  fs::create_directories(dir);
  return dir;
}

/// Content hashes of every regular file under `dir`, keyed by relative path.
inline nlohmann::json hash_tree(const fs::path& dir, const std::vector<std::string>& skip = {"manifest.json"}) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (std::find(skip.begin(), skip.end(), rel) != skip.end()) continue;
    out[rel] = git_blob_hash_file(e.path());
  }
  return out;
}

struct Manifest {
  std::string command;
  nlohmann::json config;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();   // path -> {file -> hash}
  nlohmann::json outputs = nlohmann::json::object();  // file -> hash, relative to the run dir
  std::string output_dir;
  double wall_clock_seconds = 0.0;
  std::size_t steps = 0;
  std::string created;

  nlohmann::json to_json() const {
    return {{"command", command}, {"config", config},   {"seeds", seeds},
            {"inputs", inputs},   {"outputs", outputs}, {"output_dir", output_dir},
            {"wall_clock_seconds", wall_clock_seconds}, {"steps", steps}, {"created", created}};
  }
  static Manifest from_json(const nlohmann::json& j) {
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.value("seeds", nlohmann::json::object());
    m.inputs = j.value("inputs", nlohmann::json::object());
    m.outputs = j.value("outputs", nlohmann::json::object());
    m.output_dir = j.value("output_dir", std::string{});
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.steps = j.value("steps", std::size_t{0});
    m.created = j.value("created", std::string{});
    return m;
  }
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void finish_manifest(Manifest& m, const fs::path& dir, const Stopwatch& clock) {
  m.output_dir = dir.string();
  m.outputs = hash_tree(dir);
  m.wall_clock_seconds = clock.seconds();
  m.created = timestamp();
  write_json(dir / "manifest.json", m.to_json());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataResult {
  fs::path dir;
  Manifest manifest;
};

inline GenDataResult gen_data(const GenDataSpec& spec) {
  spec.validate();
  Stopwatch clock;
  const fs::path dir = make_run_dir(spec.out, "gen-data", spec.force);
  const auto chain = gen_markov_chain(spec.k, spec.succ, spec.seed);
  write_json(dir / "chain.json", chain.to_json());
  std::optional<RenderConfig> render;
  if (spec.render) {
    RenderConfig rc;
    rc.frames = spec.frames;
    rc.height = spec.height;
    rc.width = spec.width;
    rc.channels = spec.channels;
    rc.sigma = spec.sigma;
    rc.template_seed = derive_seed(spec.seed, 0x7e3);
    rc.validate();
    render = rc;
  }
  const std::uint64_t noise_seed = derive_seed(spec.seed, 0x1015e);
  nlohmann::json meta = {{"split_seed", spec.seed}};
  if (!spec.timelines) {
    SequenceDataset ds;
    ds.vocab = ActionVocabulary::grid(spec.k);
    ds.labels = gen_label_sequences(chain, spec.len, spec.num, derive_seed(spec.seed, 0x5e9));
    ds.render = render;
    ds.noise_seed = noise_seed;
    meta["kind"] = "sequences";
    save_dataset(dir, ds, meta);
    if (spec.save_clips) {
      if (!render) throw ConfigError("--save-clips needs --render");
      save_clips(dir / "clips.ckpt", ds);
    }
  } else {
    const auto vocab = ActionVocabulary::grid(spec.k).with_unknown();
    TimelineConfig tc;
    tc.videos = spec.videos;
    tc.actions_per_video = spec.actions_per_video;
    tc.gap_probability = spec.gap_probability;
    tc.max_gap = spec.max_gap;
    tc.seed = derive_seed(spec.seed, 0x71e);
    const auto records = gen_timelines(chain, vocab, tc);
    std::ofstream out(dir / "annotations.csv", std::ios::binary);
    write_annotations(out, records);
    out.close();
    meta["kind"] = "timelines";
    meta["vocabulary"] = vocab.to_json();
    meta["render"] = render ? render->to_json() : nlohmann::json(nullptr);
    meta["noise_seed"] = noise_seed;
    meta["num_records"] = records.size();
    meta["sample_seed"] = derive_seed(spec.seed, 0x5a3);
    write_json(dir / "corpus.json", meta);
  }
  Manifest m;
  m.command = "gen-data";
  nlohmann::json cfg = spec;
  cfg["out"] = dir.string();
  m.config = cfg;
  m.seeds = {{"seed", spec.seed}, {"noise_seed", noise_seed}};
  finish_manifest(m, dir, clock);
  return {dir, m};
}

// ---------------------------------------------------------------------------
// Corpus loading

struct SamplingFlags {
  std::size_t T = 0;
  double tau_a = 1.0;
  std::string gap_strategy = "unknown";
  double fps = 30.0;
  std::size_t frames = 0;
};

inline SamplingFlags sampling_flags(const TrainSpec& s) { return {s.T, s.tau_a, s.gap_strategy, s.fps, s.frames}; }
inline SamplingFlags sampling_flags(const EvalSpec& s) { return {s.T, s.tau_a, s.gap_strategy, s.fps, s.frames}; }

struct Corpus {
  SequenceDataset all;
  std::uint64_t split_seed = 0;
  std::string kind;
  std::size_t skipped = 0;  // timeline samples without enough history
};

/// Reads a generated corpus. Label sequences may be cut to their first
/// T + 1 labels; timelines are sampled into anticipation samples with the
/// given horizon, length and gap strategy.
inline Corpus load_corpus(const fs::path& dir, const SamplingFlags& flags) {
  if (!fs::exists(dir / "corpus.json")) throw ConfigError("no corpus.json in " + dir.string());
  const auto meta = read_json(dir / "corpus.json");
  Corpus c;
  c.kind = meta.value("kind", std::string("sequences"));
  c.split_seed = meta.value("split_seed", std::uint64_t{0});
  if (c.kind == "sequences") {
    c.all = load_dataset(dir);
    if (flags.T > 0) {
      if (flags.T + 1 > c.all.labels.front().size()) {
        throw ConfigError("T = " + std::to_string(flags.T) + " needs sequences of length " + std::to_string(flags.T + 1) +
                          ", corpus has " + std::to_string(c.all.labels.front().size()));
      }
      for (auto& s : c.all.labels) s.resize(flags.T + 1);
      for (auto& s : c.all.visible) s.resize(flags.T + 1);
    }
  } else if (c.kind == "timelines") {
    const auto vocab = ActionVocabulary::from_json(meta.at("vocabulary"));
    const auto ann = parse_annotations(dir / "annotations.csv");
    std::optional<RenderConfig> render;
    if (meta.contains("render") && !meta.at("render").is_null()) render = RenderConfig::from_json(meta.at("render"));
    SamplingConfig sc;
    sc.T = flags.T > 0 ? flags.T : 8;
    sc.tau_a = flags.tau_a;
    sc.fps = flags.fps;
    sc.n = flags.frames > 0 ? flags.frames : (render ? render->frames : 4);
    sc.gap_strategy = parse_gap_strategy(flags.gap_strategy);
    sc.seed = meta.value("sample_seed", std::uint64_t{0});
    const auto set = build_samples(ann.records, sc, vocab);
    if (set.samples.empty()) throw DataError("no anticipation samples fit in the timelines for T = " + std::to_string(sc.T));
    c.all = dataset_from_samples(set, vocab);
    c.all.render = render;
    c.all.noise_seed = meta.value("noise_seed", std::uint64_t{0});
    c.skipped = set.skipped;
  } else {
    throw DataError("unknown corpus kind '" + c.kind + "'");
  }
  if (flags.frames > 0) {
    if (!c.all.render) throw ConfigError("--frames needs a rendered corpus");
    c.all.render->frames = flags.frames;
  }
  c.all.validate();
  return c;
}

inline nlohmann::json input_hashes(const fs::path& data_dir) { return hash_tree(data_dir); }

// ---------------------------------------------------------------------------
// train

inline ModelConfig model_config(const TrainSpec& s, const SequenceDataset& ds) {
  DecoderConfig dec;
  dec.model_dim = s.dim;
  dec.depth = s.depth;
  dec.heads = s.heads;
  dec.max_T = std::max<std::size_t>(16, ds.labels.front().size());
  if (s.mode == "label-only") return ModelConfig::label_only(ds.classes(), dec, s.seed);
  if (!ds.render) throw ConfigError("mode " + s.mode + " needs a rendered corpus (gen-data --render)");
  EncoderConfig enc;
  enc.height = ds.render->height;
  enc.width = ds.render->width;
  enc.channels = ds.render->channels;
  enc.n_frames = std::max<std::size_t>(ds.render->frames, 1);
  enc.patch_size = s.patch;
  enc.embed_dim = s.enc_dim;
  enc.depth = s.enc_depth;
  enc.heads = s.enc_heads;
  return ModelConfig::video(ds.classes(), enc, dec, s.seed);
}

inline TrainConfig train_config(const TrainSpec& s) {
  TrainConfig c;
  c.epochs = s.epochs;
  c.warmup_epochs = s.warmup;
  c.cosine_epochs = s.cosine;
  c.lr = s.lr;
  c.weight_decay = s.wd;
  c.batch_size = s.batch;
  c.seed = s.seed;
  c.mode = parse_train_mode(s.mode);
  c.weights = {s.rec_weight, s.pre_weight};
  c.freeze_encoder = s.freeze_encoder;
  c.pretrain_stride = s.stride;
  c.eval_batch_size = s.eval_batch;
  return c;
}

struct TrainOutcome {
  fs::path dir;
  Manifest manifest;
  nlohmann::json metrics;
};

template <class T>
TrainOutcome train_impl(const TrainSpec& spec, std::ostream& log) {
  Stopwatch clock;
  const Corpus corpus = load_corpus(spec.data, sampling_flags(spec));
  const auto split = split_dataset(corpus.all, corpus.split_seed);
  if (split.train.size() == 0) throw DataError("training split is empty");
  const TrainConfig cfg = train_config(spec);
  cfg.validate();
  ArrModel<T> model(model_config(spec, corpus.all));
  nlohmann::json inputs = {{spec.data, input_hashes(spec.data)}};
  if (!spec.init.empty()) {
    const auto ck = Checkpoint::load(spec.init);
    ck.load_into(model.all_params());
    model.set_pretrained_decoder(ck.metadata.value("pretrained_decoder", false));
    inputs[spec.init] = git_blob_hash_file(spec.init);
  }
  if (!spec.init_decoder.empty()) {
    const auto ck = Checkpoint::load(spec.init_decoder);
    model.load_decoder_from(ck, model.has_encoder() && ck.contains(model.encoder_params().front().name));
    inputs[spec.init_decoder] = git_blob_hash_file(spec.init_decoder);
  }
  const fs::path dir = make_run_dir(spec.out, "train");

  nlohmann::json metrics;
  std::size_t steps = 0;
  if (cfg.mode == TrainMode::Pretrain) {
    const auto res = pretrain_decoder(model, split.train, cfg, [&](const PretrainEpoch& e) {
      log << "epoch " << e.epoch << "  l_feat " << format_double(e.loss) << '\n';
    });
    write_text(dir / "pretrain_log.csv", pretrain_log_csv(res.log));
    res.checkpoint.save(dir / "final.ckpt");
    metrics = {{"initial_loss", res.initial_loss},
               {"final_loss", res.final_loss},
               {"loss_ratio", res.final_loss / res.initial_loss},
               {"frames_per_sequence", res.frames_per_sequence}};
    steps = res.steps;
  } else {
    const SequenceDataset* val = split.val.size() > 0 ? &split.val : nullptr;
    const auto res = fit(model, split.train, val, cfg, [&](const EpochLog& e) {
      log << "epoch " << e.epoch << "  l_total " << format_double(e.l_total) << "  cm_recall@5 "
          << format_double(e.cm_recall5) << "  top1 " << format_double(e.top1) << '\n';
    });
    write_text(dir / "epoch_log.csv", epoch_log_csv(res.log));
    res.best.save(dir / "best.ckpt");
    res.final.save(dir / "final.ckpt");
    const auto& last = res.log.back();
    metrics = {{"best_epoch", res.best_epoch},
               {"best_cm_recall5", res.best_cm_recall5},
               {"final_l_rec", last.l_rec},
               {"final_l_pre", last.l_pre},
               {"final_l_total", last.l_total},
               {"pretrained_decoder", model.pretrained_decoder()}};
    if (val) {
      const auto rep = evaluate(model, *val, cfg.eval_batch_size);
      metrics["val"] = rep.to_json();
      write_text(dir / "report.txt", rep.table());
    }
    steps = res.steps;
  }
  metrics["train_samples"] = split.train.size();
  metrics["val_samples"] = split.val.size();
  metrics["skipped_samples"] = corpus.skipped;
  metrics["T"] = split.train.T();
  const AdamConfig adam;
  metrics["optimizer"] = {{"name", "adam"}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  if (corpus.kind == "timelines") metrics["gap_strategy"] = spec.gap_strategy;
  write_json(dir / "metrics.json", metrics);

  Manifest m;
  m.command = "train";
  nlohmann::json c = spec;
  c["out"] = dir.string();
  m.config = c;
  m.seeds = {{"seed", spec.seed}, {"split_seed", corpus.split_seed}};
  m.inputs = inputs;
  m.steps = steps;
  finish_manifest(m, dir, clock);
  return {dir, m, metrics};
}

inline TrainOutcome train(const TrainSpec& spec, std::ostream& log = std::cerr) {
  spec.validate();
  return spec.dtype == "double" ? train_impl<double>(spec, log) : train_impl<float>(spec, log);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutcome {
  fs::path dir;
  MetricReport report;
};

template <class T>
EvalOutcome eval_impl(const EvalSpec& spec, const Checkpoint& ck) {
  Stopwatch clock;
  const Corpus corpus = load_corpus(spec.data, sampling_flags(spec));
  auto model = ArrModel<T>::from_checkpoint(ck);
  if (model.config().num_classes != corpus.all.classes()) {
    throw ConfigError("checkpoint predicts " + std::to_string(model.config().num_classes) + " classes, corpus has " +
                      std::to_string(corpus.all.classes()));
  }
  SequenceDataset ds;
  if (spec.split == "all") {
    ds = corpus.all;
  } else {
    auto split = split_dataset(corpus.all, corpus.split_seed);
    ds = spec.split == "val" ? std::move(split.val) : std::move(split.train);
  }
  if (ds.size() == 0) throw DataError("split '" + spec.split + "' is empty");
  const auto rep = evaluate(model, ds, spec.eval_batch);
  const fs::path dir = make_run_dir(spec.out, "eval");
  write_json(dir / "report.json", rep.to_json());
  write_text(dir / "report.txt", rep.table());
  write_text(dir / "per_class.csv", rep.per_class_csv());
  Manifest m;
  m.command = "eval";
  nlohmann::json c = spec;
  c["out"] = dir.string();
  m.config = c;
  m.inputs = {{spec.data, input_hashes(spec.data)}, {spec.checkpoint, git_blob_hash_file(spec.checkpoint)}};
  finish_manifest(m, dir, clock);
  return {dir, rep};
}

inline EvalOutcome eval(const EvalSpec& spec) {
  spec.validate();
  const auto ck = Checkpoint::load(spec.checkpoint);
  // Checkpoints store their scalar type; evaluate in the same one.
  const bool is_double = !ck.records().empty() && ck.records().front().dtype == dtype_name<double>();
  return is_double ? eval_impl<double>(spec, ck) : eval_impl<float>(spec, ck);
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
  std::string value;
  std::string strategy;
  std::uint64_t seed = 0;
  fs::path dir;
  double cm_recall5 = 0.0;
  double top1 = 0.0;
};

struct SweepOutcome {
  fs::path dir;
  std::vector<SweepCell> cells;
  std::string table;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Table 1 layout for a T sweep (rows: strategies, columns: lengths),
/// Table 6 layout for an n sweep, one row over strategies otherwise.
inline std::string sweep_table(const SweepSpec& spec, const std::vector<SweepCell>& cells, bool human) {
  const std::string sep = human ? " | " : ",";
  auto cell_text = [&](double v) { return human ? fixed(100.0 * v, 2) : format_double(v); };
  std::ostringstream os;
  if (spec.param == "T") {
    os << (human ? "Length" : "strategy");
    for (const auto& v : spec.values) os << sep << v;
    os << '\n';
    std::vector<std::string> rows = spec.strategies;
    if (rows.empty()) rows.push_back(spec.base.gap_strategy);
    for (const auto& r : rows) {
      os << r;
      for (const auto& v : spec.values)
        for (const auto& c : cells)
          if (c.value == v && c.strategy == r) os << sep << cell_text(c.cm_recall5);
      os << '\n';
    }
  } else {
    os << (spec.param == "n" ? "Num_frames" : "Strategy");
    for (const auto& v : spec.values) os << sep << v;
    os << '\n' << "cm_recall@5";
    for (const auto& c : cells) os << sep << cell_text(c.cm_recall5);
    os << '\n';
  }
  return os.str();
}

inline SweepOutcome sweep(const SweepSpec& spec, std::ostream& log = std::cerr) {
  spec.validate();
  Stopwatch clock;
  const fs::path dir = make_run_dir(spec.out, "sweep");
  std::vector<std::string> strategies = spec.strategies;
  if (strategies.empty()) strategies.push_back(spec.base.gap_strategy);
  SweepOutcome out;
  out.dir = dir;
  std::size_t steps = 0;
  for (const auto& strategy : strategies) {
    for (const auto& value : spec.values) {
      TrainSpec cell = spec.base;
      cell.gap_strategy = strategy;
      try {
        if (spec.param == "T") cell.T = std::stoul(value);
        if (spec.param == "n") cell.frames = std::stoul(value);
      } catch (const std::exception&) {
        throw ConfigError("sweep value '" + value + "' is not a non-negative integer");
      }
      if (spec.param == "gap_strategy") cell.gap_strategy = value;
      parse_gap_strategy(cell.gap_strategy);
      const std::string key = spec.param + "=" + value + (spec.strategies.empty() ? "" : "_" + strategy);
      cell.seed = derive_seed(spec.base.seed, fnv1a(spec.param + "=" + value));
      cell.out = (dir / ("cell_" + key)).string();
      log << "sweep cell " << key << '\n';
      const auto res = train(cell, log);
      SweepCell c{value, strategy, cell.seed, res.dir, 0.0, 0.0};
      if (res.metrics.contains("val")) {
        c.cm_recall5 = res.metrics["val"]["action"]["cm_recall@5"].get<double>();
        c.top1 = res.metrics["val"]["action"]["top1"].get<double>();
      }
      steps += res.manifest.steps;
      out.cells.push_back(c);
    }
  }
  std::ostringstream csv;
  csv << "param,value,strategy,seed,cm_recall@5,top1,run_dir\n";
  for (const auto& c : out.cells) {
    csv << spec.param << ',' << c.value << ',' << c.strategy << ',' << c.seed << ',' << format_double(c.cm_recall5) << ','
        << format_double(c.top1) << ',' << fs::relative(c.dir, dir).generic_string() << '\n';
  }
  write_text(dir / "sweep.csv", csv.str());
  write_text(dir / "table.csv", sweep_table(spec, out.cells, false));
  out.table = sweep_table(spec, out.cells, true);
  write_text(dir / "table.txt", out.table);
  Manifest m;
  m.command = "sweep";
  nlohmann::json c = spec;
  c["out"] = dir.string();
  m.config = c;
  m.seeds = {{"seed", spec.base.seed}};
  m.inputs = {{spec.base.data, input_hashes(spec.base.data)}};
  m.steps = steps;
  finish_manifest(m, dir, clock);
  return out;
}

// ---------------------------------------------------------------------------
// rerun

struct RerunOutcome {
  fs::path dir;
  bool reproduced = false;
  std::vector<std::string> differences;
};

/// Files whose bytes must match between a run and its rerun. Checkpoints
/// and logs are compared too; nothing time-dependent is written to them.
inline bool is_compared_output(const std::string& rel) { return rel.find("manifest.json") == std::string::npos; }

inline RerunOutcome rerun(const fs::path& manifest_path, const std::string& out, std::ostream& log = std::cerr) {
  const Manifest old = Manifest::from_json(read_json(manifest_path));
  nlohmann::json cfg = old.config;
  RerunOutcome res;
  auto redirect = [&](nlohmann::json& j) { j["out"] = out; };
  if (old.command == "gen-data") {
    redirect(cfg);
    cfg["force"] = false;
    res.dir = gen_data(cfg.get<GenDataSpec>()).dir;
  } else if (old.command == "train") {
    redirect(cfg);
    res.dir = train(cfg.get<TrainSpec>(), log).dir;
  } else if (old.command == "eval") {
    redirect(cfg);
    res.dir = eval(cfg.get<EvalSpec>()).dir;
  } else if (old.command == "sweep") {
    redirect(cfg);
    res.dir = sweep(cfg.get<SweepSpec>(), log).dir;
  } else {
    throw ConfigError("manifest has unknown command '" + old.command + "'");
  }
  const auto fresh = hash_tree(res.dir);
  for (const auto& [file, hash] : old.outputs.items()) {
    if (!is_compared_output(file)) continue;
    if (!fresh.contains(file)) {
      res.differences.push_back(file + ": missing from the rerun");
    } else if (fresh.at(file) != hash) {
      res.differences.push_back(file + ": content differs");
    }
  }
  for (const auto& [file, hash] : fresh.items())
    if (is_compared_output(file) && !old.outputs.contains(file)) res.differences.push_back(file + ": new in the rerun");
  res.reproduced = res.differences.empty();
  return res;
}

// ---------------------------------------------------------------------------
// compare

/// Final validation metrics of several train runs, with the difference of
/// each run from the first.
inline std::string compare(const std::vector<fs::path>& runs) {
  if (runs.size() < 2) throw ConfigError("compare needs at least two run directories");
  struct Row {
    std::string name;
    double cm, top1, l_pre;
    bool pretrained;
  };
  std::vector<Row> rows;
  for (const auto& r : runs) {
    const auto m = read_json(r / "metrics.json");
    if (!m.contains("val")) throw DataError(r.string() + " has no validation metrics");
    rows.push_back({r.filename().string(), m["val"]["action"]["cm_recall@5"].get<double>(),
                    m["val"]["action"]["top1"].get<double>(), m.value("final_l_pre", 0.0),
                    m.value("pretrained_decoder", false)});
  }
  std::ostringstream os;
  os << "run | pretrained | cm_recall@5 | top1 | final l_pre | d cm_recall@5 | d l_pre\n";
  for (const auto& r : rows) {
    os << r.name << " | " << (r.pretrained ? "yes" : "no") << " | " << fixed(100 * r.cm, 2) << " | "
       << fixed(100 * r.top1, 2) << " | " << fixed(r.l_pre, 4) << " | " << fixed(100 * (r.cm - rows[0].cm), 2) << " | "
       << fixed(r.l_pre - rows[0].l_pre, 4) << '\n';
  }
  return os.str();
}

}  // namespace arr::cli
