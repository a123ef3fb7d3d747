#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arr/data/annotations.hpp"
#include "arr/data/markov.hpp"
#include "arr/data/render.hpp"
#include "arr/data/sampling.hpp"
#include "arr/data/vocabulary.hpp"
#include "arr/error.hpp"
#include "arr/numerics/checkpoint.hpp"
#include "json.hpp"

namespace arr {

/// Training/eval view shared by every mode: per sample, T + 1 labels (the
/// last is the anticipation target) and, when clips are rendered, the action
/// visible in each of the T observed clips (-1 for none).
struct SequenceDataset {
  ActionVocabulary vocab;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<int>> visible;  // empty: identical to labels[0..T)
  std::optional<RenderConfig> render;
  std::uint64_t noise_seed = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t T() const { return labels.empty() ? 0 : labels.front().size() - 1; }
  std::size_t classes() const { return vocab.size(); }

  int visible_action(std::size_t sample, std::size_t pos) const {
    const int a = visible.empty() ? labels[sample][pos] : visible[sample][pos];
    return (a < 0 || vocab.is_unknown(a)) ? -1 : a;
  }

  /// Deterministic clip for (sample, position). Noise is keyed by the
  /// sample's index in the full corpus, so splits render identical clips.
  Clip clip(std::size_t sample, std::size_t pos) const {
    if (!render) throw ConfigError("dataset has no render configuration");
    return render_clip(visible_action(sample, pos), *render, derive_seed(noise_seed, source(sample), pos));
  }

  void validate() const {
    if (labels.empty()) throw DataError("dataset is empty");
    const std::size_t L = labels.front().size();
    if (L < 2) throw DataError("each sample needs at least 2 labels");
    for (const auto& seq : labels) {
      if (seq.size() != L) throw DataError("dataset sequences have different lengths");
      for (int a : seq)
        if (a < 0 || static_cast<std::size_t>(a) >= classes()) throw DataError("label outside the vocabulary");
    }
    if (!visible.empty() && visible.size() != labels.size()) throw DataError("visible labels do not match samples");
  }

  SequenceDataset subset(const std::vector<std::size_t>& idx) const {
    SequenceDataset out;
    out.vocab = vocab;
    out.render = render;
    out.noise_seed = noise_seed;
    out.source_index.reserve(idx.size());
    for (auto i : idx) {
      out.labels.push_back(labels[i]);
      if (!visible.empty()) out.visible.push_back(visible[i]);
      out.source_index.push_back(source(i));
    }
    return out;
  }

  std::size_t source(std::size_t i) const { return source_index.empty() ? i : source_index[i]; }

  std::vector<std::size_t> source_index;  // position in the parent corpus
};

/// Roughly 10% of samples, chosen by a seeded hash of the sample index.
inline bool is_validation(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed ^ 0x5eed5eed5eedULL, index) % 10 == 0;
}

struct Split {
  SequenceDataset train;
  SequenceDataset val;
};

inline Split split_dataset(const SequenceDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < ds.size(); ++i) (is_validation(seed, i) ? va : tr).push_back(i);
  return {ds.subset(tr), ds.subset(va)};
}

inline SequenceDataset dataset_from_sequences(std::vector<std::vector<int>> sequences, ActionVocabulary vocab) {
  SequenceDataset ds;
  ds.vocab = std::move(vocab);
  ds.labels = std::move(sequences);
  return ds;
}

inline SequenceDataset dataset_from_samples(const SampleSet& set, ActionVocabulary vocab) {
  SequenceDataset ds;
  ds.vocab = std::move(vocab);
  for (const auto& s : set.samples) {
    ds.labels.push_back(s.labels);
    ds.visible.push_back(s.visible);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic timelines with unannotated gaps.

struct TimelineConfig {
  std::size_t videos = 200;
  std::size_t actions_per_video = 40;
  double min_duration = 1.0;
  double max_duration = 3.0;
  double gap_probability = 0.3;
  double max_gap = 2.0;
  std::uint64_t seed = 0;
};

/// Each video walks the chain; segments have random durations and are
/// separated, with some probability, by unannotated gaps.
inline std::vector<AnnotationRecord> gen_timelines(const MarkovChainSpec& chain, const ActionVocabulary& vocab,
                                                   const TimelineConfig& cfg) {
  if (vocab.num_actions() != chain.K) throw ConfigError("timeline vocabulary does not match the chain");
  std::vector<AnnotationRecord> out;
  const int width = static_cast<int>(std::to_string(cfg.videos).size());
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    Rng rng(derive_seed(cfg.seed, v));
    std::string id = std::to_string(v);
    id = "video_" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    double t = 0.0;
    std::size_t state = uniform_index(rng, chain.K);
    for (std::size_t i = 0; i < cfg.actions_per_video; ++i) {
      if (i > 0) state = sample_categorical(chain.row(state), chain.K, rng);
      if (uniform01(rng) < cfg.gap_probability) t += cfg.max_gap * uniform01(rng);
      const double dur = cfg.min_duration + (cfg.max_duration - cfg.min_duration) * uniform01(rng);
      AnnotationRecord r;
      r.video_id = id;
      r.start_s = t;
      r.stop_s = t + dur;
      r.action_id = static_cast<int>(state);
      r.verb_id = vocab.verb_of(r.action_id);
      r.noun_id = vocab.noun_of(r.action_id);
      out.push_back(r);
      t += dur;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk corpus: chain.json, sequences.csv, corpus.json (+ optional clips).

inline void write_sequences_csv(const std::filesystem::path& path, const std::vector<std::vector<int>>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "sample_id,position,action_id\n";
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t t = 0; t < seqs[i].size(); ++t) out << i << ',' << t << ',' << seqs[i][t] << '\n';
}

inline std::vector<std::vector<int>> read_sequences_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (detail::split_csv_line(line) != std::vector<std::string>{"sample_id", "position", "action_id"}) {
    throw DataError(path.string() + ": expected header sample_id,position,action_id");
  }
  std::vector<std::vector<int>> seqs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw DataError(path.string() + ": line " + std::to_string(line_no) + " needs 3 fields");
    const auto id = detail::parse_number<std::size_t>(f[0], "sample_id", line_no);
    const auto pos = detail::parse_number<std::size_t>(f[1], "position", line_no);
    const auto a = detail::parse_number<int>(f[2], "action_id", line_no);
    if (id != seqs.size() && id + 1 != seqs.size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": sample ids must be contiguous");
    }
    if (id == seqs.size()) seqs.emplace_back();
    if (pos != seqs.back().size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": positions must be contiguous");
    }
    seqs.back().push_back(a);
  }
  return seqs;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// corpus.json describes how sequences.csv is to be read; visible labels,
/// when present, live in visible.csv with the same layout.
inline void save_dataset(const std::filesystem::path& dir, const SequenceDataset& ds, const nlohmann::json& extra = {}) {
  std::filesystem::create_directories(dir);
  write_sequences_csv(dir / "sequences.csv", ds.labels);
  if (!ds.visible.empty()) write_sequences_csv(dir / "visible.csv", ds.visible);
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["vocabulary"] = ds.vocab.to_json();
  j["render"] = ds.render ? ds.render->to_json() : nlohmann::json(nullptr);
  j["noise_seed"] = ds.noise_seed;
  j["num_sequences"] = ds.size();
  j["sequence_length"] = ds.labels.empty() ? 0 : ds.labels.front().size();
  write_json(dir / "corpus.json", j);
}

inline SequenceDataset load_dataset(const std::filesystem::path& dir) {
  const auto j = read_json(dir / "corpus.json");
  SequenceDataset ds;
  ds.vocab = ActionVocabulary::from_json(j.at("vocabulary"));
  if (j.contains("render") && !j.at("render").is_null()) ds.render = RenderConfig::from_json(j.at("render"));
  ds.noise_seed = j.value("noise_seed", std::uint64_t{0});
  ds.labels = read_sequences_csv(dir / "sequences.csv");
  if (std::filesystem::exists(dir / "visible.csv")) ds.visible = read_sequences_csv(dir / "visible.csv");
  ds.validate();
  return ds;
}

/// Writes every rendered clip of a dataset into one container file, tensor
/// "clip/<sample>/<position>" of shape [frames, H, W, C].
inline void save_clips(const std::filesystem::path& path, const SequenceDataset& ds) {
  Checkpoint ck;
  ck.metadata = {{"kind", "clips"}, {"num_sequences", ds.size()}, {"T", ds.T()}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < ds.T(); ++t) {
      const Clip c = ds.clip(i, t);
      Tensor<float> tensor({c.frames, c.height, c.width, c.channels}, c.pixels);
      ck.add("clip/" + std::to_string(i) + "/" + std::to_string(t), tensor);
    }
  }
  ck.save(path);
}

}  // namespace arr
