#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "arr/data/annotations.hpp"
#include "arr/data/vocabulary.hpp"
#include "arr/error.hpp"
#include "arr/numerics/rng.hpp"

namespace arr {

enum class GapStrategy { Unknown, Random, Previous };

inline std::string to_string(GapStrategy s) {
  switch (s) {
    case GapStrategy::Unknown: return "unknown";
    case GapStrategy::Random: return "random";
    case GapStrategy::Previous: return "previous";
  }
  return "unknown";
}

inline GapStrategy parse_gap_strategy(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "unknown") return GapStrategy::Unknown;
  if (s == "random") return GapStrategy::Random;
  if (s == "previous") return GapStrategy::Previous;
  throw ConfigError("unknown gap strategy '" + s + "' (expected unknown, random or previous)");
}

struct SamplingConfig {
  double tau_a = 1.0;  // anticipation time, seconds
  std::size_t T = 8;   // clips per sequence
  std::size_t n = 4;   // frames per clip
  double fps = 30.0;
  GapStrategy gap_strategy = GapStrategy::Unknown;
  std::uint64_t seed = 0;

  double tau_o() const { return static_cast<double>(T) * tau_a; }

  void validate() const {
    if (!(tau_a > 0.0)) throw ConfigError("tau_a must be > 0");
    if (T < 1) throw ConfigError("T must be >= 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  }
};

struct TimeWindow {
  double start = 0.0;
  double stop = 0.0;
  double midpoint() const { return 0.5 * (start + stop); }
};

struct AnticipationSample {
  std::string video_id;
  std::vector<TimeWindow> windows;                // T windows, in time order
  std::vector<std::vector<long>> frame_indices;   // T x n frame numbers
  std::vector<int> labels;                        // T + 1; last is the target
  std::vector<int> visible;                       // T; action actually on screen at each midpoint, or -1
  AnnotationRecord target_record;
  std::size_t target_index = 0;                   // index into the record list
};

struct SampleSet {
  std::vector<AnticipationSample> samples;
  std::size_t skipped = 0;
};

namespace detail {

/// Index of the latest-starting segment covering t, or -1.
inline long covering_segment(const std::vector<AnnotationRecord>& video, double t) {
  long best = -1;
  for (std::size_t i = 0; i < video.size(); ++i) {
    const auto& r = video[i];
    if (r.start_s > t) break;
    if (t < r.stop_s && (best < 0 || r.start_s >= video[static_cast<std::size_t>(best)].start_s)) best = static_cast<long>(i);
  }
  return best;
}

}  // namespace detail

/// Action label at time t for one video's records (sorted by start).
/// Outside every segment the gap strategy decides.
inline int label_at(const std::vector<AnnotationRecord>& video, double t, GapStrategy strategy,
                    const ActionVocabulary& vocab, Rng& rng) {
  const long cover = detail::covering_segment(video, t);
  if (cover >= 0) return video[static_cast<std::size_t>(cover)].action_id;
  auto unknown = [&]() -> int {
    if (!vocab.unknown_id) throw ConfigError("gap labeling needs a vocabulary with an unknown class");
    return *vocab.unknown_id;
  };
  switch (strategy) {
    case GapStrategy::Unknown: return unknown();
    case GapStrategy::Random: return static_cast<int>(uniform_index(rng, vocab.num_actions()));
    case GapStrategy::Previous: {
      long prev = -1;
      for (std::size_t i = 0; i < video.size(); ++i) {
        const auto& r = video[i];
        if (r.stop_s > t) continue;
        if (prev < 0) {
          prev = static_cast<long>(i);
          continue;
        }
        const auto& p = video[static_cast<std::size_t>(prev)];
        if (r.stop_s > p.stop_s || (r.stop_s == p.stop_s && r.start_s >= p.start_s)) prev = static_cast<long>(i);
      }
      return prev >= 0 ? video[static_cast<std::size_t>(prev)].action_id : unknown();
    }
  }
  return unknown();
}

/// One sample per annotated segment: T contiguous windows of length tau_a
/// covering [start - tau_a - tau_o, start - tau_a), i.e. observation stops
/// tau_a before the target begins. Videos start at time 0; targets that
/// would need earlier footage are skipped.
inline SampleSet build_samples(const std::vector<AnnotationRecord>& records, const SamplingConfig& cfg,
                               const ActionVocabulary& vocab) {
  cfg.validate();
  SampleSet out;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && records[end].video_id == records[begin].video_id) ++end;
    const std::vector<AnnotationRecord> video(records.begin() + static_cast<std::ptrdiff_t>(begin),
                                              records.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i = 0; i < video.size(); ++i) {
      const std::size_t global = begin + i;
      const auto& target = video[i];
      const double obs_end = target.start_s - cfg.tau_a;
      const double obs_begin = obs_end - cfg.tau_o();
      // Small tolerance so exact-boundary targets are kept despite rounding.
      if (obs_begin < -1e-9) {
        ++out.skipped;
        continue;
      }
      AnticipationSample s;
      s.video_id = target.video_id;
      s.target_record = target;
      s.target_index = global;
      Rng rng(derive_seed(cfg.seed, global));
      for (std::size_t c = 0; c < cfg.T; ++c) {
        const double lo = target.start_s - cfg.tau_a * static_cast<double>(cfg.T - c + 1);
        const double hi = target.start_s - cfg.tau_a * static_cast<double>(cfg.T - c);
        s.windows.push_back({lo, hi});
        std::vector<long> frames(cfg.n);
        for (std::size_t j = 0; j < cfg.n; ++j) {
          const double t = lo + (static_cast<double>(j) + 0.5) * cfg.tau_a / static_cast<double>(cfg.n);
          frames[j] = static_cast<long>(std::floor(t * cfg.fps));
        }
        s.frame_indices.push_back(std::move(frames));
        const double mid = s.windows.back().midpoint();
        s.labels.push_back(label_at(video, mid, cfg.gap_strategy, vocab, rng));
        const long cover = detail::covering_segment(video, mid);
        s.visible.push_back(cover >= 0 ? video[static_cast<std::size_t>(cover)].action_id : -1);
      }
      s.labels.push_back(target.action_id);
      out.samples.push_back(std::move(s));
    }
    begin = end;
  }
  return out;
}

}  // namespace arr
