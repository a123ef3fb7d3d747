#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "arr/data/vocabulary.hpp"
#include "arr/error.hpp"
#include "json.hpp"

namespace arr {

/// M x K scores (row-major) with one target per row.
struct EvalBatch {
  std::size_t classes = 0;
  std::vector<double> scores;
  std::vector<int> targets;

  std::size_t size() const { return targets.size(); }
  const double* row(std::size_t i) const { return scores.data() + i * classes; }

  void validate() const {
    if (targets.empty()) throw DataError("evaluation batch is empty");
    if (classes == 0 || scores.size() != targets.size() * classes) throw ShapeError("evaluation scores are not M x K");
    for (int t : targets)
      if (t < 0 || static_cast<std::size_t>(t) >= classes) throw DataError("evaluation target outside [0, K)");
  }
};

/// True iff `target` ranks within the top k, ties going to the lower index.
/// k larger than the row is clamped.
inline bool topk_hit(const double* scores, std::size_t n, int target, std::size_t k) {
  if (k == 0) throw ConfigError("top-k needs k >= 1");
  if (target < 0 || static_cast<std::size_t>(target) >= n) throw DataError("target outside [0, K)");
  const double s = scores[target];
  // Classes ranked ahead of the target: strictly higher, or equal with a lower index.
  std::size_t ahead = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (scores[c] > s || (scores[c] == s && c < static_cast<std::size_t>(target))) ++ahead;
  }
  return ahead < std::min(k, n);
}

inline double topk_accuracy(const EvalBatch& b, std::size_t k) {
  b.validate();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) hits += topk_hit(b.row(i), b.classes, b.targets[i], k);
  return static_cast<double>(hits) / static_cast<double>(b.size());
}

struct ClassRecall {
  double mean = 0.0;
  std::vector<double> recall;       // NaN where the class never occurs
  std::vector<std::size_t> count;   // ground-truth instances per class
  std::vector<std::size_t> hits;
};

/// Per-class top-k recall, averaged over classes that occur as targets.
inline ClassRecall class_mean_topk_recall(const EvalBatch& b, std::size_t k) {
  b.validate();
  ClassRecall out;
  out.count.assign(b.classes, 0);
  out.hits.assign(b.classes, 0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto c = static_cast<std::size_t>(b.targets[i]);
    ++out.count[c];
    out.hits[c] += topk_hit(b.row(i), b.classes, b.targets[i], k);
  }
  out.recall.assign(b.classes, std::nan(""));
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < b.classes; ++c) {
    if (out.count[c] == 0) continue;
    out.recall[c] = static_cast<double>(out.hits[c]) / static_cast<double>(out.count[c]);
    sum += out.recall[c];
    ++present;
  }
  out.mean = sum / static_cast<double>(present);
  return out;
}

inline double class_mean_top1(const EvalBatch& b) { return class_mean_topk_recall(b, 1).mean; }

enum class Axis { Verb, Noun };

/// Sums action probabilities into verb (or noun) probabilities. The unknown
/// filler class, if scored, carries no verb or noun; its mass is dropped and
/// the remainder renormalized.
inline std::vector<double> marginalize(const double* probs, std::size_t n, const ActionVocabulary& vocab, Axis axis) {
  if (!vocab.has_pairs()) throw DataError("vocabulary has no verb/noun structure");
  if (n != vocab.num_actions() && n != vocab.size()) {
    throw DataError("score width " + std::to_string(n) + " does not match vocabulary");
  }
  vocab.validate();
  const std::size_t width = axis == Axis::Verb ? vocab.n_verbs : vocab.n_nouns;
  std::vector<double> out(width, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < vocab.num_actions(); ++a) {
    const auto [verb, noun] = vocab.actions[a];
    out[static_cast<std::size_t>(axis == Axis::Verb ? verb : noun)] += probs[a];
    total += probs[a];
  }
  if (n > vocab.num_actions() && total > 0.0)
    for (auto& v : out) v /= total;
  return out;
}

/// Projects an action-level batch onto verbs or nouns.
inline EvalBatch marginalize_batch(const EvalBatch& b, const ActionVocabulary& vocab, Axis axis) {
  b.validate();
  EvalBatch out;
  out.classes = axis == Axis::Verb ? vocab.n_verbs : vocab.n_nouns;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto row = marginalize(b.row(i), b.classes, vocab, axis);
    out.scores.insert(out.scores.end(), row.begin(), row.end());
    const int a = b.targets[i];
    if (static_cast<std::size_t>(a) >= vocab.num_actions()) throw DataError("unknown class used as evaluation target");
    out.targets.push_back(axis == Axis::Verb ? vocab.verb_of(a) : vocab.noun_of(a));
  }
  return out;
}

struct MetricSection {
  double top1 = 0.0;
  double top5 = 0.0;
  double cm_recall5 = 0.0;
  double cm_top1 = 0.0;
  ClassRecall per_class;  // top-5 recall table

  nlohmann::json to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < per_class.count.size(); ++c) {
      if (per_class.count[c] == 0) continue;
      classes.push_back({{"class", c}, {"count", per_class.count[c]}, {"hits@5", per_class.hits[c]},
                         {"recall@5", per_class.recall[c]}});
    }
    return {{"top1", top1}, {"top5", top5}, {"cm_recall@5", cm_recall5}, {"cm_top1", cm_top1}, {"per_class", classes}};
  }
};

inline MetricSection metric_section(const EvalBatch& b) {
  MetricSection s;
  s.top1 = topk_accuracy(b, 1);
  s.top5 = topk_accuracy(b, 5);
  s.per_class = class_mean_topk_recall(b, 5);
  s.cm_recall5 = s.per_class.mean;
  s.cm_top1 = class_mean_top1(b);
  return s;
}

struct MetricReport {
  std::size_t samples = 0;
  MetricSection action;
  std::optional<MetricSection> verb;
  std::optional<MetricSection> noun;
  std::optional<double> recognition_top1;  // observed-clip classification, when an encoder is present

  nlohmann::json to_json() const {
    nlohmann::json j = {{"samples", samples}, {"action", action.to_json()}};
    if (verb) j["verb"] = verb->to_json();
    if (noun) j["noun"] = noun->to_json();
    if (recognition_top1) j["recognition_top1"] = *recognition_top1;
    return j;
  }

  /// Aligned plain-text table, one row per section.
  std::string table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(8) << "" << std::right << std::setw(10) << "top1" << std::setw(10) << "top5"
       << std::setw(14) << "cm_recall@5" << std::setw(10) << "cm_top1" << '\n';
    auto row = [&](const char* name, const MetricSection& s) {
      os << std::left << std::setw(8) << name << std::right << std::setw(10) << s.top1 << std::setw(10) << s.top5
         << std::setw(14) << s.cm_recall5 << std::setw(10) << s.cm_top1 << '\n';
    };
    row("action", action);
    if (verb) row("verb", *verb);
    if (noun) row("noun", *noun);
    if (recognition_top1) os << "recognition top1 on observed clips: " << *recognition_top1 << '\n';
    os << "samples: " << samples << '\n';
    return os.str();
  }

  /// section,class,count,hits@5,recall@5
  std::string per_class_csv() const {
    std::ostringstream os;
    os << "section,class,count,hits@5,recall@5\n" << std::setprecision(17);
    auto dump = [&](const char* name, const MetricSection& s) {
      for (std::size_t c = 0; c < s.per_class.count.size(); ++c) {
        if (s.per_class.count[c] == 0) continue;
        os << name << ',' << c << ',' << s.per_class.count[c] << ',' << s.per_class.hits[c] << ','
           << s.per_class.recall[c] << '\n';
      }
    };
    dump("action", action);
    if (verb) dump("verb", *verb);
    if (noun) dump("noun", *noun);
    return os.str();
  }
};

/// Full report from probability scores. Verb and noun sections are added
/// when the vocabulary defines (verb, noun) pairs.
inline MetricReport build_report(const EvalBatch& probs, const ActionVocabulary& vocab) {
  MetricReport r;
  r.samples = probs.size();
  r.action = metric_section(probs);
  if (vocab.has_pairs() && vocab.num_actions() > 0) {
    r.verb = metric_section(marginalize_batch(probs, vocab, Axis::Verb));
    r.noun = metric_section(marginalize_batch(probs, vocab, Axis::Noun));
  }
  return r;
}

}  // namespace arr
