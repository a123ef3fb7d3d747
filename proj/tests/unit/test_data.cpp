#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "arr/data/annotations.hpp"
#include "arr/data/corpus.hpp"
#include "arr/data/markov.hpp"
#include "arr/data/render.hpp"
#include "arr/data/sampling.hpp"

using namespace arr;

namespace {

AnnotationSet parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse_annotations(in);
}

AnnotationRecord seg(const std::string& video, double a, double b, int action) {
  AnnotationRecord r;
  r.video_id = video;
  r.start_s = a;
  r.stop_s = b;
  r.action_id = action;
  return r;
}

ActionVocabulary vocab_k(std::size_t K) { return ActionVocabulary::grid(K).with_unknown(); }

}  // namespace

// --- annotations -----------------------------------------------------------

TEST(Annotations, HeaderOnlyGivesEmptyResult) {
  const auto set = parse_string("video_id,start_s,stop_s,verb_id,noun_id\n");
  EXPECT_TRUE(set.records.empty());
  EXPECT_EQ(set.vocab.num_actions(), 0u);
  EXPECT_EQ(set.vocab.n_verbs, 0u);
}

TEST(Annotations, ThreeRowFixtureRoundTrips) {
  const auto set = parse_string(
      "video_id,start_s,stop_s,verb_id,noun_id,action_id\n"
      "P01,1.5,3.25,2,4,1\n"
      "P01,0.0,1.0,0,1,0\n"
      "P02,10,12.5,2,4,1\n");
  ASSERT_EQ(set.records.size(), 3u);
  const AnnotationRecord expected[] = {
      {"P01", 0.0, 1.0, 0, 1, 0}, {"P01", 1.5, 3.25, 2, 4, 1}, {"P02", 10.0, 12.5, 2, 4, 1}};
  for (int i = 0; i < 3; ++i) EXPECT_EQ(set.records[i], expected[i]) << i;
  EXPECT_EQ(set.vocab.n_verbs, 3u);
  EXPECT_EQ(set.vocab.n_nouns, 5u);
  ASSERT_EQ(set.vocab.num_actions(), 2u);
  EXPECT_EQ(set.vocab.actions[1], std::make_pair(2, 4));

  std::ostringstream out;
  write_annotations(out, set.records);
  const auto again = parse_string(out.str());
  EXPECT_EQ(again.records, set.records);
}

TEST(Annotations, DenseIdsFromPairsWhenColumnMissing) {
  const auto set = parse_string(
      "noun_id,verb_id,video_id,start_s,stop_s\n"
      "3,1,v,0,1\n"
      "0,2,v,1,2\n"
      "3,1,v,2,3\n");
  ASSERT_EQ(set.vocab.num_actions(), 2u);
  EXPECT_EQ(set.vocab.actions[0], std::make_pair(1, 3));
  EXPECT_EQ(set.records[0].action_id, 0);
  EXPECT_EQ(set.records[1].action_id, 1);
  EXPECT_EQ(set.records[2].action_id, 0);
}

TEST(Annotations, OverlappingSegmentsRetainedAndSorted) {
  const auto set = parse_string(
      "video_id,start_s,stop_s,verb_id,noun_id\n"
      "v,2,5,0,0\n"
      "v,1,4,1,0\n");
  ASSERT_EQ(set.records.size(), 2u);
  EXPECT_EQ(set.records[0].start_s, 1.0);
  EXPECT_EQ(set.records[1].start_s, 2.0);
}

TEST(Annotations, MalformedRowsReportLineNumber) {
  try {
    parse_string("video_id,start_s,stop_s,verb_id,noun_id\nv,0,1,0,0\nv,zero,1,0,0\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_string("video_id,start_s,stop_s,verb_id,noun_id\nv,2,2,0,0\n"), DataError);
  EXPECT_THROW(parse_string("video_id,start_s,stop_s,verb_id,noun_id\nv,0,1,0\n"), DataError);
  EXPECT_THROW(parse_string("video_id,start_s,verb_id,noun_id\n"), DataError);
  EXPECT_THROW(parse_string("video_id,start_s,stop_s,verb_id,noun_id,action_id\nv,0,1,0,0,1\n"), DataError);
}

// --- label_at / build_samples ---------------------------------------------

TEST(LabelAt, InsideSegmentIgnoresStrategy) {
  const auto vocab = vocab_k(10);
  const std::vector<AnnotationRecord> video = {seg("v", 0, 2, 3), seg("v", 2, 5, 7)};
  Rng rng(1);
  for (auto s : {GapStrategy::Unknown, GapStrategy::Random, GapStrategy::Previous})
    EXPECT_EQ(label_at(video, 3.0, s, vocab, rng), 7);
}

TEST(LabelAt, LatestStartingSegmentWinsOverlap) {
  const auto vocab = vocab_k(10);
  const std::vector<AnnotationRecord> video = {seg("v", 0, 10, 1), seg("v", 4, 6, 2)};
  Rng rng(1);
  EXPECT_EQ(label_at(video, 5.0, GapStrategy::Unknown, vocab, rng), 2);
  EXPECT_EQ(label_at(video, 7.0, GapStrategy::Unknown, vocab, rng), 1);
}

TEST(LabelAt, GapStrategies) {
  const auto vocab = vocab_k(10);
  const std::vector<AnnotationRecord> video = {seg("v", 1, 2, 4), seg("v", 5, 6, 8)};
  Rng rng(1);
  EXPECT_EQ(label_at(video, 3.0, GapStrategy::Unknown, vocab, rng), 10);
  EXPECT_EQ(label_at(video, 3.0, GapStrategy::Previous, vocab, rng), 4);
  EXPECT_EQ(label_at(video, 0.5, GapStrategy::Previous, vocab, rng), 10);  // leading gap
  EXPECT_EQ(label_at(video, 9.0, GapStrategy::Previous, vocab, rng), 8);
  std::set<int> seen;
  for (int i = 0; i < 500; ++i) {
    const int a = label_at(video, 3.0, GapStrategy::Random, vocab, rng);
    ASSERT_GE(a, 0);
    ASSERT_LT(a, 10);
    seen.insert(a);
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(BuildSamples, WindowsEndTauBeforeTarget) {
  const auto vocab = vocab_k(10);
  SamplingConfig cfg;
  cfg.tau_a = 1.0;
  cfg.T = 8;
  const std::vector<AnnotationRecord> recs = {seg("v", 0, 100, 1), seg("v", 100, 102, 5)};
  const auto set = build_samples(recs, cfg, vocab);
  EXPECT_EQ(set.skipped, 1u);  // the first segment has no history
  ASSERT_EQ(set.samples.size(), 1u);
  const auto& s = set.samples[0];
  ASSERT_EQ(s.windows.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(s.windows[i].start, 91.0 + i);
    EXPECT_DOUBLE_EQ(s.windows[i].stop, 92.0 + i);
  }
  EXPECT_DOUBLE_EQ(s.windows.back().stop, 100.0 - cfg.tau_a);
  ASSERT_EQ(s.labels.size(), 9u);
  EXPECT_EQ(s.labels.back(), 5);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(s.labels[i], 1);
}

TEST(BuildSamples, SingleWindowAndFrames) {
  const auto vocab = vocab_k(10);
  SamplingConfig cfg;
  cfg.tau_a = 2.0;
  cfg.T = 1;
  cfg.n = 4;
  cfg.fps = 10.0;
  const auto set = build_samples({seg("v", 10, 12, 3)}, cfg, vocab);
  ASSERT_EQ(set.samples.size(), 1u);
  const auto& s = set.samples[0];
  EXPECT_DOUBLE_EQ(s.windows[0].start, 6.0);
  EXPECT_DOUBLE_EQ(s.windows[0].stop, 8.0);
  // Frame times 6.25, 6.75, 7.25, 7.75 s at 10 fps.
  EXPECT_EQ(s.frame_indices[0], (std::vector<long>{62, 67, 72, 77}));
  EXPECT_EQ(s.labels, (std::vector<int>{10, 3}));
  EXPECT_EQ(s.visible, (std::vector<int>{-1}));
}

TEST(BuildSamples, TooEarlyTargetsAreSkipped) {
  const auto vocab = vocab_k(10);
  SamplingConfig cfg;  // tau_o + tau_a = 9 s
  const auto set = build_samples({seg("a", 8.5, 9, 1), seg("a", 9, 10, 2), seg("b", 3, 4, 1)}, cfg, vocab);
  EXPECT_EQ(set.skipped, 2u);
  ASSERT_EQ(set.samples.size(), 1u);
  EXPECT_EQ(set.samples[0].target_record.start_s, 9.0);
}

TEST(BuildSamples, WindowsTileObservationPropertyOverRandomTimelines) {
  const auto chain = gen_markov_chain(12, 4, 3);
  const auto vocab = ActionVocabulary::grid(12);
  TimelineConfig tl;
  tl.videos = 20;
  tl.seed = 9;
  const auto recs = gen_timelines(chain, vocab, tl);
  for (std::size_t T : {1, 4, 8}) {
    for (double tau : {0.5, 1.0, 1.7}) {
      for (auto strat : {GapStrategy::Unknown, GapStrategy::Random, GapStrategy::Previous}) {
        SamplingConfig cfg;
        cfg.T = T;
        cfg.tau_a = tau;
        cfg.gap_strategy = strat;
        const auto set = build_samples(recs, cfg, vocab.with_unknown());
        EXPECT_EQ(set.samples.size() + set.skipped, recs.size());
        for (const auto& s : set.samples) {
          const double ts = s.target_record.start_s;
          ASSERT_NEAR(s.windows.front().start, ts - tau - cfg.tau_o(), 1e-9);
          ASSERT_NEAR(s.windows.back().stop, ts - tau, 1e-9);
          for (std::size_t i = 1; i < s.windows.size(); ++i) {
            ASSERT_NEAR(s.windows[i].start, s.windows[i - 1].stop, 1e-9);
            ASSERT_LT(s.windows[i - 1].start, s.windows[i].start);
          }
          ASSERT_EQ(s.labels.size(), T + 1);
          for (std::size_t i = 0; i < T; ++i) {
            const int a = s.labels[i];
            ASSERT_LE(a, 12);
            if (strat == GapStrategy::Random) {
              ASSERT_LT(a, 12);
            }
            if (strat == GapStrategy::Previous && a == 12) {
              // Only allowed when nothing precedes this instant in the video.
              const double mid = s.windows[i].midpoint();
              for (const auto& r : recs)
                if (r.video_id == s.video_id) {
                  ASSERT_GT(r.stop_s, mid);
                }
            }
          }
        }
      }
    }
  }
}

TEST(BuildSamples, ReproducibleWithSeed) {
  const auto chain = gen_markov_chain(8, 3, 1);
  const auto vocab = ActionVocabulary::grid(8).with_unknown();
  TimelineConfig tl;
  tl.videos = 5;
  const auto recs = gen_timelines(chain, ActionVocabulary::grid(8), tl);
  SamplingConfig cfg;
  cfg.gap_strategy = GapStrategy::Random;
  cfg.seed = 4;
  const auto a = build_samples(recs, cfg, vocab);
  const auto b = build_samples(recs, cfg, vocab);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].labels, b.samples[i].labels);
}

// --- Markov chain ----------------------------------------------------------

TEST(Markov, RowsAreNormalizedAndSparse) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t K = 3 + seed % 20;
    const std::size_t s = 1 + seed % K;
    const auto c = gen_markov_chain(K, s, seed);
    EXPECT_NO_THROW(c.validate());
    for (std::size_t a = 0; a < K; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < K; ++b) sum += c(a, b);
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_EQ(c.nonzeros(a), s);
    }
  }
}

TEST(Markov, K20S5Seed0HasFiveSuccessorsPerRow) {
  const auto c = gen_markov_chain(20, 5, 0);
  for (std::size_t a = 0; a < 20; ++a) EXPECT_EQ(c.nonzeros(a), 5u);
}

TEST(Markov, SingleSuccessorChainIsDeterministic) {
  const auto c = gen_markov_chain(10, 1, 2);
  const auto seqs = gen_label_sequences(c, 9, 50, 3);
  for (const auto& s : seqs)
    for (std::size_t t = 1; t < s.size(); ++t)
      EXPECT_EQ(c(static_cast<std::size_t>(s[t - 1]), static_cast<std::size_t>(s[t])), 1.0);
}

TEST(Markov, SequencesAreReproducible) {
  const auto c = gen_markov_chain(20, 5, 0);
  EXPECT_EQ(gen_label_sequences(c, 9, 100, 7), gen_label_sequences(c, 9, 100, 7));
  EXPECT_NE(gen_label_sequences(c, 9, 100, 7), gen_label_sequences(c, 9, 100, 8));
  EXPECT_THROW(gen_label_sequences(c, 1, 10, 0), ConfigError);
}

TEST(Markov, EmpiricalBigramsConvergeToRows) {
  const auto c = gen_markov_chain(20, 5, 0);
  const auto seqs = gen_label_sequences(c, 9, 50000, 1);
  std::vector<double> counts(400, 0.0), totals(20, 0.0);
  for (const auto& s : seqs)
    for (std::size_t t = 1; t < s.size(); ++t) {
      counts[static_cast<std::size_t>(s[t - 1]) * 20 + static_cast<std::size_t>(s[t])] += 1.0;
      totals[static_cast<std::size_t>(s[t - 1])] += 1.0;
    }
  for (std::size_t a = 0; a < 20; ++a) {
    if (totals[a] < 1000) continue;
    double tv = 0.0;
    for (std::size_t b = 0; b < 20; ++b) tv += std::abs(counts[a * 20 + b] / totals[a] - c(a, b));
    EXPECT_LE(0.5 * tv, 0.02) << "row " << a;
  }
}

TEST(Markov, ChainJsonRoundTrip) {
  const auto c = gen_markov_chain(7, 3, 5);
  const auto d = MarkovChainSpec::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(d.transitions, c.transitions);
  EXPECT_EQ(d.K, 7u);
}

TEST(Markov, StationaryIsFixedPoint) {
  const auto c = gen_markov_chain(20, 5, 0);
  const auto pi = stationary_distribution(c);
  std::vector<double> next(20, 0.0);
  for (std::size_t a = 0; a < 20; ++a)
    for (std::size_t b = 0; b < 20; ++b) next[b] += pi[a] * c(a, b);
  for (std::size_t b = 0; b < 20; ++b) EXPECT_NEAR(next[b], pi[b], 1e-10);
}

TEST(Bayes, TopKCoveringSupportIsPerfect) {
  EXPECT_DOUBLE_EQ(bayes_topk_recall(gen_markov_chain(20, 5, 0), 5).class_mean, 1.0);
  EXPECT_DOUBLE_EQ(bayes_topk_recall(gen_markov_chain(20, 5, 0), 7).class_mean, 1.0);
  EXPECT_DOUBLE_EQ(bayes_topk_recall(gen_markov_chain(12, 1, 3), 1).class_mean, 1.0);
}

TEST(Bayes, MatchesMonteCarloOfOptimalPredictor) {
  const auto chain = gen_markov_chain(20, 8, 0);
  const auto exact = bayes_topk_recall(chain, 5);
  EXPECT_GT(exact.class_mean, 0.0);
  EXPECT_LT(exact.class_mean, 1.0);

  // Simulate one long trajectory and score the top-5-successor predictor.
  Rng rng(123);
  std::vector<double> hits(20, 0.0), count(20, 0.0);
  std::size_t state = 0;
  for (int burn = 0; burn < 1000; ++burn) state = sample_categorical(chain.row(state), 20, rng);
  for (int step = 0; step < 4000000; ++step) {
    const std::size_t next = sample_categorical(chain.row(state), 20, rng);
    const auto top = topk_indices(chain.row(state), 20, 5);
    count[next] += 1.0;
    if (std::find(top.begin(), top.end(), next) != top.end()) hits[next] += 1.0;
    state = next;
  }
  double mean = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < 20; ++c) {
    if (count[c] == 0) continue;
    mean += hits[c] / count[c];
    ++classes;
  }
  mean /= classes;
  EXPECT_NEAR(mean, exact.class_mean, 0.005);
}

TEST(Bayes, ReducibleChainWithAmbiguousOracleIsRejected) {
  MarkovChainSpec c;
  c.K = 4;
  c.successors_per_row = 2;
  c.transitions = {0.7, 0.3, 0, 0,  //
                   0.4, 0.6, 0, 0,  //
                   0, 0, 0.5, 0.5,  //
                   0, 0, 0.9, 0.1};
  EXPECT_THROW(bayes_topk_recall(c, 1), DataError);
  EXPECT_DOUBLE_EQ(bayes_topk_recall(c, 2).class_mean, 1.0);
}

// --- rendering -------------------------------------------------------------

TEST(Render, NoiselessClipsOfSameActionAreIdentical) {
  RenderConfig cfg;
  cfg.sigma = 0.0;
  const Clip a = render_clip(3, cfg, 1);
  const Clip b = render_clip(3, cfg, 2);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_NE(render_clip(4, cfg, 1).pixels, a.pixels);
}

TEST(Render, PixelsInUnitRangeAndDeterministic) {
  RenderConfig cfg;
  const Clip a = render_clip(5, cfg, 11);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.pixels, render_clip(5, cfg, 11).pixels);
  const Clip u = render_clip(-1, cfg, 11);
  EXPECT_NO_THROW(u.validate());
}

TEST(Render, TemplatesAreUncorrelated) {
  RenderConfig cfg;
  std::vector<std::vector<float>> t;
  for (int a = 0; a < 20; ++a) t.push_back(class_template(a, cfg));
  const double n = static_cast<double>(t[0].size());
  double max_corr = 0.0;
  for (int a = 0; a < 20; ++a)
    for (int b = a + 1; b < 20; ++b) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < t[a].size(); ++i) ma += t[a][i], mb += t[b][i];
      ma /= n, mb /= n;
      double sab = 0, saa = 0, sbb = 0;
      for (std::size_t i = 0; i < t[a].size(); ++i) {
        sab += (t[a][i] - ma) * (t[b][i] - mb);
        saa += (t[a][i] - ma) * (t[a][i] - ma);
        sbb += (t[b][i] - mb) * (t[b][i] - mb);
      }
      max_corr = std::max(max_corr, std::abs(sab / std::sqrt(saa * sbb)));
    }
  // 768 pixels: sampling correlation of independent patterns has sd ~0.036.
  EXPECT_LT(max_corr, 0.2);
}

TEST(Render, NearestTemplateClassifierIsNearlyPerfect) {
  RenderConfig cfg;
  cfg.sigma = 0.25;
  std::vector<std::vector<float>> t;
  for (int a = 0; a < 20; ++a) t.push_back(class_template(a, cfg));
  int correct = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const int truth = i % 20;
    const Clip c = render_clip(truth, cfg, derive_seed(77, static_cast<std::uint64_t>(i)));
    const auto f = c.frame(0);
    int best = -1;
    double best_d = 1e300;
    for (int a = 0; a < 20; ++a) {
      double d = 0;
      for (std::size_t p = 0; p < f.size(); ++p) d += (f[p] - t[a][p]) * (f[p] - t[a][p]);
      if (d < best_d) best_d = d, best = a;
    }
    correct += best == truth;
    ++total;
  }
  EXPECT_GT(static_cast<double>(correct) / total, 0.99);
}

// --- corpus ----------------------------------------------------------------

TEST(Corpus, SplitIsAboutTenPercentAndStable) {
  std::size_t val = 0;
  for (std::size_t i = 0; i < 20000; ++i) val += is_validation(3, i);
  EXPECT_NEAR(static_cast<double>(val) / 20000.0, 0.1, 0.01);
  EXPECT_EQ(is_validation(3, 17), is_validation(3, 17));
}

TEST(Corpus, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "arr_corpus_roundtrip";
  std::filesystem::remove_all(dir);
  const auto chain = gen_markov_chain(6, 2, 1);
  auto ds = dataset_from_sequences(gen_label_sequences(chain, 5, 30, 2), ActionVocabulary::grid(6));
  RenderConfig render;
  render.height = render.width = 8;
  ds.render = render;
  ds.noise_seed = 42;
  save_dataset(dir, ds);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.vocab, ds.vocab);
  ASSERT_TRUE(back.render.has_value());
  EXPECT_EQ(back.clip(3, 2).pixels, ds.clip(3, 2).pixels);
  std::filesystem::remove_all(dir);
}

TEST(Corpus, SubsetKeepsClipNoise) {
  const auto chain = gen_markov_chain(6, 2, 1);
  auto ds = dataset_from_sequences(gen_label_sequences(chain, 5, 30, 2), ActionVocabulary::grid(6));
  ds.render = RenderConfig{};
  const auto split = split_dataset(ds, 0);
  ASSERT_FALSE(split.val.labels.empty());
  const std::size_t src = split.val.source(0);
  EXPECT_EQ(split.val.clip(0, 1).pixels, ds.clip(src, 1).pixels);
  EXPECT_EQ(split.train.size() + split.val.size(), ds.size());
}
