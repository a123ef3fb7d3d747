#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "arr/cli/app.hpp"

namespace arr::cli {
namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("arr_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "arr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::vector<std::string> small_model() const {
    return {"--dim", "16", "--depth", "1", "--heads", "2", "--enc-dim", "16", "--enc-depth", "1", "--batch", "32",
            "--lr", "3e-3"};
  }

  int train(std::vector<std::string> args) {
    args.insert(args.begin(), "train");
    const auto extra = small_model();
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  }

  fs::path root_;
  std::ostringstream out_, err_;
};

TEST(Hash, MatchesGitHashObject) {
  // Values printed by `git hash-object` for the same contents.
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST_F(CliTest, GenDataWritesRequestedCorpus) {
  ASSERT_EQ(cli({"gen-data", "--k", "20", "--succ", "5", "--num", "50000", "--len", "9", "--seed", "0", "--out", path("d")}),
            0)
      << err_.str();
  const auto ds = load_dataset(path("d"));
  EXPECT_EQ(ds.size(), 50000u);
  EXPECT_EQ(ds.labels.front().size(), 9u);
  const auto chain = MarkovChainSpec::from_json(read_json(path("d") + "/chain.json"));
  EXPECT_EQ(chain.K, 20u);
  EXPECT_EQ(chain.successors_per_row, 5u);
  const auto m = read_json(path("d") + "/manifest.json");
  EXPECT_EQ(m.at("command"), "gen-data");
  EXPECT_EQ(m.at("outputs").at("sequences.csv"), git_blob_hash_file(path("d") + "/sequences.csv"));
}

TEST_F(CliTest, GenDataIsByteIdenticalAcrossRuns) {
  const std::vector<std::string> flags{"--k", "12", "--succ", "3", "--num", "300", "--len", "6", "--seed", "7", "--render"};
  auto a = flags, b = flags;
  a.insert(a.begin(), {"gen-data", "--out", path("a")});
  b.insert(b.begin(), {"gen-data", "--out", path("b")});
  ASSERT_EQ(cli(a), 0);
  ASSERT_EQ(cli(b), 0);
  EXPECT_EQ(hash_tree(path("a")), hash_tree(path("b")));
}

TEST_F(CliTest, GenDataRejectsBadInput) {
  EXPECT_EQ(cli({"gen-data", "--len", "1", "--out", path("x")}), kConfigError);
  EXPECT_NE(err_.str().find("--len"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("x")));
  ASSERT_EQ(cli({"gen-data", "--num", "10", "--out", path("d")}), 0);
  EXPECT_EQ(cli({"gen-data", "--num", "10", "--out", path("d")}), kConfigError);
  EXPECT_EQ(cli({"gen-data", "--num", "20", "--out", path("d"), "--force"}), 0);
  EXPECT_EQ(load_dataset(path("d")).size(), 20u);
}

TEST_F(CliTest, ExitCodesSeparateConfigFromRuntime) {
  EXPECT_EQ(cli({"no-such-command"}), kConfigError);
  EXPECT_EQ(cli({"train", "--epochs", "many"}), kConfigError);
  EXPECT_EQ(cli({"--help"}), kOk);
  ASSERT_EQ(cli({"gen-data", "--num", "20", "--len", "4", "--out", path("d")}), 0);
  EXPECT_EQ(cli({"sweep", "--data", path("d"), "--param", "depth", "--values", "1"}), kConfigError);
  // A corrupt annotation file is a runtime failure.
  fs::create_directories(path("bad"));
  write_json(path("bad") + "/corpus.json", {{"kind", "timelines"}, {"vocabulary", ActionVocabulary::grid(4).to_json()}});
  write_text(path("bad") + "/annotations.csv", "video_id,start_s,stop_s,verb_id,noun_id\nv,1,oops,0,0\n");
  EXPECT_EQ(train({"--data", path("bad"), "--epochs", "0", "--out", path("r")}), kRuntimeError);
  EXPECT_NE(err_.str().find("line 2"), std::string::npos);
}

TEST_F(CliTest, DeterministicChainReachesPerfectTop1) {
  ASSERT_EQ(cli({"gen-data", "--k", "10", "--succ", "1", "--num", "600", "--len", "7", "--out", path("d")}), 0);
  ASSERT_EQ(train({"--data", path("d"), "--epochs", "10", "--warmup", "1", "--cosine", "9", "--out", path("r")}), 0)
      << err_.str();
  const auto m = read_json(path("r") + "/metrics.json");
  EXPECT_EQ(m.at("val").at("action").at("top1").get<double>(), 1.0);
  for (const char* f : {"manifest.json", "epoch_log.csv", "best.ckpt", "final.ckpt", "metrics.json", "report.txt"})
    EXPECT_TRUE(fs::exists(path("r") + "/" + f)) << f;
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
  ASSERT_EQ(cli({"gen-data", "--num", "40", "--len", "4", "--out", path("d")}), 0);
  write_json(path("cfg.json"), {{"epochs", 1}, {"warmup", 0}, {"cosine", 1}, {"lr", 0.002}, {"data", path("d")}});
  ASSERT_EQ(train({"--config", path("cfg.json"), "--epochs", "2", "--cosine", "2", "--out", path("r")}), 0) << err_.str();
  const auto cfg = read_json(path("r") + "/manifest.json").at("config");
  EXPECT_EQ(cfg.at("epochs"), 2);
  EXPECT_EQ(cfg.at("warmup"), 0);
  EXPECT_EQ(cfg.at("lr"), 3e-3);  // small_model() passes --lr explicitly
  write_json(path("typo.json"), {{"epochz", 3}});
  EXPECT_EQ(train({"--config", path("typo.json"), "--data", path("d")}), kConfigError);
}

TEST_F(CliTest, DefaultRunDirectoryIsTimestampedUnderOutputRoot) {
  ASSERT_EQ(cli({"gen-data", "--num", "20", "--len", "4", "--out", path("d")}), 0);
  ::setenv("ARR_OUTPUT_ROOT", path("runs").c_str(), 1);
  const int code = train({"--data", path("d"), "--epochs", "0"});
  ::unsetenv("ARR_OUTPUT_ROOT");
  ASSERT_EQ(code, 0) << err_.str();
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(path("runs"))) dirs.push_back(e.path());
  ASSERT_EQ(dirs.size(), 1u);
  EXPECT_EQ(dirs[0].filename().string().rfind("train-", 0), 0u);
  EXPECT_TRUE(fs::exists(dirs[0] / "manifest.json"));
}

TEST_F(CliTest, ZeroEpochsOnlyEvaluates) {
  ASSERT_EQ(cli({"gen-data", "--num", "60", "--len", "4", "--out", path("d")}), 0);
  ASSERT_EQ(train({"--data", path("d"), "--epochs", "0", "--out", path("r")}), 0);
  EXPECT_EQ(read_json(path("r") + "/manifest.json").at("steps"), 0);
  EXPECT_EQ(read_file(path("r") + "/best.ckpt"), read_file(path("r") + "/final.ckpt"));
}

TEST_F(CliTest, CommandsDoNotModifyTheirInputs) {
  ASSERT_EQ(cli({"gen-data", "--num", "80", "--len", "4", "--render", "--height", "8", "--width", "8", "--channels",
                 "1", "--frames", "2", "--out", path("d")}),
            0);
  const auto before = hash_tree(path("d"), {});
  ASSERT_EQ(train({"--data", path("d"), "--mode", "end-to-end", "--patch", "4", "--epochs", "1", "--warmup", "0",
                   "--cosine", "1", "--out", path("r")}),
            0)
      << err_.str();
  ASSERT_EQ(cli({"eval", "--data", path("d"), "--checkpoint", path("r") + "/final.ckpt", "--out", path("e")}), 0);
  EXPECT_EQ(hash_tree(path("d"), {}), before);
}

TEST_F(CliTest, EvalIsRepeatableAndHasVerbNounSections) {
  ASSERT_EQ(cli({"gen-data", "--k", "20", "--succ", "20", "--num", "20000", "--len", "3", "--out", path("d")}), 0);
  ASSERT_EQ(train({"--data", path("d"), "--epochs", "0", "--out", path("r")}), 0);
  ASSERT_EQ(cli({"eval", "--data", path("d"), "--checkpoint", path("r") + "/final.ckpt", "--out", path("e1")}), 0);
  ASSERT_EQ(cli({"eval", "--data", path("d"), "--checkpoint", path("r") + "/final.ckpt", "--out", path("e2")}), 0);
  EXPECT_EQ(read_file(path("e1") + "/report.json"), read_file(path("e2") + "/report.json"));
  const auto rep = read_json(path("e1") + "/report.json");
  EXPECT_TRUE(rep.contains("verb"));
  EXPECT_TRUE(rep.contains("noun"));
  // An untrained checkpoint sits at chance level: each sample is a hit with
  // the transition probability of the class the model happens to rank
  // first, which averages to 1/K over random chains.
  auto model = ArrModel<float>::from_checkpoint(Checkpoint::load(path("r") + "/final.ckpt"));
  const auto chain = MarkovChainSpec::from_json(read_json(path("d") + "/chain.json"));
  const auto corpus = load_corpus(path("d"), {});
  const auto val = split_dataset(corpus.all, corpus.split_seed).val;
  const auto pred = predict(model, val);
  double expected = 0.0, var = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto row = pred.anticipation.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row, row + val.classes()) - row);
    const double p = chain(static_cast<std::size_t>(val.labels[i][val.T() - 1]), best);
    expected += p;
    var += p * (1 - p);
  }
  const double n = static_cast<double>(val.size());
  EXPECT_EQ(rep.at("samples").get<double>(), n);
  EXPECT_NEAR(rep.at("action").at("top1").get<double>(), expected / n, 3 * std::sqrt(var) / n);
  EXPECT_NEAR(expected / n, 0.05, 0.03);
}

TEST_F(CliTest, IncompatibleCheckpointListsMismatches) {
  ASSERT_EQ(cli({"gen-data", "--k", "6", "--num", "40", "--len", "4", "--out", path("d6")}), 0);
  ASSERT_EQ(cli({"gen-data", "--k", "8", "--num", "40", "--len", "4", "--out", path("d8")}), 0);
  ASSERT_EQ(train({"--data", path("d6"), "--epochs", "0", "--out", path("r")}), 0);
  EXPECT_NE(cli({"eval", "--data", path("d8"), "--checkpoint", path("r") + "/final.ckpt"}), 0);
  EXPECT_NE(err_.str().find("classes"), std::string::npos);
  EXPECT_NE(train({"--data", path("d8"), "--epochs", "0", "--init", path("r") + "/final.ckpt"}), 0);
  EXPECT_NE(err_.str().find("nap_head.proj.weight"), std::string::npos);
}

TEST_F(CliTest, PretrainThenFineTuneWithAndWithoutInitDecoder) {
  ASSERT_EQ(cli({"gen-data", "--k", "6", "--succ", "2", "--num", "120", "--len", "5", "--render", "--height", "8",
                 "--width", "8", "--channels", "1", "--frames", "2", "--out", path("d")}),
            0);
  const std::vector<std::string> common{"--patch", "4", "--epochs", "2", "--warmup", "0", "--cosine", "2"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), common.begin(), common.end());
    return train(args);
  };
  ASSERT_EQ(with({"--data", path("d"), "--mode", "pretrain", "--out", path("p")}), 0) << err_.str();
  const auto pm = read_json(path("p") + "/metrics.json");
  EXPECT_LT(pm.at("final_loss").get<double>(), pm.at("initial_loss").get<double>());
  EXPECT_TRUE(Checkpoint::load(path("p") + "/final.ckpt").metadata.at("pretrained_decoder").get<bool>());
  ASSERT_EQ(with({"--data", path("d"), "--mode", "end-to-end", "--init-decoder", path("p") + "/final.ckpt", "--out",
                  path("a")}),
            0)
      << err_.str();
  ASSERT_EQ(with({"--data", path("d"), "--mode", "end-to-end", "--out", path("b")}), 0);
  EXPECT_TRUE(read_json(path("a") + "/metrics.json").at("pretrained_decoder").get<bool>());
  EXPECT_FALSE(read_json(path("b") + "/metrics.json").at("pretrained_decoder").get<bool>());
  ASSERT_EQ(cli({"compare", path("a"), path("b")}), 0);
  EXPECT_NE(out_.str().find("d cm_recall@5"), std::string::npos);
}

TEST_F(CliTest, SweepLayouts) {
  ASSERT_EQ(cli({"gen-data", "--timelines", "--k", "6", "--succ", "2", "--videos", "8", "--actions-per-video", "30",
                 "--render", "--height", "8", "--width", "8", "--channels", "1", "--frames", "4", "--out", path("tl")}),
            0);
  const std::vector<std::string> quick{"--epochs", "1", "--warmup", "0", "--cosine", "1"};
  auto sweep_cmd = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "sweep");
    args.insert(args.end(), quick.begin(), quick.end());
    const auto extra = small_model();
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };
  ASSERT_EQ(sweep_cmd({"--data", path("tl"), "--param", "T", "--values", "4,6,8,10,12", "--out", path("s1")}), 0)
      << err_.str();
  EXPECT_EQ(out_.str().substr(out_.str().find('\n') + 1, 29), "Length | 4 | 6 | 8 | 10 | 12\n");
  ASSERT_EQ(sweep_cmd({"--data", path("tl"), "--param", "gap_strategy", "--values", "unknown,random,previous", "--out",
                       path("s2")}),
            0);
  EXPECT_EQ(read_json(path("s2") + "/manifest.json").at("steps").get<std::size_t>() > 0, true);
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(path("s2"))) runs += e.is_directory();
  EXPECT_EQ(runs, 3u);
  ASSERT_EQ(sweep_cmd({"--data", path("tl"), "--param", "n", "--values", "1,2,4", "--mode", "end-to-end", "--patch",
                       "4", "--out", path("s3")}),
            0)
      << err_.str();
  EXPECT_NE(read_file(path("s3") + "/table.txt").find("Num_frames | 1 | 2 | 4"), std::string::npos);
}

TEST_F(CliTest, RerunReproducesAndDetectsDrift) {
  ASSERT_EQ(cli({"gen-data", "--num", "100", "--len", "5", "--out", path("d")}), 0);
  ASSERT_EQ(train({"--data", path("d"), "--dtype", "double", "--epochs", "2", "--warmup", "0", "--cosine", "2", "--out",
                   path("r")}),
            0);
  ASSERT_EQ(cli({"rerun", path("r") + "/manifest.json", "--out", path("r2")}), 0) << err_.str();
  EXPECT_EQ(read_file(path("r") + "/metrics.json"), read_file(path("r2") + "/metrics.json"));
  EXPECT_EQ(read_file(path("r") + "/final.ckpt"), read_file(path("r2") + "/final.ckpt"));
  // A tampered record makes the rerun report the difference.
  auto m = read_json(path("r") + "/manifest.json");
  m["outputs"]["metrics.json"] = git_blob_hash("something else");
  write_json(path("r") + "/manifest.json", m);
  EXPECT_EQ(cli({"rerun", path("r") + "/manifest.json", "--out", path("r3")}), kRuntimeError);
  EXPECT_NE(err_.str().find("metrics.json"), std::string::npos);
  // gen-data reruns reproduce the corpus.
  ASSERT_EQ(cli({"rerun", path("d") + "/manifest.json", "--out", path("d2")}), 0) << err_.str();
}

}  // namespace
}  // namespace arr::cli
