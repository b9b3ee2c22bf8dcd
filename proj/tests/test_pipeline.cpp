#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "divrank/common.hpp"
#include "divrank/pipeline.hpp"

using namespace divrank;
using namespace divrank::pipeline;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_config() {
  return nlohmann::json::parse(R"({
    "seed": 3,
    "sampling": {"n_s": [40, 80], "n_holdout": 30},
    "vocabulary": {"size": 150},
    "ranker": {"rounds": 15, "seeds": [0, 1]},
    "evaluation": {"k_grid": [1, 3], "random_permutations": 20, "baseline_seeds": 3},
    "synth": {"n_domains": 5, "vocab_size": 150, "docs_per_domain": 300,
              "doc_length": [10, 20], "embedding_dim": 8, "embedding_contexts": 32}
  })");
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("divrank_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto path = dir / "config.json";
  write_file(path, j.dump(2));
  return path;
}

std::vector<StageOutcome> run_all(const PipelineConfig& c, Workspace& ws) {
  return {cmd_synth(c, ws), cmd_featurize(c, ws), cmd_correlate(c, ws), cmd_train_rank(c, ws),
          cmd_evaluate(c, ws), cmd_budget(c, ws)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DIVRANK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndValidation) {
  const auto c = PipelineConfig::from_json(nlohmann::json::object(), ".");
  EXPECT_EQ(c.n_s, (std::vector<int>{1000, 25000}));
  EXPECT_EQ(c.feature_sets.size(), 5u);
  EXPECT_NO_THROW(c.validate());
  auto bad = small_config();
  bad["sampling"]["n_s"] = "lots";
  EXPECT_THROW(PipelineConfig::from_json(bad, "."), ValidationError);
  bad = small_config();
  bad["evaluation"]["k_grid"] = nlohmann::json::array({0});
  EXPECT_THROW(PipelineConfig::from_json(bad, ".").validate(), ValidationError);
}

TEST(Config, SynthInheritsSeedAndPathsResolve) {
  auto j = small_config();
  j["performance"] = {{"path", "perf.csv"}};
  const auto c = PipelineConfig::from_json(j, "/data/run");
  ASSERT_TRUE(c.synth.has_value());
  EXPECT_EQ(c.synth->seed, 3u);
  EXPECT_EQ(c.performance_path->string(), "/data/run/perf.csv");
}

TEST(Workspace, RejectsEscapes) {
  Workspace ws(fresh_dir("escape"));
  EXPECT_THROW(ws.resolve("../outside.txt"), std::logic_error);
  EXPECT_THROW(ws.resolve("a/../../b"), std::logic_error);
  EXPECT_THROW(ws.resolve("/etc/passwd"), std::logic_error);
  EXPECT_NO_THROW(ws.resolve("a/../b"));
}

TEST(Pipeline, MissingUpstreamNamesStage) {
  const auto dir = fresh_dir("missing");
  Workspace ws(dir / "ws");
  const auto c = PipelineConfig::from_json(small_config(), dir);
  try {
    cmd_train_rank(c, ws);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("featurize"), std::string::npos);
  }
}

TEST(Pipeline, EndToEndCachingAndTamper) {
  const auto dir = fresh_dir("e2e");
  Workspace ws(dir / "ws");
  const auto c = PipelineConfig::from_json(small_config(), dir);
  for (const auto& o : run_all(c, ws)) EXPECT_FALSE(o.cache_hit) << o.stage;

  const auto report = nlohmann::json::parse(ws.read("report/report.json"));
  for (const auto& fs_name : c.feature_sets) {
    EXPECT_TRUE(report["ndcg"].contains(fs_name)) << fs_name;
  }
  EXPECT_TRUE(ws.exists("budget/savings.json"));
  EXPECT_TRUE(ws.exists("correlations.csv"));
  EXPECT_EQ(ws.manifest()["stages"]["train-rank"]["models"].get<int>(), 5 * 2 * 5 * 2);

  // Nothing changed: every stage is a cache hit, artifacts untouched.
  const auto before = ws.read("report/report.json");
  Workspace again(dir / "ws");
  for (const auto& o : run_all(c, again)) EXPECT_TRUE(o.cache_hit) << o.stage;
  EXPECT_EQ(again.read("report/report.json"), before);

  // Tampered feature cache.
  {
    std::ofstream out(ws.resolve("features/features.n40.csv"), std::ios::app);
    out << "\n";
  }
  Workspace tampered(dir / "ws");
  try {
    cmd_train_rank(c, tampered);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("featurize"), std::string::npos) << e.what();
  }
  // Featurize notices the mismatch and rebuilds.
  EXPECT_FALSE(cmd_featurize(c, tampered).cache_hit);
  EXPECT_NO_THROW(cmd_train_rank(c, tampered));
}

TEST(Pipeline, ReportsAreByteIdenticalAcrossWorkspaces) {
  const auto dir = fresh_dir("determinism");
  const auto c = PipelineConfig::from_json(small_config(), dir);
  Workspace a(dir / "a"), b(dir / "b");
  run_all(c, a);
  auto c2 = c;
  c2.jobs = 2;
  run_all(c2, b);
  EXPECT_EQ(a.read("report/report.json"), b.read("report/report.json"));
  EXPECT_EQ(a.read("rankings.csv"), b.read("rankings.csv"));
}

TEST(Pipeline, IngestFromFiles) {
  const auto dir = fresh_dir("ingest");
  const auto sc = PipelineConfig::from_json(small_config(), dir);
  Workspace source(dir / "source");
  cmd_synth(sc, source);

  auto j = small_config();
  j.erase("synth");
  j["data"]["domains"] = nlohmann::json::array();
  for (int d = 0; d < 5; ++d) {
    const auto id = synth::domain_name(d);
    j["data"]["domains"].push_back({{"id", id}, {"path", "source/raw/" + id + ".jsonl"}});
  }
  j["embeddings"] = {{"path", "source/embeddings.txt"}};
  j["performance"] = {{"path", "source/performance.csv"}};
  const auto c = PipelineConfig::from_json(j, dir);
  Workspace ws(dir / "files");
  EXPECT_FALSE(cmd_ingest(c, ws).cache_hit);
  EXPECT_TRUE(cmd_ingest(c, ws).cache_hit);
  cmd_featurize(c, ws);
  cmd_train_rank(c, ws);
  cmd_evaluate(c, ws);
  const auto index = nlohmann::json::parse(ws.read("corpora/index.json"));
  EXPECT_EQ(index["domains"].size(), 5u);
  EXPECT_TRUE(ws.exists("report/report.json"));
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli");
  const auto good = write_config(dir, small_config());
  const auto ws = (dir / "ws").string();
  EXPECT_EQ(run_cli("synth --config " + good.string() + " --workspace " + ws), 0);
  EXPECT_EQ(run_cli("featurize --config " + good.string() + " --workspace " + ws), 0);
  // Stale upstream artifact.
  EXPECT_EQ(run_cli("evaluate --config " + good.string() + " --workspace " + ws), 1);

  write_file(dir / "bad.json", "{\"sampling\": {\"n_s\": []}}");
  EXPECT_EQ(run_cli("ingest --config " + (dir / "bad.json").string() + " --workspace " + ws), 2);
  write_file(dir / "broken.json", "{not json");
  EXPECT_EQ(run_cli("ingest --config " + (dir / "broken.json").string() + " --workspace " + ws), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("featurize --config " + good.string() + " --workspace " + ws + " --jobs 2"), 0);
}
