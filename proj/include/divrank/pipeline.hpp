#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/measures.hpp"
#include "divrank/ranker.hpp"
#include "divrank/synth.hpp"
#include "json.hpp"

namespace divrank::pipeline {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

// An upstream artifact is missing, modified, or was never produced. The
// message names the stage to rerun.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VocabularyMode { global, per_pair };

struct DomainSource {
  std::string id;
  std::filesystem::path path;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  unsigned jobs = 1;

  std::vector<DomainSource> domains;
  RatingScheme rating_scheme = RatingScheme::literal;

  std::vector<int> n_s = {1000, 25000};
  std::size_t n_holdout = 2500;

  std::size_t vocab_size = 10000;
  VocabularyMode vocab_mode = VocabularyMode::global;

  std::optional<std::filesystem::path> embeddings_path;
  double smoothing_a = kDefaultSmoothing;

  measures::MeasureConfig measures;

  GbtHyperparams gbt;
  std::vector<std::uint64_t> ranker_seeds = {0, 1, 2, 3, 4};
  std::vector<std::string> feature_sets = {"ALL", "DIV_TD_BE", "DIV_TD", "DIV_BE",
                                           "H_PLUS_MOMENTS"};

  std::vector<std::size_t> k_grid = {1, 3, 5, 10};
  std::size_t random_permutations = 100;
  std::size_t baseline_seeds = 5;
  std::string budget_feature_set = "ALL";

  std::optional<std::filesystem::path> performance_path;

  std::optional<synth::SynthConfig> synth;

  void validate() const;
  // Relative paths in the document resolve against base_dir.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::ordered_json to_json() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  // Absolute path of a workspace-relative location; rejects anything that
  // would land outside the root.
  std::filesystem::path resolve(const std::string& relative) const;
  std::string read(const std::string& relative) const;
  bool exists(const std::string& relative) const;

  nlohmann::ordered_json& manifest() { return manifest_; }
  void save_manifest();

 private:
  std::filesystem::path root_;
  nlohmann::ordered_json manifest_;
};

struct StageOutcome {
  std::string stage;
  bool cache_hit = false;
  std::vector<std::string> notes;
};

StageOutcome cmd_synth(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_ingest(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_featurize(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_correlate(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_train_rank(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_evaluate(const PipelineConfig& config, Workspace& ws);
StageOutcome cmd_budget(const PipelineConfig& config, Workspace& ws);

// Artifacts consumed downstream, loaded after verifying the manifest.
std::vector<PairFeatures> load_features(Workspace& ws);
std::vector<PerformanceRecord> load_performance(const PipelineConfig& config, Workspace& ws);

}  // namespace divrank::pipeline
