#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divrank/features.hpp"

namespace divrank {

struct PerformanceRecord {
  std::string source_id;
  std::string target_id;
  int n_s = 0;
  double macro_f1 = 0.0;
  double train_runtime_hours = 0.0;
};

// CSV "source,target,n_s,macro_f1,train_runtime_hours".
std::vector<PerformanceRecord> read_performance_csv(std::string_view text,
                                                    const std::string& source_name);
std::string write_performance_csv(const std::vector<PerformanceRecord>& records);

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees, squared-error loss.

struct GbtHyperparams {
  int rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_leaf = 1;
  // Fraction of rows drawn (without replacement) per round; 1 = full sample.
  double subsample = 1.0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

// Rows with x[feature] <= threshold descend left.
struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  int depth() const;
};

class GbtModel {
 public:
  GbtModel() = default;
  GbtModel(std::vector<std::string> feature_schema, GbtHyperparams hyperparams, std::uint64_t seed,
           double base_prediction, std::vector<RegressionTree> trees);

  // base + learning_rate * sum of tree outputs.
  double predict(std::span<const double> x) const;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const std::vector<std::string>& feature_schema() const { return feature_schema_; }
  const GbtHyperparams& hyperparams() const { return hyperparams_; }
  double base_prediction() const { return base_prediction_; }
  double learning_rate() const { return hyperparams_.learning_rate; }
  std::uint64_t seed() const { return seed_; }
  std::string schema_hash() const;

  std::string serialize() const;
  static GbtModel parse(std::string_view text);

 private:
  std::vector<std::string> feature_schema_;
  GbtHyperparams hyperparams_;
  std::uint64_t seed_ = 0;
  double base_prediction_ = 0.0;
  std::vector<RegressionTree> trees_;
};

struct TrainingRow {
  std::vector<double> features;
  double target = 0.0;
};

// Each round fits one exact-greedy tree to the current residuals. Rows are
// sorted internally, so the result does not depend on input order. The seed
// permutes the feature scan order (deciding exact gain ties) and drives row
// subsampling. `loss_history`, when given, receives the training MSE after
// every round.
GbtModel train_gbt(std::vector<TrainingRow> rows, std::vector<std::string> feature_schema,
                   const GbtHyperparams& hyperparams, std::uint64_t seed,
                   std::vector<double>* loss_history = nullptr);

// ---------------------------------------------------------------------------
// Leave-one-target-out protocol

struct LabeledPair {
  std::string source_id;
  std::string target_id;
  int n_s = 0;
  std::array<double, kFeatureCount> features{};
  double macro_f1 = 0.0;
  double train_runtime_hours = 0.0;
};

// Inner join on (source, target, n_s). Any feature row without a performance
// record, or vice versa, is a join gap and raises an error listing them.
std::vector<LabeledPair> join_rows(const std::vector<PairFeatures>& features,
                                   const std::vector<PerformanceRecord>& performances);

struct LotoSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
};

// test = rows whose target is held out; train = everything else, including
// rows where the held-out domain is the source.
LotoSplit loto_split(const std::vector<LabeledPair>& rows, const std::string& held_out_target);

struct RankedSources {
  std::string target_id;
  int n_s = 0;
  std::string feature_set;
  std::uint64_t seed = 0;
  // Descending by score; equal scores ordered by source id.
  std::vector<std::pair<std::string, double>> ordering;
};

RankedSources rank_sources(const GbtModel& model, const std::vector<LabeledPair>& candidates,
                           const FeatureSet& set, std::uint64_t seed);

struct ProtocolCell {
  std::string target_id;
  int n_s = 0;
  std::string feature_set;
  std::uint64_t seed = 0;
  GbtModel model;
  RankedSources ranking;
};

struct ProtocolOptions {
  std::vector<FeatureSet> feature_sets;
  std::vector<int> n_s_settings;
  std::vector<std::uint64_t> seeds;
  GbtHyperparams hyperparams;
  unsigned jobs = 1;
};

// One model per (target, n_s, feature set, seed), trained on the rows of that
// n_s setting with the target held out. Cells are ordered by target, n_s,
// feature set (as given) and seed (as given).
std::vector<ProtocolCell> run_protocol(const std::vector<LabeledPair>& rows,
                                       const ProtocolOptions& options);

// CSV "target,n_s,feature_set,seed,rank,source,predicted_score".
std::string write_rankings_csv(const std::vector<RankedSources>& rankings);
std::vector<RankedSources> read_rankings_csv(std::string_view text, const std::string& source_name);

}  // namespace divrank
