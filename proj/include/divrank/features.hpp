#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/embeddings.hpp"
#include "divrank/measures.hpp"

namespace divrank {

// Closed feature schema. Bump kFeatureSchemaVersion whenever a name is added,
// removed or reordered; caches keyed on the old version become stale.
inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr std::size_t kFeatureCount = 24;

enum class Feature : std::size_t {
  td_cosine_distance,
  td_l1_distance,
  td_l2_distance,
  renyi_divergence,
  js_divergence,
  wasserstein_distance,
  bhattacharyya_coefficient,
  be_cosine_distance,
  be_l1_distance,
  be_l2_distance,
  entropy_src,
  entropy_tgt,
  renyi_entropy_src,
  renyi_entropy_tgt,
  simpson_index_src,
  simpson_index_tgt,
  mean_src,
  mean_tgt,
  variance_src,
  variance_tgt,
  skewness_src,
  skewness_tgt,
  kurtosis_src,
  kurtosis_tgt,
};
static_assert(static_cast<std::size_t>(Feature::kurtosis_tgt) + 1 == kFeatureCount);

const std::array<std::string_view, kFeatureCount>& feature_names();
std::string_view feature_name(Feature f);
Feature parse_feature(std::string_view name);
// Hash of the ordered name list plus schema version.
const std::string& feature_schema_hash();

// The five feature sets compared in the ranking study.
enum class StandardSet { ALL, DIV_TD_BE, DIV_TD, DIV_BE, H_PLUS_MOMENTS };

struct FeatureSet {
  std::string name;
  std::vector<Feature> members;  // schema order
};

FeatureSet standard_feature_set(StandardSet set);
const std::vector<FeatureSet>& standard_feature_sets();
FeatureSet feature_set_by_name(std::string_view name);
// Custom set; unknown member names are rejected.
FeatureSet make_feature_set(std::string name, const std::vector<std::string>& member_names);

// One domain split rendered both ways, against one vocabulary and one table.
struct DomainRepresentation {
  std::string domain_id;
  Split split = Split::train;
  int n_s = 0;
  TermDistribution td;
  DomainEmbedding be;
};

struct Provenance {
  std::string vocab_hash;
  std::string table_hash;
  std::string config_hash;
  Split source_split = Split::train;
  Split target_split = Split::test;
};

struct PairFeatures {
  std::string source_id;
  std::string target_id;
  int n_s = 0;
  std::array<double, kFeatureCount> values{};
  Provenance provenance;

  double value(Feature f) const { return values[static_cast<std::size_t>(f)]; }
};

std::string measure_config_hash(const measures::MeasureConfig& config);

// All between-domain measures on (source, target) plus the within-domain
// statistics of each side. Rejects operands built on different vocabularies
// or embedding tables.
PairFeatures featurize_pair(const DomainRepresentation& source, const DomainRepresentation& target,
                            const measures::MeasureConfig& config);

// Same as featurize_pair, but the term distributions are rebuilt against a
// vocabulary drawn from just these two corpora.
PairFeatures featurize_pair_local_vocab(const DomainCorpus& source_corpus,
                                        const DomainCorpus& target_corpus,
                                        const DomainRepresentation& source,
                                        const DomainRepresentation& target,
                                        std::size_t vocab_size,
                                        const measures::MeasureConfig& config);

// Projection onto the set's members, in schema order.
std::vector<std::pair<std::string_view, double>> select_features(const PairFeatures& pf,
                                                                 const FeatureSet& set);
std::vector<double> select_values(const PairFeatures& pf, const FeatureSet& set);

struct RepresentationKey {
  std::string domain_id;
  Split split;
  int n_s;
  auto operator<=>(const RepresentationKey&) const = default;
};

using RepresentationMap = std::map<RepresentationKey, DomainRepresentation>;

// Every ordered (source, target) pair with source != target for every
// sample-size setting: source train split against target test split. Rows are
// ordered by (source, target, n_s).
std::vector<PairFeatures> feature_matrix(const std::vector<std::string>& domains,
                                         const std::vector<int>& n_s_settings,
                                         const RepresentationMap& representations,
                                         const measures::MeasureConfig& config, unsigned jobs = 1);

// Cache format: header "source,target,n_s,<names>", values as %.17g.
std::string write_feature_csv(const std::vector<PairFeatures>& rows);
std::vector<PairFeatures> read_feature_csv(std::string_view text, const std::string& source_name);

}  // namespace divrank
