#include "divrank/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "divrank/common.hpp"

namespace divrank {

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "td_cosine_distance",
      "td_l1_distance",
      "td_l2_distance",
      "renyi_divergence",
      "js_divergence",
      "wasserstein_distance",
      "bhattacharyya_coefficient",
      "be_cosine_distance",
      "be_l1_distance",
      "be_l2_distance",
      "entropy_src",
      "entropy_tgt",
      "renyi_entropy_src",
      "renyi_entropy_tgt",
      "simpson_index_src",
      "simpson_index_tgt",
      "mean_src",
      "mean_tgt",
      "variance_src",
      "variance_tgt",
      "skewness_src",
      "skewness_tgt",
      "kurtosis_src",
      "kurtosis_tgt",
  };
  return names;
}

std::string_view feature_name(Feature f) { return feature_names()[static_cast<std::size_t>(f)]; }

Feature parse_feature(std::string_view name) {
  const auto& names = feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ValidationError("unknown feature '" + std::string(name) + "'");
  }
  return static_cast<Feature>(it - names.begin());
}

const std::string& feature_schema_hash() {
  static const std::string hash = [] {
    std::string text = "schema_version=" + std::to_string(kFeatureSchemaVersion) + "\n";
    for (const auto name : feature_names()) {
      text += name;
      text += '\n';
    }
    return sha256_hex(text);
  }();
  return hash;
}

namespace {

std::vector<Feature> range(Feature first, Feature last) {
  std::vector<Feature> out;
  for (auto i = static_cast<std::size_t>(first); i <= static_cast<std::size_t>(last); ++i) {
    out.push_back(static_cast<Feature>(i));
  }
  return out;
}

}  // namespace

FeatureSet standard_feature_set(StandardSet set) {
  switch (set) {
    case StandardSet::ALL:
      return {"ALL", range(Feature::td_cosine_distance, Feature::kurtosis_tgt)};
    case StandardSet::DIV_TD_BE:
      return {"DIV_TD_BE", range(Feature::td_cosine_distance, Feature::be_l2_distance)};
    case StandardSet::DIV_TD:
      return {"DIV_TD", range(Feature::td_cosine_distance, Feature::bhattacharyya_coefficient)};
    case StandardSet::DIV_BE:
      return {"DIV_BE", range(Feature::be_cosine_distance, Feature::be_l2_distance)};
    case StandardSet::H_PLUS_MOMENTS:
      return {"H_PLUS_MOMENTS", range(Feature::entropy_src, Feature::kurtosis_tgt)};
  }
  throw std::logic_error("unhandled feature set");
}

const std::vector<FeatureSet>& standard_feature_sets() {
  static const std::vector<FeatureSet> sets = {
      standard_feature_set(StandardSet::ALL),    standard_feature_set(StandardSet::DIV_TD_BE),
      standard_feature_set(StandardSet::DIV_TD), standard_feature_set(StandardSet::DIV_BE),
      standard_feature_set(StandardSet::H_PLUS_MOMENTS),
  };
  return sets;
}

FeatureSet feature_set_by_name(std::string_view name) {
  for (const auto& set : standard_feature_sets()) {
    if (set.name == name) return set;
  }
  throw ValidationError("unknown feature set '" + std::string(name) + "'");
}

FeatureSet make_feature_set(std::string name, const std::vector<std::string>& member_names) {
  std::set<std::size_t> indices;
  for (const auto& member : member_names) {
    indices.insert(static_cast<std::size_t>(parse_feature(member)));
  }
  if (indices.empty()) {
    throw ValidationError("feature set '" + name + "' has no members");
  }
  FeatureSet set{std::move(name), {}};
  for (auto i : indices) set.members.push_back(static_cast<Feature>(i));
  return set;
}

std::string measure_config_hash(const measures::MeasureConfig& config) {
  return sha256_hex("renyi_alpha=" + format_double(config.renyi_alpha) +
                    ";epsilon=" + format_double(config.epsilon_smoothing) + ";log=natural" +
                    ";wasserstein_ground=vocab_index;schema=" + feature_schema_hash());
}

PairFeatures featurize_pair(const DomainRepresentation& source, const DomainRepresentation& target,
                            const measures::MeasureConfig& config) {
  namespace m = measures;
  config.validate();
  if (source.td.vocab_hash != target.td.vocab_hash) {
    throw ValidationError("term distributions of " + source.domain_id + " and " + target.domain_id +
                          " were built on different vocabularies");
  }
  if (source.be.table_hash != target.be.table_hash) {
    throw ValidationError("embeddings of " + source.domain_id + " and " + target.domain_id +
                          " were built from different embedding tables");
  }
  const auto& p = source.td.mass;
  const auto& q = target.td.mass;

  PairFeatures pf;
  pf.source_id = source.domain_id;
  pf.target_id = target.domain_id;
  pf.n_s = source.n_s;
  pf.provenance = {source.td.vocab_hash, source.be.table_hash, measure_config_hash(config),
                   source.split, target.split};

  auto set = [&pf](Feature f, double v) { pf.values[static_cast<std::size_t>(f)] = v; };
  set(Feature::td_cosine_distance, m::cosine_distance(p, q));
  set(Feature::td_l1_distance, m::l1_distance(p, q));
  set(Feature::td_l2_distance, m::l2_distance(p, q));
  set(Feature::renyi_divergence,
      m::renyi_divergence(p, q, config.renyi_alpha, config.epsilon_smoothing));
  set(Feature::js_divergence, m::js_divergence(p, q));
  set(Feature::wasserstein_distance, m::wasserstein_1d(p, q));
  set(Feature::bhattacharyya_coefficient, m::bhattacharyya_coefficient(p, q));
  set(Feature::be_cosine_distance, m::cosine_distance(source.be.vector, target.be.vector));
  set(Feature::be_l1_distance, m::l1_distance(source.be.vector, target.be.vector));
  set(Feature::be_l2_distance, m::l2_distance(source.be.vector, target.be.vector));

  const auto within = [&](const std::vector<double>& t, Feature entropy_f, Feature renyi_f,
                          Feature simpson_f, Feature mean_f, Feature var_f, Feature skew_f,
                          Feature kurt_f) {
    set(entropy_f, m::entropy(t));
    set(renyi_f, m::renyi_entropy(t, config.renyi_alpha));
    set(simpson_f, m::simpson_index(t));
    const auto mo = m::moments(t);
    set(mean_f, mo.mean);
    set(var_f, mo.variance);
    set(skew_f, mo.skewness);
    set(kurt_f, mo.kurtosis);
  };
  within(p, Feature::entropy_src, Feature::renyi_entropy_src, Feature::simpson_index_src,
         Feature::mean_src, Feature::variance_src, Feature::skewness_src, Feature::kurtosis_src);
  within(q, Feature::entropy_tgt, Feature::renyi_entropy_tgt, Feature::simpson_index_tgt,
         Feature::mean_tgt, Feature::variance_tgt, Feature::skewness_tgt, Feature::kurtosis_tgt);

  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(pf.values[i])) {
      throw ValidationError("feature " + std::string(feature_names()[i]) + " is not finite for " +
                            pf.source_id + " -> " + pf.target_id);
    }
  }
  return pf;
}

PairFeatures featurize_pair_local_vocab(const DomainCorpus& source_corpus,
                                        const DomainCorpus& target_corpus,
                                        const DomainRepresentation& source,
                                        const DomainRepresentation& target, std::size_t vocab_size,
                                        const measures::MeasureConfig& config) {
  const auto vocab = build_vocabulary({&source_corpus, &target_corpus}, vocab_size).vocabulary;
  auto local_source = source;
  auto local_target = target;
  local_source.td = term_distribution(source_corpus, vocab);
  local_target.td = term_distribution(target_corpus, vocab);
  return featurize_pair(local_source, local_target, config);
}

std::vector<std::pair<std::string_view, double>> select_features(const PairFeatures& pf,
                                                                 const FeatureSet& set) {
  std::vector<std::pair<std::string_view, double>> out;
  out.reserve(set.members.size());
  for (const auto f : set.members) {
    if (static_cast<std::size_t>(f) >= kFeatureCount) {
      throw ValidationError("feature set '" + set.name + "' has an out-of-schema member");
    }
    out.emplace_back(feature_name(f), pf.value(f));
  }
  return out;
}

std::vector<double> select_values(const PairFeatures& pf, const FeatureSet& set) {
  std::vector<double> out;
  out.reserve(set.members.size());
  for (const auto f : set.members) {
    if (static_cast<std::size_t>(f) >= kFeatureCount) {
      throw ValidationError("feature set '" + set.name + "' has an out-of-schema member");
    }
    out.push_back(pf.value(f));
  }
  return out;
}

std::vector<PairFeatures> feature_matrix(const std::vector<std::string>& domains,
                                         const std::vector<int>& n_s_settings,
                                         const RepresentationMap& representations,
                                         const measures::MeasureConfig& config, unsigned jobs) {
  std::vector<std::string> sorted_domains = domains;
  std::sort(sorted_domains.begin(), sorted_domains.end());
  std::vector<int> settings = n_s_settings;
  std::sort(settings.begin(), settings.end());

  std::set<std::string> missing;
  for (const auto& d : sorted_domains) {
    for (int n_s : settings) {
      if (!representations.contains({d, Split::train, n_s}) ||
          !representations.contains({d, Split::test, n_s})) {
        missing.insert(d);
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& d : missing) list += (list.empty() ? "" : ", ") + d;
    throw ValidationError("missing representations for domains: " + list);
  }

  struct Job {
    const DomainRepresentation* source;
    const DomainRepresentation* target;
  };
  std::vector<Job> work;
  for (const auto& s : sorted_domains) {
    for (const auto& t : sorted_domains) {
      if (s == t) continue;
      for (int n_s : settings) {
        work.push_back({&representations.at({s, Split::train, n_s}),
                        &representations.at({t, Split::test, n_s})});
      }
    }
  }
  std::vector<PairFeatures> rows(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    rows[i] = featurize_pair(*work[i].source, *work[i].target, config);
  });
  return rows;
}

std::string write_feature_csv(const std::vector<PairFeatures>& rows) {
  std::string out = "source,target,n_s";
  for (const auto name : feature_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& row : rows) {
    out += row.source_id + "," + row.target_id + "," + std::to_string(row.n_s);
    for (double v : row.values) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<PairFeatures> read_feature_csv(std::string_view text, const std::string& source_name) {
  const auto lines = split(text, '\n');
  if (lines.empty()) {
    throw ValidationError(source_name + ": empty feature file");
  }
  const auto header = split(trim(lines[0]), ',');
  if (header.size() != 3 + kFeatureCount || header[0] != "source" || header[1] != "target" ||
      header[2] != "n_s") {
    throw ValidationError(source_name + ": feature header does not match schema version " +
                          std::to_string(kFeatureSchemaVersion));
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (header[3 + i] != feature_names()[i]) {
      throw ValidationError(source_name + ": unexpected feature column '" + header[3 + i] + "'");
    }
  }
  std::vector<PairFeatures> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto line = trim(lines[li]);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw ValidationError(source_name + ":" + std::to_string(li + 1) + ": expected " +
                            std::to_string(header.size()) + " fields");
    }
    PairFeatures pf;
    pf.source_id = fields[0];
    pf.target_id = fields[1];
    pf.n_s = static_cast<int>(parse_int(fields[2]));
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      pf.values[i] = parse_double(fields[3 + i]);
    }
    rows.push_back(std::move(pf));
  }
  return rows;
}

}  // namespace divrank
