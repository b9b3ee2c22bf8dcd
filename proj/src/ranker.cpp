#include "divrank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "divrank/common.hpp"

namespace divrank {

// ---------------------------------------------------------------------------
// Performance matrix

std::vector<PerformanceRecord> read_performance_csv(std::string_view text,
                                                    const std::string& source_name) {
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "source,target,n_s,macro_f1,train_runtime_hours") {
    throw ValidationError(source_name +
                          ": expected header source,target,n_s,macro_f1,train_runtime_hours");
  }
  std::vector<PerformanceRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto where = source_name + ":" + std::to_string(i + 1);
    const auto fields = split(line, ',');
    if (fields.size() != 5) {
      throw ValidationError(where + ": expected 5 fields");
    }
    PerformanceRecord r;
    r.source_id = fields[0];
    r.target_id = fields[1];
    try {
      r.n_s = static_cast<int>(parse_int(fields[2]));
      r.macro_f1 = parse_double(fields[3]);
      r.train_runtime_hours = parse_double(fields[4]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (r.source_id == r.target_id) {
      throw ValidationError(where + ": source equals target");
    }
    if (!(r.macro_f1 >= 0.0 && r.macro_f1 <= 1.0)) {
      throw ValidationError(where + ": macro_f1 outside [0,1]");
    }
    if (!(r.train_runtime_hours >= 0.0) || !std::isfinite(r.train_runtime_hours)) {
      throw ValidationError(where + ": negative or non-finite runtime");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string write_performance_csv(const std::vector<PerformanceRecord>& records) {
  std::string out = "source,target,n_s,macro_f1,train_runtime_hours\n";
  for (const auto& r : records) {
    out += r.source_id + "," + r.target_id + "," + std::to_string(r.n_s) + "," +
           format_double(r.macro_f1) + "," + format_double(r.train_runtime_hours) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trees

void GbtHyperparams::validate() const {
  if (rounds < 0) throw ValidationError("rounds must be >= 0");
  if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ValidationError("learning_rate must lie in (0, 1]");
  }
  if (min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  if (!(subsample > 0.0 && subsample <= 1.0)) {
    throw ValidationError("subsample must lie in (0, 1]");
  }
}

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes[i].leaf_value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

GbtModel::GbtModel(std::vector<std::string> feature_schema, GbtHyperparams hyperparams,
                   std::uint64_t seed, double base_prediction, std::vector<RegressionTree> trees)
    : feature_schema_(std::move(feature_schema)),
      hyperparams_(hyperparams),
      seed_(seed),
      base_prediction_(base_prediction),
      trees_(std::move(trees)) {
  for (const auto& tree : trees_) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= feature_schema_.size()) {
        throw ValidationError("tree split references feature outside the schema");
      }
    }
    if (tree.depth() > hyperparams_.max_depth) {
      throw ValidationError("tree deeper than max_depth");
    }
  }
}

double GbtModel::predict(std::span<const double> x) const {
  if (x.size() != feature_schema_.size()) {
    throw ValidationError("feature vector has " + std::to_string(x.size()) +
                          " values, model schema has " + std::to_string(feature_schema_.size()));
  }
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return base_prediction_ + hyperparams_.learning_rate * sum;
}

std::string GbtModel::schema_hash() const {
  std::string text;
  for (const auto& name : feature_schema_) text += name + "\n";
  return sha256_hex(text);
}

std::string GbtModel::serialize() const {
  std::ostringstream out;
  out << "#divrank-gbt v1\n";
  out << "schema_hash=" << schema_hash() << '\n';
  out << "features=";
  for (std::size_t i = 0; i < feature_schema_.size(); ++i) {
    out << (i ? "," : "") << feature_schema_[i];
  }
  out << '\n';
  out << "rounds=" << hyperparams_.rounds << " max_depth=" << hyperparams_.max_depth
      << " min_leaf=" << hyperparams_.min_leaf << " subsample=" << format_double(hyperparams_.subsample)
      << " seed=" << seed_ << '\n';
  out << "base=" << format_double(base_prediction_) << '\n';
  out << "lr=" << format_double(hyperparams_.learning_rate) << '\n';
  out << "trees=" << trees_.size() << '\n';
  out << "tree,node,feature,threshold,left,right,leaf_value\n";
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const auto& node = nodes[n];
      out << t << ',' << n << ',' << node.feature << ',' << format_double(node.threshold) << ','
          << node.left << ',' << node.right << ',' << format_double(node.leaf_value) << '\n';
    }
  }
  return out.str();
}

GbtModel GbtModel::parse(std::string_view text) {
  const auto lines = split(text, '\n');
  if (lines.size() < 8 || lines[0] != "#divrank-gbt v1") {
    throw ValidationError("not a divrank-gbt v1 model");
  }
  const auto value_of = [](const std::string& line, std::string_view key) {
    if (line.rfind(std::string(key) + "=", 0) != 0) {
      throw ValidationError("model header: expected '" + std::string(key) + "='");
    }
    return line.substr(key.size() + 1);
  };
  const auto schema_hash = value_of(lines[1], "schema_hash");
  const auto names = value_of(lines[2], "features");
  std::vector<std::string> schema = names.empty() ? std::vector<std::string>{} : split(names, ',');
  GbtHyperparams hp;
  std::uint64_t seed = 0;
  for (const auto& field : split(lines[3], ' ')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ValidationError("model header: malformed '" + field + "'");
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "rounds") hp.rounds = static_cast<int>(parse_int(value));
    else if (key == "max_depth") hp.max_depth = static_cast<int>(parse_int(value));
    else if (key == "min_leaf") hp.min_leaf = static_cast<std::size_t>(parse_int(value));
    else if (key == "subsample") hp.subsample = parse_double(value);
    else if (key == "seed") seed = std::stoull(value);
  }
  const double base = parse_double(value_of(lines[4], "base"));
  hp.learning_rate = parse_double(value_of(lines[5], "lr"));
  const auto tree_count = static_cast<std::size_t>(parse_int(value_of(lines[6], "trees")));
  if (lines[7] != "tree,node,feature,threshold,left,right,leaf_value") {
    throw ValidationError("model: missing node table header");
  }
  std::vector<RegressionTree> trees(tree_count);
  for (std::size_t i = 8; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 7) throw ValidationError("model: malformed node line " + std::to_string(i + 1));
    const auto t = static_cast<std::size_t>(parse_int(f[0]));
    const auto n = static_cast<std::size_t>(parse_int(f[1]));
    if (t >= tree_count || n != trees[t].nodes.size()) {
      throw ValidationError("model: node lines out of order at line " + std::to_string(i + 1));
    }
    TreeNode node;
    node.feature = static_cast<int>(parse_int(f[2]));
    node.threshold = parse_double(f[3]);
    node.left = static_cast<int>(parse_int(f[4]));
    node.right = static_cast<int>(parse_int(f[5]));
    node.leaf_value = parse_double(f[6]);
    trees[t].nodes.push_back(node);
  }
  GbtModel model(std::move(schema), hp, seed, base, std::move(trees));
  if (model.schema_hash() != schema_hash) {
    throw ValidationError("model: schema hash mismatch");
  }
  return model;
}

namespace {

// Column-major training data with per-feature row orderings computed once.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& columns, const GbtHyperparams& hp,
              std::vector<std::size_t> feature_order)
      : columns_(columns), hp_(hp), feature_order_(std::move(feature_order)) {
    const std::size_t n = columns_.empty() ? 0 : columns_[0].size();
    presorted_.resize(columns_.size());
    for (std::size_t f = 0; f < columns_.size(); ++f) {
      auto& order = presorted_[f];
      order.resize(n);
      std::iota(order.begin(), order.end(), std::uint32_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return columns_[f][a] < columns_[f][b];
      });
    }
    goes_left_.assign(n, 0);
  }

  // Builds one tree over the active rows, fitting `residuals`.
  RegressionTree build(const std::vector<double>& residuals, const std::vector<char>& active) {
    residuals_ = &residuals;
    RegressionTree tree;
    std::vector<std::vector<std::uint32_t>> lists(columns_.size());
    for (std::size_t f = 0; f < columns_.size(); ++f) {
      lists[f].reserve(presorted_[f].size());
      for (auto row : presorted_[f]) {
        if (active[row]) lists[f].push_back(row);
      }
    }
    tree.nodes.emplace_back();
    grow(tree, 0, lists, 0);
    return tree;
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
  };

  Split best_split(const std::vector<std::vector<std::uint32_t>>& lists) const {
    const auto& r = *residuals_;
    const auto& any = lists[0];
    const std::size_t n = any.size();
    double total = 0.0;
    double total_sq = 0.0;
    for (auto row : any) {
      total += r[row];
      total_sq += r[row] * r[row];
    }
    const double parent_score = total * total / static_cast<double>(n);
    Split best;
    const double min_gain = 1e-14 * total_sq;
    for (const auto f : feature_order_) {
      const auto& list = lists[f];
      const auto& x = columns_[f];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += r[list[i]];
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < hp_.min_leaf) continue;
        if (n_right < hp_.min_leaf) break;
        const double lo = x[list[i]];
        const double hi = x[list[i + 1]];
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) - parent_score;
        if (gain > min_gain && gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = {true, f, threshold, gain};
        }
      }
    }
    return best;
  }

  void grow(RegressionTree& tree, std::size_t node_index,
            std::vector<std::vector<std::uint32_t>>& lists, int depth) {
    const auto& r = *residuals_;
    const auto& rows = lists[0];
    double sum = 0.0;
    for (auto row : rows) sum += r[row];
    const double leaf_value = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());

    Split split;
    if (depth < hp_.max_depth && rows.size() >= 2 * hp_.min_leaf) {
      split = best_split(lists);
    }
    if (!split.found) {
      tree.nodes[node_index].leaf_value = leaf_value;
      return;
    }
    const auto& x = columns_[split.feature];
    for (auto row : rows) goes_left_[row] = x[row] <= split.threshold ? 1 : 0;

    std::vector<std::vector<std::uint32_t>> left(lists.size());
    std::vector<std::vector<std::uint32_t>> right(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      for (auto row : lists[f]) {
        (goes_left_[row] ? left[f] : right[f]).push_back(row);
      }
    }
    lists.clear();
    lists.shrink_to_fit();

    const auto left_index = tree.nodes.size();
    tree.nodes.emplace_back();
    const auto right_index = tree.nodes.size();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[node_index];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.left = static_cast<int>(left_index);
    node.right = static_cast<int>(right_index);
    grow(tree, left_index, left, depth + 1);
    grow(tree, right_index, right, depth + 1);
  }

  const std::vector<std::vector<double>>& columns_;
  const GbtHyperparams& hp_;
  std::vector<std::size_t> feature_order_;
  std::vector<std::vector<std::uint32_t>> presorted_;
  std::vector<char> goes_left_;
  const std::vector<double>* residuals_ = nullptr;
};

}  // namespace

GbtModel train_gbt(std::vector<TrainingRow> rows, std::vector<std::string> feature_schema,
                   const GbtHyperparams& hyperparams, std::uint64_t seed,
                   std::vector<double>* loss_history) {
  hyperparams.validate();
  if (rows.size() < 2) {
    throw ValidationError("train_gbt needs at least 2 rows");
  }
  const std::size_t n_features = feature_schema.size();
  for (const auto& row : rows) {
    if (row.features.size() != n_features) {
      throw ValidationError("training row width does not match the feature schema");
    }
    if (!std::isfinite(row.target)) throw ValidationError("non-finite training target");
    for (double v : row.features) {
      if (!std::isfinite(v)) throw ValidationError("non-finite training feature");
    }
  }
  std::sort(rows.begin(), rows.end(), [](const TrainingRow& a, const TrainingRow& b) {
    return std::tie(a.features, a.target) < std::tie(b.features, b.target);
  });

  const std::size_t n = rows.size();
  double base = 0.0;
  for (const auto& row : rows) base += row.target;
  base /= static_cast<double>(n);

  const bool constant_target = std::all_of(rows.begin(), rows.end(), [&](const TrainingRow& row) {
    return row.target == rows.front().target;
  });
  if (constant_target || n_features == 0) {
    if (loss_history) {
      double mse = 0.0;
      for (const auto& row : rows) mse += (row.target - base) * (row.target - base);
      loss_history->assign(static_cast<std::size_t>(hyperparams.rounds), mse / static_cast<double>(n));
    }
    return GbtModel(std::move(feature_schema), hyperparams, seed, base, {});
  }

  std::vector<std::vector<double>> columns(n_features, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < n_features; ++f) columns[f][i] = rows[i].features[f];
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> feature_order(n_features);
  std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
  std::shuffle(feature_order.begin(), feature_order.end(), rng);

  TreeBuilder builder(columns, hyperparams, feature_order);
  std::vector<double> prediction(n, base);
  std::vector<double> residuals(n);
  std::vector<char> active(n, 1);
  std::vector<std::size_t> row_ids(n);
  std::iota(row_ids.begin(), row_ids.end(), std::size_t{0});
  const auto sample_size = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(hyperparams.subsample * static_cast<double>(n))));

  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(hyperparams.rounds));
  for (int round = 0; round < hyperparams.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = rows[i].target - prediction[i];
    if (hyperparams.subsample < 1.0 && sample_size < n) {
      std::shuffle(row_ids.begin(), row_ids.end(), rng);
      std::fill(active.begin(), active.end(), 0);
      for (std::size_t i = 0; i < sample_size; ++i) active[row_ids[i]] = 1;
    }
    auto tree = builder.build(residuals, active);
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      prediction[i] += hyperparams.learning_rate * tree.predict(rows[i].features);
      const double e = rows[i].target - prediction[i];
      mse += e * e;
    }
    if (loss_history) loss_history->push_back(mse / static_cast<double>(n));
    trees.push_back(std::move(tree));
  }
  return GbtModel(std::move(feature_schema), hyperparams, seed, base, std::move(trees));
}

// ---------------------------------------------------------------------------
// Protocol

std::vector<LabeledPair> join_rows(const std::vector<PairFeatures>& features,
                                   const std::vector<PerformanceRecord>& performances) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, const PerformanceRecord*> perf;
  for (const auto& p : performances) {
    if (!perf.emplace(Key{p.source_id, p.target_id, p.n_s}, &p).second) {
      throw ValidationError("duplicate performance record " + p.source_id + " -> " + p.target_id +
                            " n_s=" + std::to_string(p.n_s));
    }
  }
  std::vector<LabeledPair> out;
  out.reserve(features.size());
  std::vector<std::string> gaps;
  std::set<Key> used;
  for (const auto& f : features) {
    const Key key{f.source_id, f.target_id, f.n_s};
    const auto it = perf.find(key);
    if (it == perf.end()) {
      gaps.push_back("no performance for " + f.source_id + " -> " + f.target_id + " n_s=" +
                     std::to_string(f.n_s));
      continue;
    }
    if (!used.insert(key).second) {
      throw ValidationError("duplicate feature row " + f.source_id + " -> " + f.target_id +
                            " n_s=" + std::to_string(f.n_s));
    }
    LabeledPair row;
    row.source_id = f.source_id;
    row.target_id = f.target_id;
    row.n_s = f.n_s;
    row.features = f.values;
    row.macro_f1 = it->second->macro_f1;
    row.train_runtime_hours = it->second->train_runtime_hours;
    out.push_back(std::move(row));
  }
  for (const auto& [key, record] : perf) {
    if (!used.contains(key)) {
      gaps.push_back("no features for " + std::get<0>(key) + " -> " + std::get<1>(key) +
                     " n_s=" + std::to_string(std::get<2>(key)));
    }
  }
  if (!gaps.empty()) {
    std::string message = "features and performances do not join (" + std::to_string(gaps.size()) +
                          " gaps):";
    for (std::size_t i = 0; i < gaps.size() && i < 20; ++i) message += "\n  " + gaps[i];
    if (gaps.size() > 20) message += "\n  ...";
    throw ValidationError(message);
  }
  return out;
}

LotoSplit loto_split(const std::vector<LabeledPair>& rows, const std::string& held_out_target) {
  LotoSplit split;
  for (const auto& row : rows) {
    (row.target_id == held_out_target ? split.test : split.train).push_back(row);
  }
  if (split.test.empty()) {
    throw ValidationError("unknown target '" + held_out_target + "'");
  }
  return split;
}

RankedSources rank_sources(const GbtModel& model, const std::vector<LabeledPair>& candidates,
                           const FeatureSet& set, std::uint64_t seed) {
  RankedSources ranking;
  if (!candidates.empty()) {
    ranking.target_id = candidates.front().target_id;
    ranking.n_s = candidates.front().n_s;
  }
  ranking.feature_set = set.name;
  ranking.seed = seed;
  std::vector<double> x(set.members.size());
  for (const auto& row : candidates) {
    for (std::size_t i = 0; i < set.members.size(); ++i) {
      x[i] = row.features[static_cast<std::size_t>(set.members[i])];
    }
    ranking.ordering.emplace_back(row.source_id, model.predict(x));
  }
  std::sort(ranking.ordering.begin(), ranking.ordering.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranking;
}

std::vector<ProtocolCell> run_protocol(const std::vector<LabeledPair>& rows,
                                       const ProtocolOptions& options) {
  options.hyperparams.validate();
  if (options.feature_sets.empty() || options.n_s_settings.empty() || options.seeds.empty()) {
    throw ValidationError("protocol needs at least one feature set, n_s setting and seed");
  }
  std::set<std::string> target_set;
  for (const auto& row : rows) target_set.insert(row.target_id);
  const std::vector<std::string> targets(target_set.begin(), target_set.end());

  std::map<int, std::vector<LabeledPair>> by_setting;
  for (int n_s : options.n_s_settings) by_setting[n_s];
  for (const auto& row : rows) {
    const auto it = by_setting.find(row.n_s);
    if (it != by_setting.end()) it->second.push_back(row);
  }
  for (const auto& [n_s, subset] : by_setting) {
    if (subset.empty()) {
      throw ValidationError("no rows for n_s=" + std::to_string(n_s));
    }
  }

  struct Job {
    std::size_t target;
    int n_s;
    std::size_t set;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (int n_s : options.n_s_settings) {
      for (std::size_t s = 0; s < options.feature_sets.size(); ++s) {
        for (auto seed : options.seeds) jobs.push_back({t, n_s, s, seed});
      }
    }
  }

  std::vector<ProtocolCell> cells(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& set = options.feature_sets[job.set];
    const auto split = loto_split(by_setting.at(job.n_s), targets[job.target]);
    std::vector<TrainingRow> training;
    training.reserve(split.train.size());
    for (const auto& row : split.train) {
      TrainingRow tr;
      tr.features.reserve(set.members.size());
      for (const auto f : set.members) tr.features.push_back(row.features[static_cast<std::size_t>(f)]);
      tr.target = row.macro_f1;
      training.push_back(std::move(tr));
    }
    std::vector<std::string> schema;
    for (const auto f : set.members) schema.emplace_back(feature_name(f));
    auto model = train_gbt(std::move(training), std::move(schema), options.hyperparams, job.seed);
    auto ranking = rank_sources(model, split.test, set, job.seed);
    cells[j] = ProtocolCell{targets[job.target], job.n_s, set.name, job.seed, std::move(model),
                            std::move(ranking)};
  });
  return cells;
}

std::string write_rankings_csv(const std::vector<RankedSources>& rankings) {
  std::string out = "target,n_s,feature_set,seed,rank,source,predicted_score\n";
  for (const auto& r : rankings) {
    for (std::size_t i = 0; i < r.ordering.size(); ++i) {
      out += r.target_id + "," + std::to_string(r.n_s) + "," + r.feature_set + "," +
             std::to_string(r.seed) + "," + std::to_string(i + 1) + "," + r.ordering[i].first + "," +
             format_double(r.ordering[i].second) + "\n";
    }
  }
  return out;
}

std::vector<RankedSources> read_rankings_csv(std::string_view text, const std::string& source_name) {
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "target,n_s,feature_set,seed,rank,source,predicted_score") {
    throw ValidationError(source_name + ": unexpected rankings header");
  }
  std::vector<RankedSources> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw ValidationError(source_name + ":" + std::to_string(i + 1) + ": expected 7 fields");
    }
    const int n_s = static_cast<int>(parse_int(f[1]));
    const auto seed = static_cast<std::uint64_t>(parse_int(f[3]));
    const auto rank = parse_int(f[4]);
    if (rank == 1) {
      out.push_back(RankedSources{f[0], n_s, f[2], seed, {}});
    } else if (out.empty() || out.back().target_id != f[0] || out.back().n_s != n_s ||
               out.back().feature_set != f[2] || out.back().seed != seed ||
               static_cast<long long>(out.back().ordering.size()) + 1 != rank) {
      throw ValidationError(source_name + ":" + std::to_string(i + 1) + ": ranks out of order");
    }
    out.back().ordering.emplace_back(f[5], parse_double(f[6]));
  }
  return out;
}

}  // namespace divrank
