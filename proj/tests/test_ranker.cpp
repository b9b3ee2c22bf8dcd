#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "divrank/common.hpp"
#include "divrank/ranker.hpp"
#include "gbt_fixtures.hpp"
#include "oracles/gbt_oracle.hpp"

using namespace divrank;

namespace {

std::vector<TrainingRow> rows_of(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  std::vector<TrainingRow> rows;
  for (std::size_t i = 0; i < y.size(); ++i) rows.push_back({x[i], y[i]});
  return rows;
}

std::vector<std::string> schema(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("f" + std::to_string(i));
  return out;
}

double rmse(const GbtModel& m, const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::pow(m.predict(x[i]) - y[i], 2);
  return std::sqrt(s / static_cast<double>(y.size()));
}

// D domains, one n_s; macro_f1 falls with feature 0 (js_divergence slot).
std::vector<LabeledPair> grid(int domains, int n_s, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LabeledPair> rows;
  for (int s = 0; s < domains; ++s) {
    for (int t = 0; t < domains; ++t) {
      if (s == t) continue;
      LabeledPair r;
      r.source_id = "s" + std::to_string(s);
      r.target_id = "s" + std::to_string(t);
      r.n_s = n_s;
      for (auto& f : r.features) f = u(rng);
      r.features[static_cast<std::size_t>(Feature::js_divergence)] = 0.05 * (s + 1) + 0.01 * t;
      r.macro_f1 = std::clamp(0.9 - r.features[static_cast<std::size_t>(Feature::js_divergence)] + noise * eps(rng), 0.0, 1.0);
      r.train_runtime_hours = 1.0;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace

TEST(Hyperparams, Validation) {
  GbtHyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.learning_rate = 0.0;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.max_depth = 0;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.subsample = 1.5;
  EXPECT_THROW(hp.validate(), ValidationError);
}

TEST(Gbt, ConstantTargetHasNoTrees) {
  std::vector<TrainingRow> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({{double(i), double(i % 3)}, 0.42});
  const auto m = train_gbt(rows, schema(2), {}, 0);
  EXPECT_TRUE(m.trees().empty());
  EXPECT_DOUBLE_EQ(m.predict(std::vector<double>{100.0, -5.0}), 0.42);
  EXPECT_DOUBLE_EQ(m.base_prediction(), 0.42);
}

TEST(Gbt, EmptyModelPredictsBase) {
  const GbtModel m(schema(1), {}, 0, 0.3, {});
  EXPECT_EQ(m.predict(std::vector<double>{1.0}), 0.3);
  EXPECT_THROW(m.predict(std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST(Gbt, RejectsBadInput) {
  EXPECT_THROW(train_gbt({{{1.0}, 1.0}}, schema(1), {}, 0), ValidationError);
  EXPECT_THROW(train_gbt({{{1.0}, 1.0}, {{NAN}, 2.0}}, schema(1), {}, 0), ValidationError);
  EXPECT_THROW(train_gbt({{{1.0}, 1.0}, {{2.0}, INFINITY}}, schema(1), {}, 0), ValidationError);
  EXPECT_THROW(train_gbt({{{1.0}, 1.0}, {{2.0, 3.0}, 2.0}}, schema(1), {}, 0), ValidationError);
}

TEST(Gbt, IdentityLineFitsClosely) {
  std::vector<TrainingRow> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({{i / 99.0}, i / 99.0});
  const auto m = train_gbt(rows, schema(1), {}, 0);
  double s = 0.0;
  for (const auto& r : rows) s += std::pow(m.predict(r.features) - r.target, 2);
  EXPECT_LT(std::sqrt(s / 100.0), 0.01);
}

TEST(Gbt, MatchesNaiveOracle) {
  for (const auto& fx : fixtures::gbt_fixtures()) {
    const auto model = train_gbt(rows_of(fx.x, fx.y), schema(fx.x[0].size()), {}, 0);
    const auto ref = oracle::boost(fx.x, fx.y, 100, 3, 0.1, 1);
    const double ours = rmse(model, fx.x, fx.y);
    EXPECT_NEAR(ours, oracle::rmse(ref, fx.x, fx.y), 0.1 * oracle::rmse(ref, fx.x, fx.y)) << fx.name;
    EXPECT_NEAR(ours, fx.reference_rmse, 0.1 * fx.reference_rmse) << fx.name;
  }
}

TEST(Gbt, PredictionsMatchOracleOnHeldOutRows) {
  // Single feature, so there are no cross-feature ties and both learners
  // must build the same trees.
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 120; ++i) {
    const double v = std::sin(i * 0.37) + 0.01 * i;
    x.push_back({v});
    y.push_back(std::cos(3 * v) + 0.1 * v);
  }
  const auto model = train_gbt(rows_of(x, y), schema(1), {}, 0);
  const auto ref = oracle::boost(x, y, 100, 3, 0.1, 1);
  for (double v = -1.5; v <= 2.5; v += 0.013) {
    EXPECT_NEAR(model.predict(std::vector<double>{v}), ref.predict({v}), 1e-9);
  }
}

TEST(Gbt, LossNonIncreasing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<TrainingRow> rows;
    for (int i = 0; i < 150; ++i) {
      TrainingRow r{{u(rng), u(rng), u(rng)}, 0.0};
      r.target = r.features[0] * r.features[1] + std::sin(3 * r.features[2]) + 0.1 * u(rng);
      rows.push_back(r);
    }
    std::vector<double> loss;
    train_gbt(rows, schema(3), {}, static_cast<std::uint64_t>(trial), &loss);
    ASSERT_EQ(loss.size(), 100u);
    for (std::size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1] + 1e-15);
  }
}

TEST(Gbt, DeterministicAndOrderInvariant) {
  const auto fx = fixtures::gbt_fixtures()[2];
  auto rows = rows_of(fx.x, fx.y);
  const auto a = train_gbt(rows, schema(2), {}, 4).serialize();
  const auto b = train_gbt(rows, schema(2), {}, 4).serialize();
  std::mt19937_64 rng(1);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto c = train_gbt(rows, schema(2), {}, 4).serialize();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Gbt, DepthRespected) {
  const auto fx = fixtures::gbt_fixtures()[2];
  GbtHyperparams hp;
  hp.max_depth = 2;
  const auto m = train_gbt(rows_of(fx.x, fx.y), schema(2), hp, 0);
  for (const auto& t : m.trees()) EXPECT_LE(t.depth(), 2);
}

TEST(Gbt, SubsampleMakesSeedsMatter) {
  const auto fx = fixtures::gbt_fixtures()[1];
  GbtHyperparams hp;
  hp.subsample = 0.5;
  const auto a = train_gbt(rows_of(fx.x, fx.y), schema(1), hp, 1).serialize();
  const auto b = train_gbt(rows_of(fx.x, fx.y), schema(1), hp, 2).serialize();
  EXPECT_NE(a, b);
}

TEST(ModelFile, RoundTrip) {
  const auto fx = fixtures::gbt_fixtures()[2];
  const auto m = train_gbt(rows_of(fx.x, fx.y), {"x1", "x2"}, {}, 9);
  const auto text = m.serialize();
  EXPECT_EQ(text.rfind("#divrank-gbt v1", 0), 0u);
  const auto back = GbtModel::parse(text);
  EXPECT_EQ(back.serialize(), text);
  for (const auto& x : fx.x) EXPECT_EQ(back.predict(x), m.predict(x));
  auto tampered = text;
  tampered.replace(tampered.find("x1"), 2, "zz");
  EXPECT_THROW(GbtModel::parse(tampered), ValidationError);
}

TEST(ModelFile, ConstructorChecksTrees) {
  RegressionTree t;
  t.nodes.push_back({3, 0.5, 1, 2, 0.0});
  t.nodes.push_back({});
  t.nodes.push_back({});
  EXPECT_THROW(GbtModel(schema(2), {}, 0, 0.0, {t}), ValidationError);
}

TEST(PerformanceFile, ParseAndValidate) {
  const std::string good =
      "source,target,n_s,macro_f1,train_runtime_hours\n"
      "a,b,1000,0.8,0.3\n"
      "b,a,1000,0.7,0.3\n";
  const auto recs = read_performance_csv(good, "p.csv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].macro_f1, 0.7);
  const auto again = read_performance_csv(write_performance_csv(recs), "q.csv");
  ASSERT_EQ(again.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(again[i].macro_f1, recs[i].macro_f1);
    EXPECT_EQ(again[i].train_runtime_hours, recs[i].train_runtime_hours);
  }
  EXPECT_THROW(read_performance_csv("source,target,n_s,macro_f1,train_runtime_hours\na,a,1,0.5,1\n", "p"),
               ValidationError);
  EXPECT_THROW(read_performance_csv("source,target,n_s,macro_f1,train_runtime_hours\na,b,1,1.5,1\n", "p"),
               ValidationError);
  EXPECT_THROW(read_performance_csv("source,target,n_s,macro_f1,train_runtime_hours\na,b,1,0.5,-1\n", "p"),
               ValidationError);
  EXPECT_THROW(read_performance_csv("wrong,header\n", "p"), ValidationError);
}

TEST(Join, ReportsGaps) {
  PairFeatures pf;
  pf.source_id = "a";
  pf.target_id = "b";
  pf.n_s = 1;
  PerformanceRecord pr{"a", "b", 1, 0.5, 1.0};
  EXPECT_EQ(join_rows({pf}, {pr}).size(), 1u);
  PerformanceRecord other{"b", "a", 1, 0.5, 1.0};
  try {
    join_rows({pf}, {pr, other});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_THROW(join_rows({pf, pf}, {pr}), ValidationError);
}

TEST(Loto, ThreeDomainEnumeration) {
  const auto rows = grid(3, 10, 0.0, 1);
  const auto split = loto_split(rows, "s0");
  std::set<std::pair<std::string, std::string>> test, train;
  for (const auto& r : split.test) test.insert({r.source_id, r.target_id});
  for (const auto& r : split.train) train.insert({r.source_id, r.target_id});
  EXPECT_EQ(test, (std::set<std::pair<std::string, std::string>>{{"s1", "s0"}, {"s2", "s0"}}));
  EXPECT_EQ(train, (std::set<std::pair<std::string, std::string>>{
                       {"s0", "s1"}, {"s2", "s1"}, {"s0", "s2"}, {"s1", "s2"}}));
  EXPECT_THROW(loto_split(rows, "nope"), ValidationError);
}

TEST(Loto, PartitionForEveryTarget) {
  const auto rows = grid(7, 10, 0.0, 2);
  for (int t = 0; t < 7; ++t) {
    const auto split = loto_split(rows, "s" + std::to_string(t));
    EXPECT_EQ(split.test.size(), 6u);
    EXPECT_EQ(split.train.size(), 36u);
    EXPECT_EQ(split.test.size() + split.train.size(), rows.size());
    for (const auto& r : split.test) EXPECT_EQ(r.target_id, "s" + std::to_string(t));
    for (const auto& r : split.train) EXPECT_NE(r.target_id, "s" + std::to_string(t));
  }
}

TEST(Protocol, ModelCount) {
  const auto rows = grid(3, 10, 0.0, 3);
  ProtocolOptions o;
  o.feature_sets = {standard_feature_set(StandardSet::ALL)};
  o.n_s_settings = {10};
  o.seeds = {0};
  EXPECT_EQ(run_protocol(rows, o).size(), 3u);
  auto both = rows;
  for (auto r : grid(3, 20, 0.0, 4)) both.push_back(r);
  o.feature_sets = standard_feature_sets();
  o.n_s_settings = {10, 20};
  o.seeds = {0, 1, 2};
  o.hyperparams.rounds = 5;
  const auto cells = run_protocol(both, o);
  EXPECT_EQ(cells.size(), 3u * 2u * 5u * 3u);
  for (const auto& c : cells) {
    EXPECT_EQ(c.ranking.ordering.size(), 2u);
    for (const auto& [source, score] : c.ranking.ordering) EXPECT_NE(source, c.target_id);
  }
}

TEST(Protocol, MonotoneFeatureRecoversOrder) {
  const auto rows = grid(8, 10, 0.0, 5);
  ProtocolOptions o;
  o.feature_sets = {make_feature_set("JS", {"js_divergence"})};
  o.n_s_settings = {10};
  o.seeds = {0, 1, 2, 3, 4};
  for (const auto& cell : run_protocol(rows, o)) {
    std::vector<std::string> expected;
    std::vector<std::pair<double, std::string>> by_js;
    for (const auto& r : rows) {
      if (r.target_id == cell.target_id) by_js.push_back({r.features[static_cast<std::size_t>(Feature::js_divergence)], r.source_id});
    }
    std::sort(by_js.begin(), by_js.end());
    for (const auto& [js, s] : by_js) expected.push_back(s);
    std::vector<std::string> got;
    for (const auto& [s, score] : cell.ranking.ordering) got.push_back(s);
    EXPECT_EQ(got, expected) << cell.target_id << " seed " << cell.seed;
  }
}

TEST(Protocol, ScalingTargetsPreservesOrdering) {
  auto rows = grid(6, 10, 0.02, 6);
  ProtocolOptions o;
  o.feature_sets = {standard_feature_set(StandardSet::ALL)};
  o.n_s_settings = {10};
  o.seeds = {0, 1};
  const auto a = run_protocol(rows, o);
  for (auto& r : rows) r.macro_f1 *= 0.5;
  const auto b = run_protocol(rows, o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].ranking.ordering.size(), b[i].ranking.ordering.size());
    for (std::size_t k = 0; k < a[i].ranking.ordering.size(); ++k) {
      EXPECT_EQ(a[i].ranking.ordering[k].first, b[i].ranking.ordering[k].first);
    }
  }
}

TEST(Protocol, DeterministicAcrossWorkerCounts) {
  const auto rows = grid(5, 10, 0.02, 7);
  ProtocolOptions o;
  o.feature_sets = standard_feature_sets();
  o.n_s_settings = {10};
  o.seeds = {0, 1};
  o.hyperparams.rounds = 20;
  const auto a = run_protocol(rows, o);
  o.jobs = 3;
  const auto b = run_protocol(rows, o);
  std::vector<RankedSources> ra, rb;
  for (const auto& c : a) ra.push_back(c.ranking);
  for (const auto& c : b) rb.push_back(c.ranking);
  EXPECT_EQ(write_rankings_csv(ra), write_rankings_csv(rb));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].model.serialize(), b[i].model.serialize());
}

TEST(Ranking, TieBreakBySourceId) {
  const GbtModel flat(schema(24), {}, 0, 0.5, {});
  std::vector<LabeledPair> candidates;
  for (const char* s : {"zeta", "alpha", "mid"}) {
    LabeledPair r;
    r.source_id = s;
    r.target_id = "t";
    candidates.push_back(r);
  }
  const auto ranked = rank_sources(flat, candidates, standard_feature_set(StandardSet::ALL), 0);
  EXPECT_EQ(ranked.ordering[0].first, "alpha");
  EXPECT_EQ(ranked.ordering[1].first, "mid");
  EXPECT_EQ(ranked.ordering[2].first, "zeta");
}

TEST(Ranking, CsvRoundTrip) {
  RankedSources r{"t", 10, "ALL", 3, {{"a", 0.9}, {"b", 1.0 / 3.0}}};
  const auto text = write_rankings_csv({r});
  const auto back = read_rankings_csv(text, "r.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].ordering, r.ordering);
  EXPECT_EQ(back[0].seed, 3u);
  EXPECT_EQ(write_rankings_csv(back), text);
}
