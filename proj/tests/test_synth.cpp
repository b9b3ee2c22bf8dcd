#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "divrank/common.hpp"
#include "divrank/measures.hpp"
#include "divrank/synth.hpp"
#include "oracles/measures_oracle.hpp"

using namespace divrank;
using namespace divrank::synth;

namespace {

double mean_pairwise_js(const std::vector<std::vector<double>>& truths) {
  double total = 0.0;
  int count = 0;
  for (std::size_t s = 0; s < truths.size(); ++s) {
    for (std::size_t t = s + 1; t < truths.size(); ++t) {
      total += oracle::js(truths[s], truths[t]);
      ++count;
    }
  }
  return total / count;
}

std::vector<double> empirical(const std::vector<Document>& pool, int vocab) {
  std::vector<double> counts(static_cast<std::size_t>(vocab), 0.0);
  for (const auto& doc : pool) {
    for (const auto& tok : split(doc.text, ' ')) counts[std::stoul(tok.substr(1))] += 1.0;
  }
  return counts;
}

}  // namespace

TEST(SynthConfig, Validation) {
  SynthConfig c;
  EXPECT_NO_THROW(c.validate());
  c.c0 = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.doc_length_min = 70;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.noise_sigma = -0.1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.n_domains = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.delta_spread = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(SynthConfig, JsonRoundTrip) {
  SynthConfig c;
  c.delta = 0.3;
  c.n_s_settings = {50, 500};
  c.seed = 99;
  const auto back = SynthConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_THROW(SynthConfig::from_json(nlohmann::json{{"delta", "big"}}), ValidationError);
}

TEST(Truths, ZeroDeltaGivesIdenticalDomains) {
  SynthConfig c;
  c.delta = 0.0;
  c.n_domains = 5;
  const auto truths = generate_truths(c);
  for (const auto& t : truths) EXPECT_EQ(t, truths[0]);
  EXPECT_EQ(mean_pairwise_js(truths), 0.0);
}

TEST(Truths, DivergenceGrowsWithDelta) {
  double previous = 0.0;
  for (double delta : {0.1, 0.5, 1.0}) {
    SynthConfig c;
    c.delta = delta;
    const double js = mean_pairwise_js(generate_truths(c));
    EXPECT_GT(js, previous) << delta;
    previous = js;
  }
}

TEST(Truths, AreDistributions) {
  const auto truths = generate_truths(SynthConfig{});
  ASSERT_EQ(truths.size(), 20u);
  for (const auto& t : truths) {
    double total = 0.0;
    for (double p : t) {
      EXPECT_GT(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Domains, SameSeedSameCorpora) {
  SynthConfig c;
  c.n_domains = 3;
  c.docs_per_domain = 50;
  const auto a = generate_domains(c);
  const auto b = generate_domains(c);
  ASSERT_EQ(a.pools.size(), 3u);
  for (std::size_t d = 0; d < 3; ++d) {
    ASSERT_EQ(a.pools[d].size(), 50u);
    for (std::size_t i = 0; i < 50; ++i) {
      EXPECT_EQ(a.pools[d][i].text, b.pools[d][i].text);
      EXPECT_EQ(a.pools[d][i].rating, b.pools[d][i].rating);
    }
  }
  c.seed = 8;
  EXPECT_NE(generate_domains(c).pools[0][0].text, a.pools[0][0].text);
}

TEST(Domains, DocumentShape) {
  SynthConfig c;
  c.n_domains = 2;
  c.docs_per_domain = 200;
  const auto d = generate_domains(c);
  EXPECT_EQ(d.domain_ids, (std::vector<std::string>{"synth_00", "synth_01"}));
  for (const auto& doc : d.pools[1]) {
    const auto n = split(doc.text, ' ').size();
    EXPECT_GE(n, 20u);
    EXPECT_LE(n, 60u);
    EXPECT_GE(doc.rating, 1);
    EXPECT_LE(doc.rating, 4);
  }
}

TEST(Domains, EmpiricalConvergesToTruth) {
  SynthConfig c;
  c.n_domains = 2;
  c.vocab_size = 300;
  c.embedding_dim = 8;
  c.docs_per_domain = 100;
  const auto small = generate_domains(c);
  c.docs_per_domain = 10000;
  const auto large = generate_domains(c);
  for (std::size_t d = 0; d < 2; ++d) {
    const double js_small = measures::js_divergence(empirical(small.pools[d], 300), small.truths[d]);
    const double js_large = measures::js_divergence(empirical(large.pools[d], 300), large.truths[d]);
    EXPECT_LT(js_large, js_small);
  }
}

TEST(Performance, RecordCountAndRanges) {
  SynthConfig c;
  const auto truths = generate_truths(c);
  std::vector<std::string> ids;
  for (int d = 0; d < c.n_domains; ++d) ids.push_back(domain_name(d));
  const auto records = generate_performance(c, ids, truths);
  EXPECT_EQ(records.size(), 760u);
  for (const auto& r : records) {
    EXPECT_NE(r.source_id, r.target_id);
    EXPECT_GE(r.macro_f1, 0.0);
    EXPECT_LE(r.macro_f1, 1.0);
    EXPECT_GT(r.train_runtime_hours, 0.0);
    EXPECT_DOUBLE_EQ(r.train_runtime_hours, c.runtime_a * r.n_s + c.runtime_b);
  }
  EXPECT_THROW(generate_performance(c, {"a"}, truths), ValidationError);
}

TEST(Performance, ZeroSlopeGivesConstantF1) {
  SynthConfig c;
  c.c1 = 0.0;
  c.noise_sigma = 0.0;
  c.n_domains = 4;
  std::vector<std::string> ids{"a", "b", "c", "d"};
  for (const auto& r : generate_performance(c, ids, generate_truths(c))) EXPECT_EQ(r.macro_f1, c.c0);
}

TEST(Performance, NoiselessOrderFollowsJs) {
  SynthConfig c;
  c.noise_sigma = 0.0;
  c.n_domains = 8;
  c.n_s_settings = {100};
  const auto truths = generate_truths(c);
  std::vector<std::string> ids;
  for (int d = 0; d < 8; ++d) ids.push_back(domain_name(d));
  std::map<std::string, std::vector<std::pair<double, std::string>>> by_f1, by_js;
  for (const auto& r : generate_performance(c, ids, truths)) {
    const auto s = static_cast<std::size_t>(std::stoi(r.source_id.substr(6)));
    const auto t = static_cast<std::size_t>(std::stoi(r.target_id.substr(6)));
    by_f1[r.target_id].push_back({-r.macro_f1, r.source_id});
    by_js[r.target_id].push_back({measures::js_divergence(truths[s], truths[t]), r.source_id});
  }
  for (auto& [target, v] : by_f1) {
    std::sort(v.begin(), v.end());
    auto& w = by_js[target];
    std::sort(w.begin(), w.end());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i].second, w[i].second) << target;
  }
}

TEST(Embeddings, DeterministicTable) {
  SynthConfig c;
  c.vocab_size = 200;
  std::vector<double> base;
  generate_truths(c, &base);
  std::vector<std::string> terms;
  for (int i = 0; i < 200; ++i) terms.push_back(term_name(i));
  const auto a = generate_embedding_table(c, terms, base);
  const auto b = generate_embedding_table(c, terms, base);
  EXPECT_EQ(a.dimension(), 16u);
  EXPECT_EQ(a.size(), 200u);
  EXPECT_EQ(a.serialize(), b.serialize());
  for (const auto& t : terms) {
    for (double v : a.lookup(t)) EXPECT_TRUE(std::isfinite(v));
  }
}
