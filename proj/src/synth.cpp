#include "divrank/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "divrank/common.hpp"
#include "divrank/measures.hpp"

namespace divrank::synth {
namespace {

// Seed streams, kept apart so changing one stage never shifts another.
constexpr std::uint64_t kTruthStream = 1'000;
constexpr std::uint64_t kDocumentStream = 2'000;
constexpr std::uint64_t kNoiseStream = 3'000;
constexpr std::uint64_t kEmbeddingStream = 4'000;
constexpr std::uint64_t kScaleStream = 5'000;

}  // namespace

void SynthConfig::validate() const {
  if (n_domains < 2) throw ValidationError("synth: n_domains must be >= 2");
  if (vocab_size < 2) throw ValidationError("synth: vocab_size must be >= 2");
  if (!(zipf_exponent > 0.0)) throw ValidationError("synth: zipf_exponent must be > 0");
  if (!(delta >= 0.0)) throw ValidationError("synth: delta must be >= 0");
  if (!(delta_spread >= 0.0 && delta_spread < 1.0)) {
    throw ValidationError("synth: delta_spread must lie in [0, 1)");
  }
  if (docs_per_domain < 1) throw ValidationError("synth: docs_per_domain must be >= 1");
  if (doc_length_min < 1 || doc_length_min > doc_length_max) {
    throw ValidationError("synth: need 1 <= doc_length_min <= doc_length_max");
  }
  if (!(c0 > 0.0 && c0 <= 1.0)) throw ValidationError("synth: c0 must lie in (0, 1]");
  if (!(c1 >= 0.0)) throw ValidationError("synth: c1 must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ValidationError("synth: noise_sigma must be >= 0");
  if (!(runtime_a >= 0.0) || !(runtime_b >= 0.0)) {
    throw ValidationError("synth: runtime law coefficients must be >= 0");
  }
  if (n_s_settings.empty()) throw ValidationError("synth: need at least one n_s setting");
  for (int n_s : n_s_settings) {
    if (n_s < 1) throw ValidationError("synth: n_s settings must be positive");
    if (!(runtime_a * n_s + runtime_b > 0.0)) {
      throw ValidationError("synth: runtime law must give positive hours");
    }
  }
  if (embedding_dim < 1 || embedding_dim > std::min(vocab_size, embedding_contexts)) {
    throw ValidationError("synth: embedding_dim must lie in [1, min(vocab_size, contexts)]");
  }
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n_domains"] = n_domains;
  j["vocab_size"] = vocab_size;
  j["zipf_exponent"] = zipf_exponent;
  j["delta"] = delta;
  j["delta_spread"] = delta_spread;
  j["docs_per_domain"] = docs_per_domain;
  j["doc_length"] = {doc_length_min, doc_length_max};
  j["law"] = {{"c0", c0}, {"c1", c1}, {"noise_sigma", noise_sigma}};
  j["runtime_law"] = {{"a", runtime_a}, {"b", runtime_b}};
  j["n_s"] = n_s_settings;
  j["embedding_dim"] = embedding_dim;
  j["embedding_contexts"] = embedding_contexts;
  j["seed"] = seed;
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j, SynthConfig c) {
  try {
    c.n_domains = j.value("n_domains", c.n_domains);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.zipf_exponent = j.value("zipf_exponent", c.zipf_exponent);
    c.delta = j.value("delta", c.delta);
    c.delta_spread = j.value("delta_spread", c.delta_spread);
    c.docs_per_domain = j.value("docs_per_domain", c.docs_per_domain);
    if (j.contains("doc_length")) {
      c.doc_length_min = j["doc_length"].at(0).get<int>();
      c.doc_length_max = j["doc_length"].at(1).get<int>();
    }
    if (j.contains("law")) {
      const auto& law = j["law"];
      c.c0 = law.value("c0", c.c0);
      c.c1 = law.value("c1", c.c1);
      c.noise_sigma = law.value("noise_sigma", c.noise_sigma);
    }
    if (j.contains("runtime_law")) {
      c.runtime_a = j["runtime_law"].value("a", c.runtime_a);
      c.runtime_b = j["runtime_law"].value("b", c.runtime_b);
    }
    if (j.contains("n_s")) c.n_s_settings = j["n_s"].get<std::vector<int>>();
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.embedding_contexts = j.value("embedding_contexts", c.embedding_contexts);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  return c;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) { return from_json(j, SynthConfig{}); }

std::string domain_name(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "synth_%02d", index);
  return buffer;
}

std::string term_name(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "w%05d", index);
  return buffer;
}

std::vector<std::vector<double>> generate_truths(const SynthConfig& cfg, std::vector<double>* base_out) {
  cfg.validate();
  std::vector<double> base(static_cast<std::size_t>(cfg.vocab_size));
  double total = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
    total += base[i];
  }
  for (auto& x : base) x /= total;

  std::vector<std::vector<double>> truths;
  std::mt19937_64 scale_rng(derive_seed(cfg.seed, kScaleStream));
  std::uniform_real_distribution<double> scale(1.0 - cfg.delta_spread, 1.0 + cfg.delta_spread);
  for (int d = 0; d < cfg.n_domains; ++d) {
    auto p = base;
    const double delta_d = cfg.delta * scale(scale_rng);
    if (delta_d > 0.0) {
      std::mt19937_64 rng(derive_seed(cfg.seed, kTruthStream + static_cast<std::uint64_t>(d)));
      const double shape = 1.0 / (delta_d * delta_d);
      std::gamma_distribution<double> gamma(shape, 1.0 / shape);
      for (auto& x : p) x *= gamma(rng);
      p = measures::renormalize(p);
    }
    truths.push_back(std::move(p));
  }
  if (base_out) *base_out = std::move(base);
  return truths;
}

SynthDomains generate_domains(const SynthConfig& cfg) {
  SynthDomains out;
  out.truths = generate_truths(cfg, &out.base);
  for (int i = 0; i < cfg.vocab_size; ++i) out.terms.push_back(term_name(i));
  for (int d = 0; d < cfg.n_domains; ++d) {
    out.domain_ids.push_back(domain_name(d));
    std::mt19937_64 rng(derive_seed(cfg.seed, kDocumentStream + static_cast<std::uint64_t>(d)));
    std::discrete_distribution<int> term(out.truths[d].begin(), out.truths[d].end());
    std::uniform_int_distribution<int> length(cfg.doc_length_min, cfg.doc_length_max);
    std::uniform_int_distribution<int> rating(1, 4);
    std::vector<Document> pool;
    pool.reserve(static_cast<std::size_t>(cfg.docs_per_domain));
    for (int i = 0; i < cfg.docs_per_domain; ++i) {
      Document doc;
      doc.id = out.domain_ids.back() + "-" + std::to_string(i);
      const int n = length(rng);
      for (int k = 0; k < n; ++k) {
        if (k) doc.text += ' ';
        doc.text += out.terms[static_cast<std::size_t>(term(rng))];
      }
      doc.rating = rating(rng);
      pool.push_back(std::move(doc));
    }
    out.pools.push_back(std::move(pool));
  }
  return out;
}

std::vector<PerformanceRecord> generate_performance(const SynthConfig& cfg,
                                                    const std::vector<std::string>& domain_ids,
                                                    const std::vector<std::vector<double>>& truths) {
  cfg.validate();
  if (domain_ids.size() != truths.size()) {
    throw ValidationError("synth: domain ids and truths differ in count");
  }
  std::vector<PerformanceRecord> records;
  std::mt19937_64 rng(derive_seed(cfg.seed, kNoiseStream));
  std::normal_distribution<double> noise(0.0, 1.0);
  auto settings = cfg.n_s_settings;
  std::sort(settings.begin(), settings.end());
  for (std::size_t s = 0; s < truths.size(); ++s) {
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (s == t) continue;
      const double js = measures::js_divergence(truths[s], truths[t]);
      for (int n_s : settings) {
        const double eps = cfg.noise_sigma * noise(rng);
        PerformanceRecord r;
        r.source_id = domain_ids[s];
        r.target_id = domain_ids[t];
        r.n_s = n_s;
        r.macro_f1 = std::clamp(cfg.c0 - cfg.c1 * js + eps, 0.0, 1.0);
        r.train_runtime_hours = cfg.runtime_a * n_s + cfg.runtime_b;
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

EmbeddingTable generate_embedding_table(const SynthConfig& cfg, const std::vector<std::string>& terms,
                                        const std::vector<double>& base) {
  cfg.validate();
  const auto n_terms = static_cast<Eigen::Index>(terms.size());
  const auto n_contexts = static_cast<Eigen::Index>(cfg.embedding_contexts);
  std::mt19937_64 rng(derive_seed(cfg.seed, kEmbeddingStream));
  std::gamma_distribution<double> profile(0.5, 1.0);

  // p(c | w): sparse random context profile per term.
  Eigen::MatrixXd cond(n_terms, n_contexts);
  for (Eigen::Index w = 0; w < n_terms; ++w) {
    double row_total = 0.0;
    for (Eigen::Index c = 0; c < n_contexts; ++c) {
      cond(w, c) = profile(rng) + 1e-12;
      row_total += cond(w, c);
    }
    cond.row(w) /= row_total;
  }
  Eigen::VectorXd context_marginal = Eigen::VectorXd::Zero(n_contexts);
  for (Eigen::Index w = 0; w < n_terms; ++w) {
    context_marginal += base[static_cast<std::size_t>(w)] * cond.row(w).transpose();
  }
  Eigen::MatrixXd ppmi(n_terms, n_contexts);
  for (Eigen::Index w = 0; w < n_terms; ++w) {
    for (Eigen::Index c = 0; c < n_contexts; ++c) {
      ppmi(w, c) = std::max(0.0, std::log(cond(w, c) / context_marginal(c)));
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(ppmi, Eigen::ComputeThinU);
  const auto dim = static_cast<Eigen::Index>(cfg.embedding_dim);
  std::vector<double> data(static_cast<std::size_t>(n_terms * dim));
  for (Eigen::Index w = 0; w < n_terms; ++w) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      data[static_cast<std::size_t>(w * dim + d)] =
          svd.matrixU()(w, d) * std::sqrt(svd.singularValues()(d));
    }
  }
  // Singular vectors are defined up to sign; make each column's largest entry positive.
  for (Eigen::Index d = 0; d < dim; ++d) {
    Eigen::Index arg = 0;
    double best = 0.0;
    for (Eigen::Index w = 0; w < n_terms; ++w) {
      const double v = std::abs(data[static_cast<std::size_t>(w * dim + d)]);
      if (v > best) {
        best = v;
        arg = w;
      }
    }
    if (data[static_cast<std::size_t>(arg * dim + d)] < 0.0) {
      for (Eigen::Index w = 0; w < n_terms; ++w) data[static_cast<std::size_t>(w * dim + d)] *= -1.0;
    }
  }
  return EmbeddingTable(static_cast<std::size_t>(dim), terms, std::move(data));
}

}  // namespace divrank::synth
