#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/embeddings.hpp"
#include "divrank/ranker.hpp"
#include "json.hpp"

namespace divrank::synth {

struct SynthConfig {
  int n_domains = 20;
  int vocab_size = 2000;
  double zipf_exponent = 1.0;
  // Per-domain multiplicative perturbation of the base distribution: each
  // term's weight is scaled by a Gamma variate with mean 1 and coefficient of
  // variation delta_d. Each domain draws its own delta_d uniformly from
  // delta * [1 - delta_spread, 1 + delta_spread], so pairs differ in how far
  // apart they are.
  double delta = 0.5;
  double delta_spread = 0.9;
  int docs_per_domain = 1500;
  int doc_length_min = 20;
  int doc_length_max = 60;
  // f1(s, t) = clamp(c0 - c1 * JS(truth_s, truth_t) + N(0, noise_sigma), 0, 1)
  double c0 = 0.9;
  double c1 = 2.0;
  double noise_sigma = 0.02;
  // Training hours per pair: runtime_a * n_s + runtime_b.
  double runtime_a = 2.76e-5;
  double runtime_b = 0.054;
  std::vector<int> n_s_settings = {200, 1000};
  int embedding_dim = 16;
  int embedding_contexts = 64;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j, SynthConfig defaults);
  static SynthConfig from_json(const nlohmann::json& j);
};

std::string domain_name(int index);
std::string term_name(int index);

struct SynthDomains {
  std::vector<std::string> domain_ids;
  std::vector<std::string> terms;
  std::vector<double> base;                 // Zipf over terms
  std::vector<std::vector<double>> truths;  // per-domain true unigram distribution
  std::vector<std::vector<Document>> pools;
};

// Documents are bags of tokens drawn from each domain's true distribution,
// with a rating in 1-4 (labelled under either merge scheme).
SynthDomains generate_domains(const SynthConfig& cfg);

// Truth distributions only, without sampling documents.
std::vector<std::vector<double>> generate_truths(const SynthConfig& cfg, std::vector<double>* base = nullptr);

// One record per ordered pair and n_s setting, f1 driven by the true JS.
std::vector<PerformanceRecord> generate_performance(const SynthConfig& cfg,
                                                    const std::vector<std::string>& domain_ids,
                                                    const std::vector<std::vector<double>>& truths);

// Rank-`embedding_dim` factorization of a positive-PMI term x context matrix
// whose context profiles are random per term, with context marginals taken
// under the base distribution.
EmbeddingTable generate_embedding_table(const SynthConfig& cfg, const std::vector<std::string>& terms,
                                        const std::vector<double>& base);

}  // namespace divrank::synth
