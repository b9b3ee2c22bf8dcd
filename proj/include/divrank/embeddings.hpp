#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "divrank/corpus.hpp"

namespace divrank {

// Static token-embedding table, immutable after construction.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, std::vector<std::string> tokens, std::vector<double> data,
                 std::string hash = {});

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Empty span when the token has no vector.
  std::span<const double> lookup(std::string_view token) const;
  const std::string& hash() const { return hash_; }

  EmbeddingTable scaled(double factor) const;
  std::string serialize() const;

 private:
  std::size_t dimension_;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string hash_;
};

// word2vec text format: optional "<count> <dim>" header, then
// "token v1 ... vd" rows. A first line of exactly two non-negative integers is
// read as the header.
EmbeddingTable parse_embedding_table(std::string_view text, const std::string& source_name);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

using UnigramProbabilities = std::unordered_map<std::string, double>;

// Token probabilities estimated over the corpus's own tokens.
UnigramProbabilities unigram_probabilities(const DomainCorpus& corpus);

inline constexpr double kDefaultSmoothing = 1e-3;

// (1/n) * sum_i v_{w_i} * sqrt(a / p(w_i)) over the n tokens with a vector.
// nullopt when no token has a vector ("unembeddable document").
std::optional<std::vector<double>> embed_document(const std::vector<std::string>& tokens,
                                                  const EmbeddingTable& table,
                                                  const UnigramProbabilities& unigram_p, double a);

struct DomainEmbedding {
  std::vector<double> vector;
  std::size_t n_pooled_documents = 0;
  std::size_t n_skipped_documents = 0;
  double smoothing_a = kDefaultSmoothing;
  // Fraction of corpus tokens that have an embedding.
  double coverage_fraction = 0.0;
  std::string table_hash;

  // "dim" line followed by one value per line.
  std::string serialize_vector() const;
  std::string serialize_metadata() const;
  static DomainEmbedding parse(std::string_view vector_text, std::string_view metadata_text);
};

// Mean of the per-document embeddings; unembeddable documents are skipped.
DomainEmbedding embed_domain(const DomainCorpus& corpus, const EmbeddingTable& table,
                             const UnigramProbabilities& unigram_p, double a = kDefaultSmoothing);

}  // namespace divrank
