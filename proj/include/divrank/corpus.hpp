#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace divrank {

enum class Label { negative, positive };
enum class Split { train, validation, test };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);

struct Document {
  std::string id;
  std::string text;
  std::optional<int> rating;
  std::optional<Label> label;
};

struct DomainCorpus {
  std::string domain_id;
  Split split = Split::train;
  std::vector<Document> documents;
  // Number of source-task training samples this split was drawn for.
  int sample_size_setting = 0;
};

// Lowercases, splits on Unicode whitespace and strips leading/trailing
// punctuation from every token. Input is UTF-8; invalid bytes pass through
// unchanged as single code units.
std::vector<std::string> tokenize(std::string_view text);

// Tag recorded next to every artifact derived from tokenized text.
inline constexpr std::string_view kTokenizerId = "lower+ws+punct-strip/v1";

// ---------------------------------------------------------------------------
// Rating merge

enum class RatingScheme {
  literal,  // 1-2 negative, 3-4 positive, 5 dropped
  zhang,    // 1-2 negative, 4-5 positive, 3 dropped
};

std::string_view to_string(RatingScheme scheme);
RatingScheme parse_rating_scheme(std::string_view text);

enum class MergeOutcome { labeled, dropped, rejected };

struct MergeResult {
  MergeOutcome outcome;
  Document document;
};

MergeResult merge_ratings(Document doc, RatingScheme scheme);

struct MergeStats {
  std::size_t labeled = 0;
  std::size_t dropped = 0;
  std::size_t rejected = 0;
  // Documents that arrived with an explicit label and no rating.
  std::size_t prelabeled = 0;
};

// Applies the scheme to every document: documents with a rating are merged,
// documents with only a label are kept, the rest are rejected.
std::vector<Document> label_documents(std::vector<Document> docs, RatingScheme scheme,
                                      MergeStats& stats);

// ---------------------------------------------------------------------------
// Splits

struct SplitTriple {
  DomainCorpus train;
  DomainCorpus validation;
  DomainCorpus test;
};

// Uniform samples without replacement. The pool is permuted once from the
// seed; validation takes the first n_holdout documents, test the next
// n_holdout, train the next n_train. Holdouts are therefore identical for
// every n_train under one seed. Returns nullopt when the pool is too small.
std::optional<SplitTriple> sample_splits(const std::string& domain_id,
                                         const std::vector<Document>& pool, std::size_t n_train,
                                         std::size_t n_holdout, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  std::optional<std::size_t> index_of(std::string_view term) const;
  const std::string& hash() const { return hash_; }

  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  // Verifies the sidecar hash when present.
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string hash_;
};

struct VocabularyBuild {
  Vocabulary vocabulary;
  std::optional<std::string> warning;
};

using TermCounts = std::unordered_map<std::string, std::uint64_t>;

TermCounts count_terms(const DomainCorpus& corpus);

// Top-`size` terms by global frequency over all corpora, ties broken
// lexicographically.
VocabularyBuild build_vocabulary(const std::vector<const DomainCorpus*>& corpora,
                                 std::size_t size = 10000);
VocabularyBuild build_vocabulary_from_counts(const std::vector<TermCounts>& counts,
                                             std::size_t size);

// ---------------------------------------------------------------------------
// Term distributions

struct TermDistribution {
  std::string vocab_hash;
  // mass[i] = count(term i) / total tokens, OOV tokens included in the total.
  std::vector<double> mass;
  double coverage = 0.0;
  std::uint64_t token_count = 0;

  std::string serialize() const;
  static TermDistribution parse(std::string_view text, std::size_t vocab_size);
};

TermDistribution term_distribution(const DomainCorpus& corpus, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Corpus files

// One JSON object per line: {"id", "text", "rating", "label"}; only "text" is
// required. Missing ids become the 1-based line number.
std::vector<Document> read_documents(const std::filesystem::path& path);
std::vector<Document> parse_documents(std::string_view text, const std::string& source_name);
std::string serialize_documents(const std::vector<Document>& docs);

}  // namespace divrank
