#include "divrank/corpus.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "divrank/common.hpp"
#include "json.hpp"

namespace divrank {

std::string_view to_string(Label label) {
  return label == Label::negative ? "negative" : "positive";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "train";
}

Label parse_label(std::string_view text) {
  if (text == "negative") return Label::negative;
  if (text == "positive") return Label::positive;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::string_view to_string(RatingScheme scheme) {
  return scheme == RatingScheme::literal ? "literal" : "zhang";
}

RatingScheme parse_rating_scheme(std::string_view text) {
  if (text == "literal") return RatingScheme::literal;
  if (text == "zhang") return RatingScheme::zhang;
  throw ValidationError("unknown rating scheme '" + std::string(text) + "'");
}

MergeResult merge_ratings(Document doc, RatingScheme scheme) {
  if (!doc.rating || *doc.rating < 1 || *doc.rating > 5) {
    return {MergeOutcome::rejected, std::move(doc)};
  }
  const int r = *doc.rating;
  std::optional<Label> label;
  if (r <= 2) {
    label = Label::negative;
  } else if (scheme == RatingScheme::literal) {
    if (r <= 4) label = Label::positive;
  } else if (r >= 4) {
    label = Label::positive;
  }
  if (!label) {
    return {MergeOutcome::dropped, std::move(doc)};
  }
  doc.label = label;
  return {MergeOutcome::labeled, std::move(doc)};
}

std::vector<Document> label_documents(std::vector<Document> docs, RatingScheme scheme,
                                      MergeStats& stats) {
  std::vector<Document> kept;
  kept.reserve(docs.size());
  for (auto& doc : docs) {
    if (!doc.rating) {
      if (doc.label) {
        ++stats.prelabeled;
        kept.push_back(std::move(doc));
      } else {
        ++stats.rejected;
      }
      continue;
    }
    auto merged = merge_ratings(std::move(doc), scheme);
    switch (merged.outcome) {
      case MergeOutcome::labeled:
        ++stats.labeled;
        kept.push_back(std::move(merged.document));
        break;
      case MergeOutcome::dropped:
        ++stats.dropped;
        break;
      case MergeOutcome::rejected:
        ++stats.rejected;
        break;
    }
  }
  return kept;
}

std::optional<SplitTriple> sample_splits(const std::string& domain_id,
                                         const std::vector<Document>& pool, std::size_t n_train,
                                         std::size_t n_holdout, std::uint64_t seed) {
  if (pool.size() < n_train + 2 * n_holdout) {
    return std::nullopt;
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto take = [&](Split split, std::size_t offset, std::size_t count) {
    DomainCorpus corpus;
    corpus.domain_id = domain_id;
    corpus.split = split;
    corpus.sample_size_setting = static_cast<int>(n_train);
    corpus.documents.reserve(count);
    for (std::size_t i = offset; i < offset + count; ++i) {
      corpus.documents.push_back(pool[order[i]]);
    }
    return corpus;
  };
  return SplitTriple{take(Split::train, 2 * n_holdout, n_train),
                     take(Split::validation, 0, n_holdout),
                     take(Split::test, n_holdout, n_holdout)};
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].empty() || terms_[i].find_first_of(" \t\r\n") != std::string::npos) {
      throw ValidationError("vocabulary term " + std::to_string(i) + " is empty or has whitespace");
    }
    if (!index_.emplace(terms_[i], i).second) {
      throw ValidationError("duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
  hash_ = sha256_hex(serialize());
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
  const auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& term : terms_) {
    out += term;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> terms;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    terms.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return Vocabulary(std::move(terms));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  write_file(path, serialize());
  auto sidecar = path;
  sidecar += ".sha256";
  write_file(sidecar, hash_ + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto vocab = parse(read_file(path));
  auto sidecar = path;
  sidecar += ".sha256";
  if (std::filesystem::exists(sidecar)) {
    const auto expected = std::string(trim(read_file(sidecar)));
    if (expected != vocab.hash()) {
      throw ValidationError("vocabulary " + path.string() + " does not match its hash sidecar");
    }
  }
  return vocab;
}

TermCounts count_terms(const DomainCorpus& corpus) {
  TermCounts counts;
  for (const auto& doc : corpus.documents) {
    for (auto& token : tokenize(doc.text)) {
      ++counts[std::move(token)];
    }
  }
  return counts;
}

VocabularyBuild build_vocabulary_from_counts(const std::vector<TermCounts>& counts,
                                             std::size_t size) {
  TermCounts total;
  for (const auto& c : counts) {
    for (const auto& [term, n] : c) {
      total[term] += n;
    }
  }
  if (total.empty()) {
    throw ValidationError("cannot build a vocabulary from corpora without tokens");
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(total.begin(), total.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  VocabularyBuild build;
  if (ranked.size() < size) {
    build.warning = "only " + std::to_string(ranked.size()) + " distinct terms available, " +
                    std::to_string(size) + " requested";
  } else {
    ranked.resize(size);
  }
  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [term, n] : ranked) {
    terms.push_back(std::move(term));
  }
  build.vocabulary = Vocabulary(std::move(terms));
  return build;
}

VocabularyBuild build_vocabulary(const std::vector<const DomainCorpus*>& corpora,
                                 std::size_t size) {
  std::vector<TermCounts> counts;
  counts.reserve(corpora.size());
  for (const auto* corpus : corpora) {
    counts.push_back(count_terms(*corpus));
  }
  return build_vocabulary_from_counts(counts, size);
}

// ---------------------------------------------------------------------------

TermDistribution term_distribution(const DomainCorpus& corpus, const Vocabulary& vocab) {
  if (vocab.size() == 0) {
    throw ValidationError("term distribution requires a non-empty vocabulary");
  }
  std::vector<std::uint64_t> counts(vocab.size(), 0);
  std::uint64_t total = 0;
  std::uint64_t in_vocab = 0;
  for (const auto& doc : corpus.documents) {
    for (const auto& token : tokenize(doc.text)) {
      ++total;
      if (const auto idx = vocab.index_of(token)) {
        ++counts[*idx];
        ++in_vocab;
      }
    }
  }
  if (total == 0) {
    throw ValidationError("corpus " + corpus.domain_id + "/" + std::string(to_string(corpus.split)) +
                          " has no tokens");
  }
  TermDistribution td;
  td.vocab_hash = vocab.hash();
  td.token_count = total;
  td.mass.resize(vocab.size());
  const double denom = static_cast<double>(total);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    td.mass[i] = static_cast<double>(counts[i]) / denom;
  }
  td.coverage = static_cast<double>(in_vocab) / denom;
  return td;
}

std::string TermDistribution::serialize() const {
  std::ostringstream out;
  out << "#vocab_hash=" << vocab_hash << " token_count=" << token_count
      << " coverage=" << format_double(coverage) << '\n';
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] != 0.0) {
      out << i << '\t' << format_double(mass[i]) << '\n';
    }
  }
  return out.str();
}

TermDistribution TermDistribution::parse(std::string_view text, std::size_t vocab_size) {
  TermDistribution td;
  td.mass.assign(vocab_size, 0.0);
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0].rfind("#vocab_hash=", 0) != 0) {
    throw ValidationError("term distribution header missing");
  }
  for (const auto& field : split(lines[0].substr(1), ' ')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("malformed term distribution header field '" + field + "'");
    }
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "vocab_hash") {
      td.vocab_hash = value;
    } else if (key == "token_count") {
      td.token_count = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "coverage") {
      td.coverage = parse_double(value);
    }
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 2) {
      throw ValidationError("malformed term distribution line " + std::to_string(i + 1));
    }
    const auto index = parse_int(fields[0]);
    if (index < 0 || static_cast<std::size_t>(index) >= vocab_size) {
      throw ValidationError("term distribution index out of range at line " +
                            std::to_string(i + 1));
    }
    td.mass[static_cast<std::size_t>(index)] = parse_double(fields[1]);
  }
  return td;
}

// ---------------------------------------------------------------------------

std::vector<Document> parse_documents(std::string_view text, const std::string& source_name) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto where = source_name + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON record: " + e.what());
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
      throw ValidationError(where + ": record needs a string 'text' field");
    }
    Document doc;
    if (record.contains("id") && !record["id"].is_null()) {
      doc.id = record["id"].is_string() ? record["id"].get<std::string>() : record["id"].dump();
    } else {
      doc.id = std::to_string(line_no);
    }
    doc.text = record["text"].get<std::string>();
    if (trim(doc.text).empty()) {
      throw ValidationError(where + ": empty text");
    }
    if (record.contains("rating") && !record["rating"].is_null()) {
      if (!record["rating"].is_number_integer()) {
        throw ValidationError(where + ": rating must be an integer");
      }
      doc.rating = record["rating"].get<int>();
    }
    if (record.contains("label") && !record["label"].is_null()) {
      try {
        doc.label = parse_label(record["label"].get<std::string>());
      } catch (const std::exception& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
  return parse_documents(read_file(path), path.string());
}

std::string serialize_documents(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& doc : docs) {
    nlohmann::ordered_json record;
    record["id"] = doc.id;
    record["text"] = doc.text;
    if (doc.rating) record["rating"] = *doc.rating;
    if (doc.label) record["label"] = std::string(to_string(*doc.label));
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace divrank
