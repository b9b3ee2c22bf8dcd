#include "divrank/embeddings.hpp"

#include <cmath>
#include <sstream>

#include "divrank/common.hpp"
#include "json.hpp"

namespace divrank {

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::vector<std::string> tokens,
                               std::vector<double> data, std::string hash)
    : dimension_(dimension), tokens_(std::move(tokens)), data_(std::move(data)) {
  if (dimension_ == 0) {
    throw ValidationError("embedding dimension must be at least 1");
  }
  if (data_.size() != dimension_ * tokens_.size()) {
    throw ValidationError("embedding data size does not match tokens x dimension");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw ValidationError("duplicate embedding token '" + tokens_[i] + "'");
    }
  }
  hash_ = hash.empty() ? sha256_hex(serialize()) : std::move(hash);
}

std::span<const double> EmbeddingTable::lookup(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return {};
  return {data_.data() + it->second * dimension_, dimension_};
}

EmbeddingTable EmbeddingTable::scaled(double factor) const {
  auto data = data_;
  for (auto& x : data) x *= factor;
  return EmbeddingTable(dimension_, tokens_, std::move(data));
}

std::string EmbeddingTable::serialize() const {
  std::string out = std::to_string(tokens_.size()) + " " + std::to_string(dimension_) + "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    for (std::size_t d = 0; d < dimension_; ++d) {
      out += ' ';
      out += format_double(data_[i * dimension_ + d]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto start = line.find_first_not_of(" \t\r", pos);
    if (start == std::string_view::npos) break;
    auto end = line.find_first_of(" \t\r", start);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(start, end - start));
    pos = end;
  }
  return fields;
}

bool is_unsigned_integer(std::string_view s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

}  // namespace

EmbeddingTable parse_embedding_table(std::string_view text, const std::string& source_name) {
  std::vector<std::string> tokens;
  std::vector<double> data;
  std::size_t dimension = 0;
  std::optional<std::size_t> declared_count;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool first = true;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const auto fields = fields_of(line);
    if (fields.empty()) continue;
    const auto where = source_name + ":" + std::to_string(line_no);
    if (first) {
      first = false;
      if (fields.size() == 2 && is_unsigned_integer(fields[0]) && is_unsigned_integer(fields[1])) {
        declared_count = static_cast<std::size_t>(parse_int(fields[0]));
        dimension = static_cast<std::size_t>(parse_int(fields[1]));
        if (dimension == 0) {
          throw ValidationError(where + ": header declares dimension 0");
        }
        continue;
      }
    }
    if (fields.size() < 2) {
      throw ValidationError(where + ": row has no vector components");
    }
    const std::size_t row_dim = fields.size() - 1;
    if (dimension == 0) {
      dimension = row_dim;
    } else if (row_dim != dimension) {
      throw ValidationError(where + ": dimension mismatch, expected " + std::to_string(dimension) +
                            " got " + std::to_string(row_dim));
    }
    tokens.emplace_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double value = 0.0;
      try {
        value = parse_double(fields[i]);
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
      if (!std::isfinite(value)) {
        throw ValidationError(where + ": non-finite component");
      }
      data.push_back(value);
    }
  }
  if (tokens.empty()) {
    throw ValidationError(source_name + ": no entries");
  }
  if (declared_count && *declared_count != tokens.size()) {
    throw ValidationError(source_name + ": header declares " + std::to_string(*declared_count) +
                          " rows, found " + std::to_string(tokens.size()));
  }
  try {
    return EmbeddingTable(dimension, std::move(tokens), std::move(data), sha256_hex(text));
  } catch (const ValidationError& e) {
    throw ValidationError(source_name + ": " + e.what());
  }
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  return parse_embedding_table(read_file(path), path.string());
}

UnigramProbabilities unigram_probabilities(const DomainCorpus& corpus) {
  const auto counts = count_terms(corpus);
  std::uint64_t total = 0;
  for (const auto& [term, n] : counts) total += n;
  UnigramProbabilities p;
  p.reserve(counts.size());
  for (const auto& [term, n] : counts) {
    p.emplace(term, static_cast<double>(n) / static_cast<double>(total));
  }
  return p;
}

std::optional<std::vector<double>> embed_document(const std::vector<std::string>& tokens,
                                                  const EmbeddingTable& table,
                                                  const UnigramProbabilities& unigram_p,
                                                  double a) {
  if (!(a > 0.0)) {
    throw ValidationError("smoothing factor a must be positive");
  }
  std::vector<double> sum(table.dimension(), 0.0);
  std::size_t n = 0;
  for (const auto& token : tokens) {
    const auto v = table.lookup(token);
    if (v.empty()) continue;
    const auto it = unigram_p.find(token);
    if (it == unigram_p.end() || !(it->second > 0.0)) {
      throw ValidationError("no positive unigram probability for embedded token '" + token + "'");
    }
    const double weight = std::sqrt(a / it->second);
    for (std::size_t d = 0; d < v.size(); ++d) {
      sum[d] += weight * v[d];
    }
    ++n;
  }
  if (n == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(n);
  return sum;
}

DomainEmbedding embed_domain(const DomainCorpus& corpus, const EmbeddingTable& table,
                             const UnigramProbabilities& unigram_p, double a) {
  DomainEmbedding out;
  out.smoothing_a = a;
  out.table_hash = table.hash();
  out.vector.assign(table.dimension(), 0.0);
  std::uint64_t tokens_total = 0;
  std::uint64_t tokens_embedded = 0;
  for (const auto& doc : corpus.documents) {
    const auto tokens = tokenize(doc.text);
    tokens_total += tokens.size();
    for (const auto& t : tokens) {
      if (!table.lookup(t).empty()) ++tokens_embedded;
    }
    const auto v = embed_document(tokens, table, unigram_p, a);
    if (!v) {
      ++out.n_skipped_documents;
      continue;
    }
    for (std::size_t d = 0; d < v->size(); ++d) {
      out.vector[d] += (*v)[d];
    }
    ++out.n_pooled_documents;
  }
  if (out.n_pooled_documents == 0) {
    throw ValidationError("corpus " + corpus.domain_id + " has no embeddable documents");
  }
  for (auto& x : out.vector) x /= static_cast<double>(out.n_pooled_documents);
  out.coverage_fraction =
      tokens_total == 0 ? 0.0 : static_cast<double>(tokens_embedded) / static_cast<double>(tokens_total);
  return out;
}

std::string DomainEmbedding::serialize_vector() const {
  std::string out = std::to_string(vector.size()) + "\n";
  for (double x : vector) {
    out += format_double(x);
    out += '\n';
  }
  return out;
}

std::string DomainEmbedding::serialize_metadata() const {
  nlohmann::ordered_json meta;
  meta["a"] = smoothing_a;
  meta["coverage_fraction"] = coverage_fraction;
  meta["n_pooled_documents"] = n_pooled_documents;
  meta["n_skipped_documents"] = n_skipped_documents;
  meta["table_hash"] = table_hash;
  meta["unigram_scope"] = "domain";
  return meta.dump(2) + "\n";
}

DomainEmbedding DomainEmbedding::parse(std::string_view vector_text, std::string_view metadata_text) {
  DomainEmbedding out;
  const auto lines = split(vector_text, '\n');
  if (lines.empty()) {
    throw ValidationError("empty domain embedding file");
  }
  const auto dim = static_cast<std::size_t>(parse_int(lines[0]));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    out.vector.push_back(parse_double(lines[i]));
  }
  if (out.vector.size() != dim) {
    throw ValidationError("domain embedding declares " + std::to_string(dim) + " components, found " +
                          std::to_string(out.vector.size()));
  }
  const auto meta = nlohmann::json::parse(metadata_text);
  out.smoothing_a = meta.at("a").get<double>();
  out.coverage_fraction = meta.at("coverage_fraction").get<double>();
  out.n_pooled_documents = meta.at("n_pooled_documents").get<std::size_t>();
  out.n_skipped_documents = meta.value("n_skipped_documents", std::size_t{0});
  out.table_hash = meta.at("table_hash").get<std::string>();
  return out;
}

}  // namespace divrank
