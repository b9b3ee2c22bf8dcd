#include "divrank/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <set>

#include "divrank/common.hpp"
#include "divrank/embeddings.hpp"
#include "divrank/eval.hpp"
#include "divrank/features.hpp"

namespace divrank::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string_view to_string(VocabularyMode mode) {
  return mode == VocabularyMode::global ? "global" : "per_pair";
}

VocabularyMode parse_vocab_mode(std::string_view text) {
  if (text == "global") return VocabularyMode::global;
  if (text == "per_pair") return VocabularyMode::per_pair;
  throw ValidationError("unknown vocabulary mode '" + std::string(text) + "'");
}

fs::path resolve_against(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

void PipelineConfig::validate() const {
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  if (n_s.empty()) throw ValidationError("sampling.n_s must list at least one setting");
  std::set<int> distinct(n_s.begin(), n_s.end());
  if (distinct.size() != n_s.size()) throw ValidationError("sampling.n_s has duplicates");
  for (int v : n_s) {
    if (v < 1) throw ValidationError("sampling.n_s entries must be positive");
  }
  if (n_holdout < 1) throw ValidationError("sampling.n_holdout must be >= 1");
  if (vocab_size < 1) throw ValidationError("vocabulary.size must be >= 1");
  if (!(smoothing_a > 0.0)) throw ValidationError("embeddings.a must be positive");
  measures.validate();
  gbt.validate();
  if (ranker_seeds.empty()) throw ValidationError("ranker.seeds must not be empty");
  if (feature_sets.empty()) throw ValidationError("ranker.feature_sets must not be empty");
  for (const auto& name : feature_sets) feature_set_by_name(name);
  feature_set_by_name(budget_feature_set);
  if (std::find(feature_sets.begin(), feature_sets.end(), budget_feature_set) == feature_sets.end()) {
    throw ValidationError("evaluation.budget_feature_set must be one of ranker.feature_sets");
  }
  if (k_grid.empty()) throw ValidationError("evaluation.k_grid must not be empty");
  for (auto k : k_grid) {
    if (k < 1) throw ValidationError("evaluation.k_grid entries must be >= 1");
  }
  if (random_permutations < 1) throw ValidationError("evaluation.random_permutations must be >= 1");
  if (baseline_seeds < 1) throw ValidationError("evaluation.baseline_seeds must be >= 1");
  std::set<std::string> ids;
  for (const auto& d : domains) {
    if (d.id.empty() || d.id.find_first_of(",/\\ \t") != std::string::npos) {
      throw ValidationError("domain id '" + d.id + "' is empty or contains , / \\ or whitespace");
    }
    if (!ids.insert(d.id).second) throw ValidationError("duplicate domain id '" + d.id + "'");
  }
  if (synth) synth->validate();
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("data")) {
      const auto& data = j["data"];
      if (data.contains("domains")) {
        for (const auto& d : data["domains"]) {
          c.domains.push_back({d.at("id").get<std::string>(),
                               resolve_against(base_dir, d.at("path").get<std::string>())});
        }
      }
      if (data.contains("rating_scheme")) {
        c.rating_scheme = parse_rating_scheme(data["rating_scheme"].get<std::string>());
      }
    }
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      if (s.contains("n_s")) c.n_s = s["n_s"].get<std::vector<int>>();
      c.n_holdout = s.value("n_holdout", c.n_holdout);
    }
    if (j.contains("vocabulary")) {
      const auto& v = j["vocabulary"];
      c.vocab_size = v.value("size", c.vocab_size);
      if (v.contains("mode")) c.vocab_mode = parse_vocab_mode(v["mode"].get<std::string>());
    }
    if (j.contains("embeddings")) {
      const auto& e = j["embeddings"];
      if (e.contains("path")) c.embeddings_path = resolve_against(base_dir, e["path"].get<std::string>());
      c.smoothing_a = e.value("a", c.smoothing_a);
    }
    if (j.contains("measures")) {
      const auto& m = j["measures"];
      c.measures.renyi_alpha = m.value("renyi_alpha", c.measures.renyi_alpha);
      c.measures.epsilon_smoothing = m.value("epsilon", c.measures.epsilon_smoothing);
    }
    if (j.contains("ranker")) {
      const auto& r = j["ranker"];
      c.gbt.rounds = r.value("rounds", c.gbt.rounds);
      c.gbt.max_depth = r.value("max_depth", c.gbt.max_depth);
      c.gbt.learning_rate = r.value("learning_rate", c.gbt.learning_rate);
      c.gbt.min_leaf = r.value("min_leaf", c.gbt.min_leaf);
      c.gbt.subsample = r.value("subsample", c.gbt.subsample);
      if (r.contains("seeds")) c.ranker_seeds = r["seeds"].get<std::vector<std::uint64_t>>();
      if (r.contains("feature_sets")) c.feature_sets = r["feature_sets"].get<std::vector<std::string>>();
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      if (e.contains("k_grid")) c.k_grid = e["k_grid"].get<std::vector<std::size_t>>();
      c.random_permutations = e.value("random_permutations", c.random_permutations);
      c.baseline_seeds = e.value("baseline_seeds", c.baseline_seeds);
      c.budget_feature_set = e.value("budget_feature_set", c.budget_feature_set);
    }
    if (j.contains("performance") && j["performance"].contains("path")) {
      c.performance_path = resolve_against(base_dir, j["performance"]["path"].get<std::string>());
    }
    if (j.contains("synth")) {
      synth::SynthConfig defaults;
      defaults.seed = c.seed;
      c.synth = synth::SynthConfig::from_json(j["synth"], defaults);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

json PipelineConfig::to_json() const {
  json j;
  j["seed"] = seed;
  json domain_list = json::array();
  for (const auto& d : domains) domain_list.push_back({{"id", d.id}, {"path", d.path.string()}});
  j["data"] = {{"domains", domain_list}, {"rating_scheme", std::string(divrank::to_string(rating_scheme))}};
  j["sampling"] = {{"n_s", n_s}, {"n_holdout", n_holdout}};
  j["vocabulary"] = {{"size", vocab_size}, {"mode", std::string(to_string(vocab_mode))}};
  j["embeddings"] = {{"path", embeddings_path ? embeddings_path->string() : ""}, {"a", smoothing_a}};
  j["measures"] = {{"renyi_alpha", measures.renyi_alpha}, {"epsilon", measures.epsilon_smoothing}};
  j["ranker"] = {{"rounds", gbt.rounds},           {"max_depth", gbt.max_depth},
                 {"learning_rate", gbt.learning_rate}, {"min_leaf", gbt.min_leaf},
                 {"subsample", gbt.subsample},     {"seeds", ranker_seeds},
                 {"feature_sets", feature_sets}};
  j["evaluation"] = {{"k_grid", k_grid},
                     {"random_permutations", random_permutations},
                     {"baseline_seeds", baseline_seeds},
                     {"budget_feature_set", budget_feature_set}};
  j["performance"] = {{"path", performance_path ? performance_path->string() : ""}};
  if (synth) j["synth"] = synth->to_json();
  return j;
}

PipelineConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return PipelineConfig::from_json(j, fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(fs::path root) : root_(fs::weakly_canonical(fs::absolute(root))) {
  fs::create_directories(root_);
  const auto manifest_path = root_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      manifest_ = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
      throw StageError("workspace manifest is corrupt: " + std::string(e.what()));
    }
  } else {
    manifest_ = json{{"tool_version", std::string(kToolVersion)}, {"stages", json::object()}};
  }
}

fs::path Workspace::resolve(const std::string& relative) const {
  const fs::path rel(relative);
  if (rel.is_absolute()) {
    throw std::logic_error("workspace paths must be relative: " + relative);
  }
  const auto full = (root_ / rel).lexically_normal();
  const auto check = full.lexically_relative(root_);
  if (check.empty() || *check.begin() == "..") {
    throw std::logic_error("path escapes the workspace: " + relative);
  }
  return full;
}

std::string Workspace::read(const std::string& relative) const { return read_file(resolve(relative)); }

bool Workspace::exists(const std::string& relative) const { return fs::exists(resolve(relative)); }

void Workspace::save_manifest() { write_file(root_ / "manifest.json", manifest_.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Stage bookkeeping

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void log(const std::string& stage, const std::string& message) {
  std::cerr << "[" << stage << "] " << message << '\n';
}

// Collects the artifacts written by one stage and commits them to the
// manifest at the end.
class StageRun {
 public:
  StageRun(Workspace& ws, std::string name, std::string inputs_hash)
      : ws_(ws), name_(std::move(name)), inputs_hash_(std::move(inputs_hash)) {}

  void write(const std::string& relative, std::string_view contents) {
    write_file(ws_.resolve(relative), contents);
    artifacts_[relative] = sha256_hex(contents);
  }
  void timing(const std::string& key, double seconds) { timings_[key] = seconds; }

  void commit(const PipelineConfig& config, json extra = json::object()) {
    auto& m = ws_.manifest();
    m["tool_version"] = std::string(kToolVersion);
    const auto effective = config.to_json();
    m["config_hash"] = sha256_hex(effective.dump());
    m["effective_config"] = effective;
    json artifacts = json::object();
    for (const auto& [path, hash] : artifacts_) artifacts[path] = hash;
    json timings = json::object();
    for (const auto& [key, seconds] : timings_) timings[key] = seconds;
    json entry{{"inputs_hash", inputs_hash_}, {"artifacts", artifacts}, {"timings_seconds", timings}};
    for (auto it = extra.begin(); it != extra.end(); ++it) entry[it.key()] = it.value();
    m["stages"][name_] = entry;
    ws_.save_manifest();
  }

 private:
  Workspace& ws_;
  std::string name_;
  std::string inputs_hash_;
  std::map<std::string, std::string> artifacts_;
  std::map<std::string, double> timings_;
};

// Verifies every recorded artifact of a stage; returns a digest over them.
std::string verify_stage(Workspace& ws, const std::string& stage) {
  const auto& stages = ws.manifest()["stages"];
  if (!stages.contains(stage)) {
    throw StageError("stage '" + stage + "' has not been run in this workspace; run `" + stage + "` first");
  }
  std::string listing;
  for (const auto& [path, hash] : stages[stage]["artifacts"].items()) {
    const auto expected = hash.get<std::string>();
    if (!ws.exists(path)) {
      throw StageError("artifact " + path + " of stage '" + stage + "' is missing; rerun `" + stage + "`");
    }
    if (sha256_file(ws.resolve(path)) != expected) {
      throw StageError("artifact " + path + " of stage '" + stage +
                       "' does not match the manifest; rerun `" + stage + "`");
    }
    listing += path + "=" + expected + "\n";
  }
  return sha256_hex(listing);
}

bool is_current(Workspace& ws, const std::string& stage, const std::string& inputs_hash) {
  const auto& stages = ws.manifest()["stages"];
  if (!stages.contains(stage) || stages[stage].value("inputs_hash", "") != inputs_hash) return false;
  try {
    verify_stage(ws, stage);
  } catch (const StageError&) {
    return false;
  }
  return true;
}

double stage_timing(Workspace& ws, const std::string& stage, const std::string& key) {
  const auto& stages = ws.manifest()["stages"];
  if (!stages.contains(stage)) return 0.0;
  const auto& t = stages[stage]["timings_seconds"];
  return t.contains(key) ? t[key].get<double>() : 0.0;
}

std::uint64_t stable_id_hash(const std::string& id) {
  return std::stoull(sha256_hex(id).substr(0, 15), nullptr, 16);
}

std::string ns_tag(int n_s) { return "n" + std::to_string(n_s); }

std::string train_path(const std::string& domain, int n_s) {
  return "corpora/" + domain + "/train." + ns_tag(n_s) + ".jsonl";
}

std::string holdout_path(const std::string& domain, Split split) {
  return "corpora/" + domain + "/" + std::string(to_string(split)) + ".jsonl";
}

std::string rep_stem(const RepresentationKey& key) {
  return key.domain_id + "." + std::string(to_string(key.split)) + "." + ns_tag(key.n_s);
}

fs::path embeddings_location(const PipelineConfig& config, Workspace& ws) {
  if (config.embeddings_path) return *config.embeddings_path;
  if (ws.exists("embeddings.txt")) return ws.resolve("embeddings.txt");
  throw ValidationError("no embedding table: set embeddings.path or run `synth`");
}

fs::path performance_location(const PipelineConfig& config, Workspace& ws) {
  if (config.performance_path) return *config.performance_path;
  if (ws.exists("performance.csv")) return ws.resolve("performance.csv");
  throw ValidationError("no performance matrix: set performance.path or run `synth`");
}

struct IngestIndex {
  std::vector<std::string> domains;
  std::vector<int> n_s;
};

IngestIndex load_ingest_index(Workspace& ws) {
  verify_stage(ws, "ingest");
  const auto j = nlohmann::json::parse(ws.read("corpora/index.json"));
  return {j.at("domains").get<std::vector<std::string>>(), j.at("n_s").get<std::vector<int>>()};
}

DomainCorpus load_corpus(Workspace& ws, const std::string& domain, Split split, int n_s) {
  DomainCorpus c;
  c.domain_id = domain;
  c.split = split;
  c.sample_size_setting = n_s;
  const auto rel = split == Split::train ? train_path(domain, n_s) : holdout_path(domain, split);
  c.documents = parse_documents(ws.read(rel), rel);
  return c;
}

// Splits each pool and writes the corpora. Shared by `ingest` and `synth`.
void ingest_pools(const PipelineConfig& config, StageRun& run,
                  const std::vector<std::pair<std::string, std::vector<Document>>>& pools,
                  std::vector<std::string>& notes) {
  std::vector<int> settings = config.n_s;
  std::sort(settings.begin(), settings.end());
  json index;
  json kept = json::array();
  json excluded = json::array();
  json stats_json = json::object();
  for (const auto& [domain, raw] : pools) {
    MergeStats stats;
    auto labeled = label_documents(raw, config.rating_scheme, stats);
    stats_json[domain] = {{"labeled", stats.labeled},
                          {"prelabeled", stats.prelabeled},
                          {"dropped", stats.dropped},
                          {"rejected", stats.rejected}};
    if (stats.rejected > 0) {
      notes.push_back(domain + ": rejected " + std::to_string(stats.rejected) + " records");
    }
    const auto seed = derive_seed(config.seed, stable_id_hash(domain));
    bool ok = true;
    std::optional<SplitTriple> largest;
    for (int n_s : settings) {
      auto triple = sample_splits(domain, labeled, static_cast<std::size_t>(n_s), config.n_holdout, seed);
      if (!triple) {
        ok = false;
        break;
      }
      run.write(train_path(domain, n_s), serialize_documents(triple->train.documents));
      largest = std::move(triple);
    }
    if (!ok) {
      const auto need = static_cast<std::size_t>(settings.back()) + 2 * config.n_holdout;
      excluded.push_back({{"domain", domain}, {"pool", labeled.size()}, {"required", need}});
      notes.push_back(domain + ": excluded, pool of " + std::to_string(labeled.size()) +
                      " labeled documents is below the required " + std::to_string(need));
      continue;
    }
    run.write(holdout_path(domain, Split::validation), serialize_documents(largest->validation.documents));
    run.write(holdout_path(domain, Split::test), serialize_documents(largest->test.documents));
    kept.push_back(domain);
  }
  if (kept.size() < 2) {
    throw ValidationError("fewer than two domains survive sampling; nothing to compare");
  }
  index["domains"] = kept;
  index["excluded"] = excluded;
  index["n_s"] = settings;
  index["n_holdout"] = config.n_holdout;
  index["rating_scheme"] = std::string(to_string(config.rating_scheme));
  index["merge_stats"] = stats_json;
  index["tokenizer"] = std::string(kTokenizerId);
  run.write("corpora/index.json", index.dump(2) + "\n");
}

json sampling_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"n_s", c.n_s},
          {"n_holdout", c.n_holdout},
          {"rating_scheme", std::string(to_string(c.rating_scheme))}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

StageOutcome cmd_synth(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"synth", false, {}};
  auto cfg = config.synth.value_or(synth::SynthConfig{});
  if (!config.synth) cfg.seed = config.seed;
  cfg.n_s_settings = config.n_s;
  cfg.validate();
  const auto inputs = sha256_hex(json{{"synth", cfg.to_json()}, {"sampling", sampling_json(config)}}.dump());
  if (is_current(ws, "synth", inputs) && is_current(ws, "ingest", inputs)) {
    outcome.cache_hit = true;
    log("synth", "cache hit");
    return outcome;
  }
  const auto start = Clock::now();
  StageRun run(ws, "synth", inputs);
  auto domains = synth::generate_domains(cfg);
  std::vector<std::pair<std::string, std::vector<Document>>> pools;
  for (std::size_t d = 0; d < domains.domain_ids.size(); ++d) {
    run.write("raw/" + domains.domain_ids[d] + ".jsonl", serialize_documents(domains.pools[d]));
    pools.emplace_back(domains.domain_ids[d], std::move(domains.pools[d]));
  }
  const auto table = synth::generate_embedding_table(cfg, domains.terms, domains.base);
  run.write("embeddings.txt", table.serialize());
  const auto perf = synth::generate_performance(cfg, domains.domain_ids, domains.truths);
  run.write("performance.csv", write_performance_csv(perf));
  json truths = json::object();
  for (std::size_t d = 0; d < domains.domain_ids.size(); ++d) {
    truths[domains.domain_ids[d]] = domains.truths[d];
  }
  run.write("synth/truths.json", truths.dump() + "\n");
  run.write("synth/manifest.json",
            json{{"tool_version", std::string(kToolVersion)}, {"config", cfg.to_json()}}.dump(2) + "\n");
  run.timing("total", seconds_since(start));
  run.commit(config);
  log("synth", "generated " + std::to_string(pools.size()) + " domains, " +
                   std::to_string(perf.size()) + " performance records");

  const auto ingest_start = Clock::now();
  StageRun ingest(ws, "ingest", inputs);
  ingest_pools(config, ingest, pools, outcome.notes);
  ingest.timing("total", seconds_since(ingest_start));
  ingest.commit(config);
  for (const auto& note : outcome.notes) log("synth", note);
  return outcome;
}

StageOutcome cmd_ingest(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"ingest", false, {}};
  if (config.domains.empty()) {
    throw ValidationError("ingest: data.domains is empty (use `synth` for a synthetic workspace)");
  }
  json inputs_json{{"sampling", sampling_json(config)}};
  for (const auto& d : config.domains) inputs_json["files"][d.id] = sha256_file(d.path);
  const auto inputs = sha256_hex(inputs_json.dump());
  if (is_current(ws, "ingest", inputs)) {
    outcome.cache_hit = true;
    log("ingest", "cache hit");
    return outcome;
  }
  const auto start = Clock::now();
  StageRun run(ws, "ingest", inputs);
  std::vector<std::pair<std::string, std::vector<Document>>> pools;
  for (const auto& d : config.domains) pools.emplace_back(d.id, read_documents(d.path));
  ingest_pools(config, run, pools, outcome.notes);
  run.timing("total", seconds_since(start));
  run.commit(config);
  for (const auto& note : outcome.notes) log("ingest", note);
  return outcome;
}

StageOutcome cmd_featurize(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"featurize", false, {}};
  const auto ingest_digest = verify_stage(ws, "ingest");
  const auto index = load_ingest_index(ws);
  const auto table_path = embeddings_location(config, ws);
  const auto table_hash = sha256_file(table_path);
  const auto inputs = sha256_hex(json{{"ingest", ingest_digest},
                                      {"vocab_size", config.vocab_size},
                                      {"vocab_mode", std::string(to_string(config.vocab_mode))},
                                      {"measures", measure_config_hash(config.measures)},
                                      {"table", table_hash},
                                      {"a", config.smoothing_a},
                                      {"schema", feature_schema_hash()}}
                                     .dump());
  if (is_current(ws, "featurize", inputs)) {
    outcome.cache_hit = true;
    log("featurize", "cache hit");
    return outcome;
  }
  StageRun run(ws, "featurize", inputs);
  const auto stage_start = Clock::now();

  // Stage 1: representations.
  auto t0 = Clock::now();
  const int largest = *std::max_element(index.n_s.begin(), index.n_s.end());
  std::vector<TermCounts> counts(index.domains.size());
  parallel_for(index.domains.size(), config.jobs, [&](std::size_t i) {
    counts[i] = count_terms(load_corpus(ws, index.domains[i], Split::train, largest));
  });
  auto vocab_build = build_vocabulary_from_counts(counts, config.vocab_size);
  if (vocab_build.warning) {
    outcome.notes.push_back("vocabulary: " + *vocab_build.warning);
    log("featurize", "warning: " + *vocab_build.warning);
  }
  const auto& vocab = vocab_build.vocabulary;
  run.write("vocab.txt", vocab.serialize());
  run.write("vocab.txt.sha256", vocab.hash() + "\n");
  const auto table = load_embedding_table(table_path);
  const double vocab_seconds = seconds_since(t0);

  std::vector<RepresentationKey> keys;
  for (const auto& d : index.domains) {
    for (int n_s : index.n_s) {
      keys.push_back({d, Split::train, n_s});
      keys.push_back({d, Split::test, n_s});
    }
  }
  std::vector<DomainRepresentation> reps(keys.size());
  std::vector<double> rep_seconds(keys.size());
  std::map<RepresentationKey, DomainCorpus> corpora_for_pairs;
  const bool keep_corpora = config.vocab_mode == VocabularyMode::per_pair;
  std::vector<DomainCorpus> loaded(keep_corpora ? keys.size() : 0);
  parallel_for(keys.size(), config.jobs, [&](std::size_t i) {
    const auto start = Clock::now();
    const auto& key = keys[i];
    auto corpus = load_corpus(ws, key.domain_id, key.split, key.n_s);
    DomainRepresentation rep;
    rep.domain_id = key.domain_id;
    rep.split = key.split;
    rep.n_s = key.n_s;
    rep.td = term_distribution(corpus, vocab);
    rep.be = embed_domain(corpus, table, unigram_probabilities(corpus), config.smoothing_a);
    reps[i] = std::move(rep);
    if (keep_corpora) loaded[i] = std::move(corpus);
    rep_seconds[i] = seconds_since(start);
  });
  RepresentationMap rep_map;
  std::map<int, double> rep_time;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto stem = "representations/" + rep_stem(keys[i]);
    run.write(stem + ".td", reps[i].td.serialize());
    run.write(stem + ".be", reps[i].be.serialize_vector());
    run.write(stem + ".be.json", reps[i].be.serialize_metadata());
    rep_time[keys[i].n_s] += rep_seconds[i];
    if (keep_corpora) corpora_for_pairs.emplace(keys[i], std::move(loaded[i]));
    rep_map.emplace(keys[i], std::move(reps[i]));
  }

  // Stage 2: measures.
  std::map<int, std::vector<PairFeatures>> rows_by_setting;
  std::map<int, double> measure_time;
  for (int n_s : index.n_s) {
    const auto start = Clock::now();
    std::vector<PairFeatures> rows;
    if (config.vocab_mode == VocabularyMode::global) {
      rows = feature_matrix(index.domains, {n_s}, rep_map, config.measures, config.jobs);
    } else {
      auto domains = index.domains;
      std::sort(domains.begin(), domains.end());
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& s : domains) {
        for (const auto& t : domains) {
          if (s != t) pairs.emplace_back(s, t);
        }
      }
      rows.resize(pairs.size());
      parallel_for(pairs.size(), config.jobs, [&](std::size_t i) {
        const RepresentationKey sk{pairs[i].first, Split::train, n_s};
        const RepresentationKey tk{pairs[i].second, Split::test, n_s};
        rows[i] = featurize_pair_local_vocab(corpora_for_pairs.at(sk), corpora_for_pairs.at(tk),
                                             rep_map.at(sk), rep_map.at(tk), config.vocab_size,
                                             config.measures);
      });
    }
    measure_time[n_s] = seconds_since(start);
    run.write("features/features." + ns_tag(n_s) + ".csv", write_feature_csv(rows));
    rows_by_setting[n_s] = std::move(rows);
  }

  json meta;
  meta["schema_version"] = kFeatureSchemaVersion;
  meta["schema_hash"] = feature_schema_hash();
  meta["features"] = json::array();
  for (const auto name : feature_names()) meta["features"].push_back(std::string(name));
  meta["n_s"] = index.n_s;
  meta["vocab_hash"] = vocab.hash();
  meta["vocab_size"] = vocab.size();
  meta["vocab_mode"] = std::string(to_string(config.vocab_mode));
  meta["table_hash"] = table.hash();
  meta["measure_config_hash"] = measure_config_hash(config.measures);
  meta["renyi_alpha"] = config.measures.renyi_alpha;
  meta["epsilon_smoothing"] = config.measures.epsilon_smoothing;
  meta["log_base"] = "e";
  meta["wasserstein_ground_metric"] = "unit spacing over frequency-ordered vocabulary index";
  meta["geometric_td_operand"] = "raw term mass (not renormalized)";
  meta["smoothing_a"] = config.smoothing_a;
  meta["unigram_scope"] = "domain";
  meta["tokenizer"] = std::string(kTokenizerId);
  meta["source_split"] = "train";
  meta["target_split"] = "test";
  run.write("features/metadata.json", meta.dump(2) + "\n");

  for (const auto& [n_s, seconds] : rep_time) {
    run.timing("representations." + ns_tag(n_s), seconds + vocab_seconds / static_cast<double>(rep_time.size()));
  }
  for (const auto& [n_s, seconds] : measure_time) run.timing("measures." + ns_tag(n_s), seconds);
  run.timing("total", seconds_since(stage_start));
  run.commit(config);
  std::size_t total_rows = 0;
  for (const auto& [n_s, rows] : rows_by_setting) total_rows += rows.size();
  log("featurize", std::to_string(keys.size()) + " representations, " + std::to_string(total_rows) +
                       " feature rows");
  return outcome;
}

std::vector<PairFeatures> load_features(Workspace& ws) {
  verify_stage(ws, "featurize");
  const auto meta = nlohmann::json::parse(ws.read("features/metadata.json"));
  if (meta.at("schema_hash").get<std::string>() != feature_schema_hash()) {
    throw StageError("feature cache was written with a different schema; rerun `featurize`");
  }
  std::vector<PairFeatures> rows;
  for (int n_s : meta.at("n_s").get<std::vector<int>>()) {
    const auto rel = "features/features." + ns_tag(n_s) + ".csv";
    auto part = read_feature_csv(ws.read(rel), rel);
    for (auto& row : part) {
      row.provenance = {meta.at("vocab_hash").get<std::string>(), meta.at("table_hash").get<std::string>(),
                        meta.at("measure_config_hash").get<std::string>(), Split::train, Split::test};
    }
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return rows;
}

std::vector<PerformanceRecord> load_performance(const PipelineConfig& config, Workspace& ws) {
  const auto path = performance_location(config, ws);
  return read_performance_csv(read_file(path), path.string());
}

StageOutcome cmd_correlate(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"correlate", false, {}};
  const auto features_digest = verify_stage(ws, "featurize");
  const auto perf_path = performance_location(config, ws);
  const auto inputs = sha256_hex(json{{"featurize", features_digest}, {"performance", sha256_file(perf_path)}}.dump());
  if (is_current(ws, "correlate", inputs)) {
    outcome.cache_hit = true;
    log("correlate", "cache hit");
    return outcome;
  }
  const auto start = Clock::now();
  StageRun run(ws, "correlate", inputs);
  const auto rows = join_rows(load_features(ws), load_performance(config, ws));
  const auto table = eval::correlation_table(rows);
  run.write("correlations.csv", eval::write_correlation_csv(table));
  run.timing("total", seconds_since(start));
  run.commit(config);
  log("correlate", std::to_string(table.size()) + " correlation rows");
  return outcome;
}

namespace {

std::vector<FeatureSet> configured_sets(const PipelineConfig& config) {
  std::vector<FeatureSet> sets;
  for (const auto& name : config.feature_sets) sets.push_back(feature_set_by_name(name));
  return sets;
}

std::string model_path(const ProtocolCell& cell) {
  return "models/" + cell.target_id + "." + ns_tag(cell.n_s) + "." + cell.feature_set + ".seed" +
         std::to_string(cell.seed) + ".gbt";
}

json curve_json(const std::vector<eval::CurveStats>& curve) {
  json out = json::array();
  for (const auto& s : curve) out.push_back({{"k", s.k}, {"mean", s.mean}, {"std", s.stddev}});
  return out;
}

json budget_json(const eval::BudgetCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"k", p.k}, {"best_f1", p.best_f1}, {"cumulative_runtime_hours", p.cumulative_runtime_hours}});
  }
  return {{"label", curve.target_id}, {"points", points}};
}

json savings_json(const eval::SavingsReport& s) {
  return {{"k_star", s.k_star},
          {"best_f1", s.best_f1},
          {"runtime_at_k_star_hours", s.runtime_at_k_star},
          {"exhaustive_runtime_hours", s.exhaustive_runtime},
          {"overhead_hours", s.overhead_hours},
          {"training_saving", s.training_saving},
          {"end_to_end_saving", s.end_to_end_saving}};
}

}  // namespace

StageOutcome cmd_train_rank(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"train-rank", false, {}};
  const auto features_digest = verify_stage(ws, "featurize");
  const auto perf_path = performance_location(config, ws);
  const auto inputs = sha256_hex(json{{"featurize", features_digest},
                                      {"performance", sha256_file(perf_path)},
                                      {"ranker", config.to_json()["ranker"]}}
                                     .dump());
  if (is_current(ws, "train-rank", inputs)) {
    outcome.cache_hit = true;
    log("train-rank", "cache hit");
    return outcome;
  }
  StageRun run(ws, "train-rank", inputs);
  const auto stage_start = Clock::now();
  const auto rows = join_rows(load_features(ws), load_performance(config, ws));
  std::set<int> settings;
  for (const auto& r : rows) settings.insert(r.n_s);

  std::vector<RankedSources> rankings;
  std::size_t model_count = 0;
  for (int n_s : settings) {
    for (const auto& set : configured_sets(config)) {
      const auto start = Clock::now();
      ProtocolOptions options;
      options.feature_sets = {set};
      options.n_s_settings = {n_s};
      options.seeds = config.ranker_seeds;
      options.hyperparams = config.gbt;
      options.jobs = config.jobs;
      auto cells = run_protocol(rows, options);
      run.timing("regression." + ns_tag(n_s) + "." + set.name, seconds_since(start));
      for (auto& cell : cells) {
        run.write(model_path(cell), cell.model.serialize());
        rankings.push_back(std::move(cell.ranking));
        ++model_count;
      }
    }
  }
  std::sort(rankings.begin(), rankings.end(), [&](const RankedSources& a, const RankedSources& b) {
    return std::tie(a.target_id, a.n_s, a.feature_set, a.seed) < std::tie(b.target_id, b.n_s, b.feature_set, b.seed);
  });
  run.write("rankings.csv", write_rankings_csv(rankings));
  run.timing("total", seconds_since(stage_start));
  run.commit(config, json{{"models", model_count}});
  log("train-rank", "trained " + std::to_string(model_count) + " models");
  outcome.notes.push_back(std::to_string(model_count) + " models");
  return outcome;
}

namespace {

struct BudgetAnalysis {
  eval::BudgetCurve predicted;
  eval::BudgetCurve random;
  eval::BudgetCurve oracle;
  eval::SavingsReport macro_savings;
  double mean_runtime_fraction = 0.0;  // mean over targets and seeds of runtime@K*/exhaustive
  double mean_exhaustive_hours = 0.0;
  double mean_runtime_at_k_star = 0.0;
};

std::map<int, BudgetAnalysis> analyze_budget(const PipelineConfig& config,
                                             const std::vector<LabeledPair>& rows,
                                             const std::vector<RankedSources>& rankings) {
  std::map<std::pair<std::string, int>, eval::Truth> f1, runtime;
  for (const auto& r : rows) {
    f1[{r.target_id, r.n_s}][r.source_id] = r.macro_f1;
    runtime[{r.target_id, r.n_s}][r.source_id] = r.train_runtime_hours;
  }
  std::vector<std::uint64_t> baseline_seeds;
  for (std::size_t i = 0; i < config.baseline_seeds; ++i) baseline_seeds.push_back(derive_seed(config.seed, 9'000 + i));

  std::map<int, std::vector<eval::BudgetCurve>> predicted, random, oracle;
  std::map<int, std::vector<double>> fractions, exhaustive, at_k_star;
  for (const auto& r : rankings) {
    if (r.feature_set != config.budget_feature_set) continue;
    const std::pair<std::string, int> key{r.target_id, r.n_s};
    std::vector<std::string> order;
    for (const auto& [source, score] : r.ordering) order.push_back(source);
    auto curve = eval::budget_curve(order, f1.at(key), runtime.at(key));
    double total = 0.0;
    for (const auto& [source, hours] : runtime.at(key)) total += hours;
    const auto s = eval::savings_summary(curve, total, 0.0);
    fractions[r.n_s].push_back(s.runtime_at_k_star / total);
    exhaustive[r.n_s].push_back(total);
    at_k_star[r.n_s].push_back(s.runtime_at_k_star);
    predicted[r.n_s].push_back(std::move(curve));
  }
  for (const auto& [key, truth] : f1) {
    std::vector<std::string> candidates;
    for (const auto& [source, v] : truth) candidates.push_back(source);
    random[key.second].push_back(eval::random_baseline(candidates, truth, runtime.at(key), baseline_seeds));
    oracle[key.second].push_back(eval::oracle_curve(truth, runtime.at(key)));
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  std::map<int, BudgetAnalysis> out;
  for (auto& [n_s, curves] : predicted) {
    BudgetAnalysis a;
    a.predicted = eval::average_curves(curves, "predicted:" + config.budget_feature_set);
    a.random = eval::average_curves(random[n_s], "random");
    a.oracle = eval::average_curves(oracle[n_s], "oracle");
    a.mean_runtime_fraction = mean(fractions[n_s]);
    a.mean_exhaustive_hours = mean(exhaustive[n_s]);
    a.mean_runtime_at_k_star = mean(at_k_star[n_s]);
    a.macro_savings = eval::savings_summary(a.predicted, a.predicted.points.back().cumulative_runtime_hours, 0.0);
    out[n_s] = std::move(a);
  }
  return out;
}

double overhead_seconds(Workspace& ws, const PipelineConfig& config, int n_s) {
  return stage_timing(ws, "featurize", "representations." + ns_tag(n_s)) +
         stage_timing(ws, "featurize", "measures." + ns_tag(n_s)) +
         stage_timing(ws, "train-rank", "regression." + ns_tag(n_s) + "." + config.budget_feature_set);
}

}  // namespace

StageOutcome cmd_evaluate(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"evaluate", false, {}};
  const auto features_digest = verify_stage(ws, "featurize");
  const auto rank_digest = verify_stage(ws, "train-rank");
  const auto perf_path = performance_location(config, ws);
  const auto inputs = sha256_hex(json{{"featurize", features_digest},
                                      {"train-rank", rank_digest},
                                      {"performance", sha256_file(perf_path)},
                                      {"evaluation", config.to_json()["evaluation"]},
                                      {"seed", config.seed}}
                                     .dump());
  if (is_current(ws, "evaluate", inputs)) {
    outcome.cache_hit = true;
    log("evaluate", "cache hit");
    return outcome;
  }
  StageRun run(ws, "evaluate", inputs);
  const auto start = Clock::now();
  const auto rows = join_rows(load_features(ws), load_performance(config, ws));
  const auto rankings = read_rankings_csv(ws.read("rankings.csv"), "rankings.csv");
  const auto truth = eval::truth_table(rows);

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool_version"] = std::string(kToolVersion);
  report["metadata"] = {{"ndcg_gain", "linear in macro-F1"},
                        {"ndcg_discount", "log2(rank+1)"},
                        {"log_base", "e"},
                        {"spearman_ties", "midrank"},
                        {"spearman_p_value", "two-sided Student-t approximation"},
                        {"ranking_tie_break", "source id ascending"},
                        {"oracle_curve", "extension: truth-descending ordering, bounds attainable savings"},
                        {"budget_feature_set", config.budget_feature_set},
                        {"renyi_alpha", config.measures.renyi_alpha},
                        {"tokenizer", std::string(kTokenizerId)},
                        {"rating_scheme", std::string(to_string(config.rating_scheme))}};

  const auto table = eval::correlation_table(rows);
  json correlations = json::array();
  for (const auto& c : table) {
    json entry{{"measure", c.measure}, {"n_s", c.n_s}, {"n", c.n}, {"defined", c.defined}};
    if (c.defined) {
      entry["rho"] = c.rho;
      entry["p_value"] = c.p_value;
      entry["significant"] = c.significant();
    }
    correlations.push_back(entry);
  }
  report["correlations"] = correlations;

  const auto ndcg = eval::average_ndcg(rankings, truth, config.k_grid);
  json ndcg_json = json::object();
  for (const auto& [key, curve] : ndcg) {
    ndcg_json[key.feature_set][std::to_string(key.n_s)] = curve_json(curve);
    run.write("report/ndcg." + key.feature_set + "." + ns_tag(key.n_s) + ".csv", eval::write_ndcg_csv(curve));
  }
  report["ndcg"] = ndcg_json;
  const auto random_ndcg = eval::random_ndcg(truth, config.k_grid, config.random_permutations,
                                             derive_seed(config.seed, 8'000));
  json random_json = json::object();
  for (const auto& [n_s, curve] : random_ndcg) {
    random_json[std::to_string(n_s)] = curve_json(curve);
    run.write("report/ndcg.RANDOM." + ns_tag(n_s) + ".csv", eval::write_ndcg_csv(curve));
  }
  report["ndcg_random"] = random_json;

  const auto budget = analyze_budget(config, rows, rankings);
  json budget_out = json::object();
  for (const auto& [n_s, a] : budget) {
    budget_out[std::to_string(n_s)] = {{"predicted", budget_json(a.predicted)},
                                      {"random", budget_json(a.random)},
                                      {"oracle", budget_json(a.oracle)},
                                      {"macro_average_savings", savings_json(a.macro_savings)},
                                      {"mean_runtime_fraction_at_k_star", a.mean_runtime_fraction},
                                      {"mean_runtime_at_k_star_hours", a.mean_runtime_at_k_star},
                                      {"mean_exhaustive_runtime_hours", a.mean_exhaustive_hours}};
    run.write("report/budget.predicted." + ns_tag(n_s) + ".csv", eval::write_budget_csv(a.predicted));
    run.write("report/budget.random." + ns_tag(n_s) + ".csv", eval::write_budget_csv(a.random));
    run.write("report/budget.oracle." + ns_tag(n_s) + ".csv", eval::write_budget_csv(a.oracle));
  }
  report["budget"] = budget_out;
  report["runtime_accounting"] = "runtime_accounting.json";
  run.write("report/report.json", report.dump(2) + "\n");

  // Timing-dependent accounting lives apart from the deterministic report.
  json accounting;
  std::string summary = "divrank evaluation summary\n\n";
  for (const auto& [n_s, a] : budget) {
    const double overhead_h = overhead_seconds(ws, config, n_s) / 3600.0;
    const auto e2e = eval::savings_summary(a.predicted, a.predicted.points.back().cumulative_runtime_hours, overhead_h);
    accounting[std::to_string(n_s)] = {
        {"representations_seconds", stage_timing(ws, "featurize", "representations." + ns_tag(n_s))},
        {"measures_seconds", stage_timing(ws, "featurize", "measures." + ns_tag(n_s))},
        {"regression_seconds", stage_timing(ws, "train-rank", "regression." + ns_tag(n_s) + "." + config.budget_feature_set)},
        {"overhead_hours", overhead_h},
        {"macro_average", savings_json(e2e)},
        {"mean_over_targets_end_to_end_saving",
         1.0 - a.mean_runtime_fraction - (a.mean_exhaustive_hours > 0 ? overhead_h / a.mean_exhaustive_hours : 0.0)}};
    char line[512];
    std::snprintf(line, sizeof(line),
                  "n_s=%d: best macro-average F1 %.4f reached at K*=%zu (%.3f h of %.3f h exhaustive), "
                  "training saving %.1f%%, end-to-end %.1f%%; mean runtime fraction at K* over targets %.3f\n",
                  n_s, e2e.best_f1, e2e.k_star, e2e.runtime_at_k_star, e2e.exhaustive_runtime,
                  100.0 * e2e.training_saving, 100.0 * e2e.end_to_end_saving, a.mean_runtime_fraction);
    summary += line;
  }
  summary += "\nMean NDCG@K (feature set, n_s):\n";
  for (const auto& [key, curve] : ndcg) {
    summary += "  " + key.feature_set + " n_s=" + std::to_string(key.n_s) + ":";
    for (const auto& s : curve) {
      char cell[64];
      std::snprintf(cell, sizeof(cell), " @%zu=%.4f", s.k, s.mean);
      summary += cell;
    }
    summary += "\n";
  }
  for (const auto& [n_s, curve] : random_ndcg) {
    summary += "  RANDOM n_s=" + std::to_string(n_s) + ":";
    for (const auto& s : curve) {
      char cell[64];
      std::snprintf(cell, sizeof(cell), " @%zu=%.4f", s.k, s.mean);
      summary += cell;
    }
    summary += "\n";
  }
  run.write("report/summary.txt", summary);
  write_file(ws.resolve("report/runtime_accounting.json"), accounting.dump(2) + "\n");
  run.timing("total", seconds_since(start));
  run.commit(config);
  log("evaluate", "report written to report/report.json");
  return outcome;
}

StageOutcome cmd_budget(const PipelineConfig& config, Workspace& ws) {
  config.validate();
  StageOutcome outcome{"budget", false, {}};
  const auto eval_digest = verify_stage(ws, "evaluate");
  const auto inputs = sha256_hex(json{{"evaluate", eval_digest}, {"budget_feature_set", config.budget_feature_set}}.dump());
  if (is_current(ws, "budget", inputs)) {
    outcome.cache_hit = true;
    log("budget", "cache hit");
    return outcome;
  }
  StageRun run(ws, "budget", inputs);
  const auto report = nlohmann::json::parse(ws.read("report/report.json"));
  json savings = json::object();
  for (const auto& [n_s_text, entry] : report.at("budget").items()) {
    const int n_s = std::stoi(n_s_text);
    eval::BudgetCurve curve;
    for (const auto& p : entry.at("predicted").at("points")) {
      curve.points.push_back({p.at("k").get<std::size_t>(), p.at("best_f1").get<double>(),
                              p.at("cumulative_runtime_hours").get<double>()});
    }
    const double overhead_h = overhead_seconds(ws, config, n_s) / 3600.0;
    const auto s = eval::savings_summary(curve, curve.points.back().cumulative_runtime_hours, overhead_h);
    const double fraction = entry.at("mean_runtime_fraction_at_k_star").get<double>();
    const double exhaustive = entry.at("mean_exhaustive_runtime_hours").get<double>();
    savings[n_s_text] = {{"macro_average", savings_json(s)},
                         {"mean_runtime_fraction_at_k_star", fraction},
                         {"mean_training_saving", 1.0 - fraction},
                         {"mean_end_to_end_saving", 1.0 - fraction - overhead_h / exhaustive},
                         {"overhead_hours", overhead_h}};
    char line[256];
    std::snprintf(line, sizeof(line),
                  "n_s=%d: K*=%zu, %.3f h -> %.3f h (training saving %.1f%%, end-to-end %.1f%%)",
                  n_s, s.k_star, s.exhaustive_runtime, s.runtime_at_k_star, 100.0 * s.training_saving,
                  100.0 * s.end_to_end_saving);
    log("budget", line);
    outcome.notes.push_back(line);
  }
  // Contains measured timings, so it is not tracked as a hashed artifact.
  write_file(ws.resolve("budget/savings.json"), savings.dump(2) + "\n");
  run.commit(config);
  return outcome;
}

}  // namespace divrank::pipeline
