#include "divrank/eval.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "divrank/common.hpp"

namespace divrank::eval {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double student_t_two_sided_p(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return std::clamp(boost::math::ibeta(dof / 2.0, 0.5, x), 0.0, 1.0);
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    throw ValidationError("undefined correlation");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("spearman_rho: length mismatch");
  }
  if (x.size() < 3) {
    throw ValidationError("undefined correlation");
  }
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  SpearmanResult out;
  out.rho = pearson(rx, ry);
  const double dof = static_cast<double>(x.size()) - 2.0;
  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.rho * std::sqrt(dof / ((1.0 - out.rho) * (1.0 + out.rho)));
    out.p_value = student_t_two_sided_p(t, dof);
  }
  return out;
}

double spearman_exact_p(std::span<const double> x, std::span<const double> y) {
  if (x.size() > 10) {
    throw ValidationError("exact permutation p-value is limited to n <= 10");
  }
  const double observed = std::abs(spearman_rho(x, y).rho);
  const auto rx = midranks(x);
  auto ry = midranks(y);
  std::sort(ry.begin(), ry.end());
  std::size_t total = 0;
  std::size_t extreme = 0;
  // Permuting sorted midranks visits each distinct arrangement once; weight
  // each by the number of index permutations that produce it.
  std::map<double, std::size_t> multiplicity;
  for (double r : ry) ++multiplicity[r];
  std::size_t weight = 1;
  for (const auto& [r, m] : multiplicity) {
    for (std::size_t i = 2; i <= m; ++i) weight *= i;
  }
  do {
    total += weight;
    if (std::abs(pearson(rx, ry)) >= observed - 1e-12) extreme += weight;
  } while (std::next_permutation(ry.begin(), ry.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

std::vector<CorrelationResult> correlation_table(const std::vector<LabeledPair>& rows) {
  std::set<int> settings;
  for (const auto& r : rows) settings.insert(r.n_s);
  std::vector<CorrelationResult> table;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    for (int n_s : settings) {
      std::vector<double> x, y;
      for (const auto& r : rows) {
        if (r.n_s != n_s) continue;
        x.push_back(r.features[f]);
        y.push_back(r.macro_f1);
      }
      CorrelationResult result;
      result.measure = std::string(feature_names()[f]);
      result.n_s = n_s;
      result.n = x.size();
      try {
        const auto s = spearman_rho(x, y);
        result.defined = true;
        result.rho = s.rho;
        result.p_value = s.p_value;
      } catch (const ValidationError&) {
        result.defined = false;
      }
      table.push_back(std::move(result));
    }
  }
  return table;
}

std::string write_correlation_csv(const std::vector<CorrelationResult>& table) {
  std::string out = "measure,n_s,n,rho,p_value,significant\n";
  for (const auto& r : table) {
    out += r.measure + "," + std::to_string(r.n_s) + "," + std::to_string(r.n) + ",";
    if (r.defined) {
      out += format_double(r.rho) + "," + format_double(r.p_value) + "," +
             (r.significant() ? "true" : "false");
    } else {
      out += "undefined,undefined,false";
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

double ndcg_at_k(const std::vector<std::string>& ranking, const Truth& truth, std::size_t k) {
  if (k < 1 || k > ranking.size()) {
    throw ValidationError("ndcg_at_k: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(ranking.size()) + "]");
  }
  std::vector<double> gains;
  gains.reserve(ranking.size());
  for (const auto& source : ranking) {
    const auto it = truth.find(source);
    if (it == truth.end()) {
      throw ValidationError("ndcg_at_k: no truth for candidate '" + source + "'");
    }
    gains.push_back(it->second);
  }
  auto ideal = gains;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += gains[i] / discount;
    idcg += ideal[i] / discount;
  }
  if (!(idcg > 0.0)) return 1.0;
  return std::clamp(dcg / idcg, 0.0, 1.0);
}

TruthTable truth_table(const std::vector<LabeledPair>& rows) {
  TruthTable table;
  for (const auto& r : rows) table[{r.target_id, r.n_s}][r.source_id] = r.macro_f1;
  return table;
}

namespace {

std::vector<CurveStats> summarize(const std::vector<std::vector<double>>& samples,
                                  const std::vector<std::size_t>& k_grid) {
  std::vector<CurveStats> out;
  for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
    const auto& v = samples[ki];
    CurveStats s;
    s.k = k_grid[ki];
    if (!v.empty()) {
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

std::map<NdcgKey, std::vector<CurveStats>> average_ndcg(const std::vector<RankedSources>& rankings,
                                                        const TruthTable& truth,
                                                        const std::vector<std::size_t>& k_grid) {
  std::map<NdcgKey, std::vector<std::vector<double>>> samples;
  std::map<NdcgKey, std::map<std::uint64_t, std::set<std::string>>> coverage;
  for (const auto& r : rankings) {
    const auto t = truth.find({r.target_id, r.n_s});
    if (t == truth.end()) {
      throw ValidationError("no truth for target " + r.target_id + " n_s=" + std::to_string(r.n_s));
    }
    std::vector<std::string> order;
    for (const auto& [source, score] : r.ordering) order.push_back(source);
    const NdcgKey key{r.feature_set, r.n_s};
    auto& cell = samples[key];
    cell.resize(k_grid.size());
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
      cell[ki].push_back(ndcg_at_k(order, t->second, std::min(k_grid[ki], order.size())));
    }
    coverage[key][r.seed].insert(r.target_id);
  }
  for (const auto& [key, by_seed] : coverage) {
    for (const auto& [seed, targets] : by_seed) {
      for (const auto& [tk, unused] : truth) {
        if (tk.second == key.n_s && !targets.contains(tk.first)) {
          throw ValidationError("missing ranking for target " + tk.first + " in " + key.feature_set +
                                " n_s=" + std::to_string(key.n_s) + " seed=" + std::to_string(seed));
        }
      }
    }
  }
  std::map<NdcgKey, std::vector<CurveStats>> out;
  for (const auto& [key, cell] : samples) out[key] = summarize(cell, k_grid);
  return out;
}

std::map<int, std::vector<CurveStats>> random_ndcg(const TruthTable& truth,
                                                   const std::vector<std::size_t>& k_grid,
                                                   std::size_t permutations, std::uint64_t seed) {
  std::map<int, std::vector<std::vector<double>>> samples;
  std::uint64_t stream = 0;
  for (const auto& [key, t] : truth) {
    std::vector<std::string> order;
    for (const auto& [source, f1] : t) order.push_back(source);
    std::sort(order.begin(), order.end());
    std::mt19937_64 rng(derive_seed(seed, stream++));
    auto& cell = samples[key.second];
    cell.resize(k_grid.size());
    for (std::size_t p = 0; p < permutations; ++p) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
        cell[ki].push_back(ndcg_at_k(order, t, std::min(k_grid[ki], order.size())));
      }
    }
  }
  std::map<int, std::vector<CurveStats>> out;
  for (const auto& [n_s, cell] : samples) out[n_s] = summarize(cell, k_grid);
  return out;
}

// ---------------------------------------------------------------------------

BudgetCurve budget_curve(const std::vector<std::string>& ordering, const Truth& f1,
                         const Truth& runtime_hours) {
  BudgetCurve curve;
  double best = 0.0;
  double runtime = 0.0;
  for (std::size_t i = 0; i < ordering.size(); ++i) {
    const auto f = f1.find(ordering[i]);
    const auto r = runtime_hours.find(ordering[i]);
    if (f == f1.end() || r == runtime_hours.end()) {
      throw ValidationError("budget_curve: no truth for '" + ordering[i] + "'");
    }
    best = i == 0 ? f->second : std::max(best, f->second);
    runtime += r->second;
    curve.points.push_back({i + 1, best, runtime});
  }
  return curve;
}

BudgetCurve average_curves(const std::vector<BudgetCurve>& curves, std::string label) {
  BudgetCurve out;
  out.target_id = std::move(label);
  if (curves.empty()) return out;
  const std::size_t length = curves.front().points.size();
  out.points.resize(length);
  for (const auto& c : curves) {
    if (c.points.size() != length) {
      throw ValidationError("cannot average budget curves of different lengths");
    }
    for (std::size_t i = 0; i < length; ++i) {
      out.points[i].k = i + 1;
      out.points[i].best_f1 += c.points[i].best_f1;
      out.points[i].cumulative_runtime_hours += c.points[i].cumulative_runtime_hours;
    }
  }
  const double n = static_cast<double>(curves.size());
  for (auto& p : out.points) {
    p.best_f1 /= n;
    p.cumulative_runtime_hours /= n;
  }
  return out;
}

BudgetCurve random_baseline(const std::vector<std::string>& candidates, const Truth& f1,
                            const Truth& runtime_hours, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw ValidationError("random_baseline needs at least one seed");
  }
  std::vector<std::string> base = candidates;
  std::sort(base.begin(), base.end());
  std::vector<BudgetCurve> curves;
  for (auto seed : seeds) {
    auto order = base;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    curves.push_back(budget_curve(order, f1, runtime_hours));
  }
  return average_curves(curves, "random");
}

BudgetCurve oracle_curve(const Truth& f1, const Truth& runtime_hours) {
  std::vector<std::pair<std::string, double>> order(f1.begin(), f1.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> names;
  for (const auto& [name, v] : order) names.push_back(name);
  auto curve = budget_curve(names, f1, runtime_hours);
  curve.target_id = "oracle";
  return curve;
}

SavingsReport savings_summary(const BudgetCurve& predicted, double exhaustive_runtime_hours,
                              double overhead_hours) {
  if (predicted.points.empty()) {
    throw ValidationError("savings_summary: empty budget curve");
  }
  if (!(exhaustive_runtime_hours > 0.0)) {
    throw ValidationError("savings_summary: exhaustive runtime must be positive");
  }
  SavingsReport report;
  report.best_f1 = predicted.points.back().best_f1;
  for (const auto& p : predicted.points) {
    if (p.best_f1 >= report.best_f1) {
      report.k_star = p.k;
      report.runtime_at_k_star = p.cumulative_runtime_hours;
      break;
    }
  }
  report.exhaustive_runtime = exhaustive_runtime_hours;
  report.overhead_hours = overhead_hours;
  report.training_saving = 1.0 - report.runtime_at_k_star / exhaustive_runtime_hours;
  report.end_to_end_saving =
      1.0 - (report.runtime_at_k_star + overhead_hours) / exhaustive_runtime_hours;
  return report;
}

std::string write_budget_csv(const BudgetCurve& curve) {
  std::string out = "k,best_f1,cumulative_runtime_hours\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.k) + "," + format_double(p.best_f1) + "," +
           format_double(p.cumulative_runtime_hours) + "\n";
  }
  return out;
}

std::string write_ndcg_csv(const std::vector<CurveStats>& curve) {
  std::string out = "k,mean_ndcg,std_ndcg\n";
  for (const auto& s : curve) {
    out += std::to_string(s.k) + "," + format_double(s.mean) + "," + format_double(s.stddev) + "\n";
  }
  return out;
}

}  // namespace divrank::eval
