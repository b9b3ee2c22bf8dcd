#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divrank/features.hpp"
#include "divrank/ranker.hpp"

namespace divrank::eval {

// ---------------------------------------------------------------------------
// Rank correlation

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

// Pearson correlation of the midrank vectors. The two-sided p-value uses
// t = rho * sqrt((n-2)/(1-rho^2)) against Student's t with n-2 degrees of
// freedom; |rho| = 1 gives p = 0. Throws ValidationError("undefined
// correlation") for n < 3 or when either side has no rank variance.
SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y);

// Two-sided Student-t tail probability P(|T| >= |t|).
double student_t_two_sided_p(double t, double dof);

// Exact permutation p-value: the fraction of the n! reorderings of y whose
// |rho| reaches the observed |rho|. Limited to n <= 10.
double spearman_exact_p(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
  std::string measure;
  int n_s = 0;
  std::size_t n = 0;
  bool defined = false;
  double rho = 0.0;
  double p_value = 1.0;

  bool significant() const { return defined && p_value <= 0.05; }
};

// One row per (measure, n_s): the measure against macro-F1 over all pairs of
// that setting. Constant measures yield an undefined row.
std::vector<CorrelationResult> correlation_table(const std::vector<LabeledPair>& rows);
std::string write_correlation_csv(const std::vector<CorrelationResult>& table);

// ---------------------------------------------------------------------------
// Ranking quality

using Truth = std::unordered_map<std::string, double>;

// Linear gain (the relevance is the macro-F1 itself), log2(i+1) discount.
double ndcg_at_k(const std::vector<std::string>& ranking, const Truth& truth, std::size_t k);

struct CurveStats {
  std::size_t k = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct NdcgKey {
  std::string feature_set;
  int n_s = 0;
  auto operator<=>(const NdcgKey&) const = default;
};

// Truth per (target, n_s): source -> macro-F1.
using TruthTable = std::map<std::pair<std::string, int>, Truth>;
TruthTable truth_table(const std::vector<LabeledPair>& rows);

// Mean/stddev of NDCG@K over every (target, seed) ranking of each
// (feature set, n_s) cell. Every target present in the truth table must be
// ranked for every seed seen in that cell.
std::map<NdcgKey, std::vector<CurveStats>> average_ndcg(const std::vector<RankedSources>& rankings,
                                                        const TruthTable& truth,
                                                        const std::vector<std::size_t>& k_grid);

// Mean NDCG@K of uniformly random orderings, `permutations` per target.
std::map<int, std::vector<CurveStats>> random_ndcg(const TruthTable& truth,
                                                   const std::vector<std::size_t>& k_grid,
                                                   std::size_t permutations, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Budget curves

struct BudgetPoint {
  std::size_t k = 0;
  double best_f1 = 0.0;
  double cumulative_runtime_hours = 0.0;
};

struct BudgetCurve {
  std::string target_id;  // "macro-average" for averaged curves
  std::vector<BudgetPoint> points;
};

// Point K = (best F1 among the first K sources tried, their summed runtime).
BudgetCurve budget_curve(const std::vector<std::string>& ordering, const Truth& f1,
                         const Truth& runtime_hours);

// Pointwise mean over uniformly random orderings, one per seed.
BudgetCurve random_baseline(const std::vector<std::string>& candidates, const Truth& f1,
                            const Truth& runtime_hours, const std::vector<std::uint64_t>& seeds);

BudgetCurve oracle_curve(const Truth& f1, const Truth& runtime_hours);

// Pointwise mean of curves with identical length.
BudgetCurve average_curves(const std::vector<BudgetCurve>& curves, std::string label);

struct SavingsReport {
  std::size_t k_star = 0;  // first K reaching the best attainable F1
  double best_f1 = 0.0;
  double runtime_at_k_star = 0.0;
  double exhaustive_runtime = 0.0;
  double overhead_hours = 0.0;
  double training_saving = 0.0;    // 1 - runtime@K* / exhaustive
  double end_to_end_saving = 0.0;  // 1 - (runtime@K* + overhead) / exhaustive
};

SavingsReport savings_summary(const BudgetCurve& predicted, double exhaustive_runtime_hours,
                              double overhead_hours);

std::string write_budget_csv(const BudgetCurve& curve);
std::string write_ndcg_csv(const std::vector<CurveStats>& curve);

}  // namespace divrank::eval
