#include "divrank/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "divrank/common.hpp"

namespace divrank::measures {
namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": operand lengths differ (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) {
    throw ValidationError(std::string(what) + ": empty operands");
  }
}

void require_alpha(double alpha, const char* what) {
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha)) {
    throw ValidationError(std::string(what) + ": order alpha must be positive and not 1");
  }
}

double kl_term(double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; }

}  // namespace

void MeasureConfig::validate() const {
  require_alpha(renyi_alpha, "renyi_alpha");
  if (!(epsilon_smoothing > 0.0) || !(epsilon_smoothing < 1e-6)) {
    throw ValidationError("epsilon_smoothing must lie in (0, 1e-6)");
  }
}

std::vector<double> renormalize(std::span<const double> mass) {
  double total = 0.0;
  for (double x : mass) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError("distribution entries must be finite and non-negative");
    }
    total += x;
  }
  if (!(total > 0.0)) {
    throw ValidationError("distribution has zero total mass");
  }
  std::vector<double> out(mass.begin(), mass.end());
  for (auto& x : out) x /= total;
  return out;
}

std::vector<double> smooth(std::span<const double> p, double epsilon) {
  std::vector<double> out(p.begin(), p.end());
  for (auto& x : out) x += epsilon;
  return renormalize(out);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require_same_length(u, v, "cosine_distance");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (!(uu > 0.0) || !(vv > 0.0)) {
    throw ValidationError("cosine_distance: zero vector");
  }
  return std::clamp(1.0 - dot / (std::sqrt(uu) * std::sqrt(vv)), 0.0, 2.0);
}

double l1_distance(std::span<const double> u, std::span<const double> v) {
  require_same_length(u, v, "l1_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += std::abs(u[i] - v[i]);
  return sum;
}

double l2_distance(std::span<const double> u, std::span<const double> v) {
  require_same_length(u, v, "l2_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double renyi_divergence(std::span<const double> p, std::span<const double> q, double alpha,
                        double epsilon) {
  require_same_length(p, q, "renyi_divergence");
  require_alpha(alpha, "renyi_divergence");
  const auto ps = smooth(renormalize(p), epsilon);
  const auto qs = smooth(renormalize(q), epsilon);
  // sum_i p_i^a q_i^(1-a) = sum_i p_i * exp((1-a) * ln(q_i/p_i))
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sum += ps[i] * std::exp((1.0 - alpha) * std::log(qs[i] / ps[i]));
  }
  return std::max(0.0, std::log(sum) / (alpha - 1.0));
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "js_divergence");
  const auto pn = renormalize(p);
  const auto qn = renormalize(q);
  double sum = 0.0;
  for (std::size_t i = 0; i < pn.size(); ++i) {
    const double m = 0.5 * (pn[i] + qn[i]);
    sum += 0.5 * (kl_term(pn[i], m) + kl_term(qn[i], m));
  }
  return std::clamp(sum, 0.0, std::numbers::ln2);
}

double bhattacharyya_coefficient(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "bhattacharyya_coefficient");
  const auto pn = renormalize(p);
  const auto qn = renormalize(q);
  double sum = 0.0;
  for (std::size_t i = 0; i < pn.size(); ++i) sum += std::sqrt(pn[i] * qn[i]);
  return std::clamp(sum, 0.0, 1.0);
}

double wasserstein_1d(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "wasserstein_1d");
  const auto pn = renormalize(p);
  const auto qn = renormalize(q);
  double cdf_gap = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pn.size(); ++i) {
    cdf_gap += pn[i] - qn[i];
    total += std::abs(cdf_gap);
  }
  return total;
}

double entropy(std::span<const double> p) {
  const auto pn = renormalize(p);
  double sum = 0.0;
  for (double x : pn) {
    if (x > 0.0) sum -= x * std::log(x);
  }
  return std::max(0.0, sum);
}

double renyi_entropy(std::span<const double> p, double alpha) {
  require_alpha(alpha, "renyi_entropy");
  const auto pn = renormalize(p);
  double sum = 0.0;
  for (double x : pn) {
    if (x > 0.0) sum += std::pow(x, alpha);
  }
  return std::max(0.0, std::log(sum) / (1.0 - alpha));
}

double simpson_index(std::span<const double> p) {
  const auto pn = renormalize(p);
  double sum = 0.0;
  for (double x : pn) sum += x * x;
  return sum;
}

Moments moments(std::span<const double> values) {
  if (values.size() < 2) {
    throw ValidationError("moments: need at least 2 values");
  }
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : values) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  Moments out;
  out.mean = mean;
  out.variance = m2;
  if (m2 >= 1e-24) {
    out.skewness = m3 / std::pow(m2, 1.5);
    out.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return out;
}

}  // namespace divrank::measures
