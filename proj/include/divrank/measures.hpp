#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace divrank::measures {

struct MeasureConfig {
  double renyi_alpha = 0.99;
  double epsilon_smoothing = 1e-10;

  // Throws ValidationError when alpha is 0 or 1 (or non-positive) or epsilon
  // is outside (0, 1e-6).
  void validate() const;
};

// Every distribution-valued operation below accepts raw non-negative mass
// vectors and rescales them to sum 1 before use. A vector with zero total
// mass cannot be rescaled and is rejected.
std::vector<double> renormalize(std::span<const double> mass);
// Adds epsilon to every entry, then rescales to sum 1.
std::vector<double> smooth(std::span<const double> p, double epsilon);

// Geometric measures; defined for arbitrary real vectors.
double cosine_distance(std::span<const double> u, std::span<const double> v);
double l1_distance(std::span<const double> u, std::span<const double> v);
double l2_distance(std::span<const double> u, std::span<const double> v);

// Information-theoretic, between two distributions. Natural log throughout.
double renyi_divergence(std::span<const double> p, std::span<const double> q, double alpha,
                        double epsilon = 1e-10);
double js_divergence(std::span<const double> p, std::span<const double> q);
// A similarity: 1 for identical inputs, 0 for disjoint supports.
double bhattacharyya_coefficient(std::span<const double> p, std::span<const double> q);
// Earth mover's distance with unit spacing between consecutive indices.
double wasserstein_1d(std::span<const double> p, std::span<const double> q);

// Within one distribution.
double entropy(std::span<const double> p);
double renyi_entropy(std::span<const double> p, double alpha);
double simpson_index(std::span<const double> p);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // excess
};

// Population moments of the raw (unnormalized) values. When the variance is
// below 1e-24 skewness and kurtosis are reported as 0.
Moments moments(std::span<const double> values);

}  // namespace divrank::measures
