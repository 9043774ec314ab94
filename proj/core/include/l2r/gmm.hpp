#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "l2r/random.hpp"

namespace l2r::gmm {

struct Component {
  double weight = 1.0;
  double mean = 0.0;  ///< points
  double var = 1.0;   ///< points^2

  friend bool operator==(const Component&, const Component&) = default;
};

/// Univariate Gaussian mixture over per-frame radar point counts.
class Gmm1D {
 public:
  /// Throws DomainError unless K >= 1, weights are in [0, 1] summing to 1
  /// within 1e-9, and variances are positive and finite.
  explicit Gmm1D(std::vector<Component> components);

  std::span<const Component> components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  double mean() const;
  double variance() const;
  double log_pdf(double x) const;
  double log_likelihood(std::span<const double> xs) const;

  friend bool operator==(const Gmm1D&, const Gmm1D&) = default;

 private:
  std::vector<Component> components_;
};

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr std::size_t kDefaultComponents = 5;

struct FitOptions {
  std::size_t components = kDefaultComponents;
  double tol = 1e-8;
  std::size_t max_iter = 500;
  std::uint64_t seed = 0;
  double var_floor = kVarianceFloor;
};

struct FitResult {
  Gmm1D model;
  /// Log-likelihood of the initial model followed by one entry per M-step;
  /// the last entry belongs to `model`.
  std::vector<double> log_likelihood_trace;
  /// Sum of mixture weights after each M-step.
  std::vector<double> weight_sums;
  std::size_t iterations = 0;
  bool converged = false;
};

/// EM with k-means++ seeding. Throws InsufficientDataError when there are fewer
/// counts than components and DomainError on a non-positive count.
FitResult fit_em(std::span<const std::int64_t> counts, const FitOptions& options = {});

/// Index of a component drawn with probability equal to its weight.
std::size_t draw_component(const Gmm1D& model, CounterRng& rng);

/// Component by weight, then a Gaussian draw rounded to the nearest integer,
/// clamped to >= 2 so the two sampling stages each get at least one point.
std::int64_t sample_count(const Gmm1D& model, CounterRng& rng);

// JSON: {"components":[{"weight":w,"mean":m,"var":v},...]}
std::string to_json(const Gmm1D& model);
/// Throws ParseError on malformed JSON and SchemaError on missing fields.
Gmm1D from_json(const std::string& text);
void save_gmm(const Gmm1D& model, const std::filesystem::path& path);
Gmm1D load_gmm(const std::filesystem::path& path);

}  // namespace l2r::gmm
