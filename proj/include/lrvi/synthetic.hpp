#pragma once

// Synthetic univariate AR benchmark: per-class baseline coefficients,
// per-sequence perturbations and simulated observations.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "lrvi/model.hpp"

namespace lrvi::synthetic {

enum class Baseline { exp_decay, uniform };
enum class Perturbation { gaussian, most_recent_third, uniform_fixed_vector };

std::string_view to_string(Baseline b);
std::string_view to_string(Perturbation p);
Baseline parse_baseline(std::string_view name);
Perturbation parse_perturbation(std::string_view name);

struct GenClassSpec {
  Baseline baseline = Baseline::exp_decay;
  Perturbation perturbation = Perturbation::gaussian;
  Index order = 15;
  Index per_class = 300;
  Index length = 250;
  /// Variance of the innovations epsilon_{i,t}.
  double noise_var = 0.02;
  /// Variance of the gaussian / most-recent-third perturbations.
  double perturb_var = 0.02;
  /// Ratio gamma of the exponentially decaying baseline.
  double decay = 0.9;

  void validate() const;
};

/// The five generating procedures, each used twice: ten classes in total.
std::vector<GenClassSpec> standard_classes(Index order = 15, Index per_class = 300,
                                           Index length = 250, double noise_var = 0.02);

Eigen::VectorXd gen_baseline(const GenClassSpec& spec, std::mt19937_64& rng);

/// Uniform direction on the unit sphere in R^order.
Eigen::VectorXd random_unit_vector(Index order, std::mt19937_64& rng);

/// `direction` is only read for Perturbation::uniform_fixed_vector and must
/// then be a unit vector shared by the whole class.
Eigen::VectorXd perturb(const Eigen::VectorXd& baseline, const GenClassSpec& spec,
                        const Eigen::VectorXd& direction, std::mt19937_64& rng);

/// x_t ~ N(0, 1) for t <= d, then x_t = sum_s b_s x_{t-s} + eps_t.
/// Throws NumericalError once |x_t| exceeds 1e12.
Eigen::RowVectorXd simulate_ar(const Eigen::VectorXd& coeffs, Index length, double noise_var,
                               std::mt19937_64& rng);

struct Benchmark {
  SequenceCollection<double> collection;
  /// (d + 1) x N with a zero bias row on top of the lag coefficients.
  ParameterMatrix<double> truth;
  /// One baseline per class.
  std::vector<Eigen::VectorXd> baselines;
};

/// Concatenates the classes in order; labels are the class positions.
/// Sequence streams are seeded from (seed, class, index) so generation is
/// reproducible and independent of class sizes. A draw whose simulation blows
/// up is redrawn once before giving up.
Benchmark gen_benchmark(std::span<const GenClassSpec> classes, std::uint64_t seed);

} // namespace lrvi::synthetic
