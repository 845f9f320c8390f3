#include "lrvi/synthetic.hpp"

#include <cmath>
#include <string>

#include "lrvi/field.hpp"

namespace lrvi::synthetic {

namespace {

constexpr double kBlowUp = 1e12;

} // namespace

std::string_view to_string(Baseline b) {
  return b == Baseline::exp_decay ? "exp-decay" : "uniform";
}

std::string_view to_string(Perturbation p) {
  switch (p) {
  case Perturbation::gaussian: return "gaussian";
  case Perturbation::most_recent_third: return "most-recent-third";
  case Perturbation::uniform_fixed_vector: return "uniform-times-fixed-vector";
  }
  return "gaussian";
}

Baseline parse_baseline(std::string_view name) {
  if (name == "exp-decay") return Baseline::exp_decay;
  if (name == "uniform") return Baseline::uniform;
  throw ConfigError("unknown baseline: " + std::string(name));
}

Perturbation parse_perturbation(std::string_view name) {
  if (name == "gaussian") return Perturbation::gaussian;
  if (name == "most-recent-third") return Perturbation::most_recent_third;
  if (name == "uniform-times-fixed-vector") return Perturbation::uniform_fixed_vector;
  throw ConfigError("unknown perturbation: " + std::string(name));
}

void GenClassSpec::validate() const {
  detail::require(order >= 1, "order d must be at least 1");
  detail::require(length > order, "length T must exceed d");
  detail::require(per_class >= 1, "per_class must be positive");
  detail::require(noise_var >= 0 && perturb_var >= 0, "variances must be nonnegative");
  detail::require(decay > 0, "decay rate must be positive");
}

std::vector<GenClassSpec> standard_classes(Index order, Index per_class, Index length,
                                           double noise_var) {
  const std::pair<Baseline, Perturbation> procedures[] = {
      {Baseline::exp_decay, Perturbation::gaussian},
      {Baseline::exp_decay, Perturbation::most_recent_third},
      {Baseline::exp_decay, Perturbation::uniform_fixed_vector},
      {Baseline::uniform, Perturbation::gaussian},
      {Baseline::uniform, Perturbation::uniform_fixed_vector},
  };
  std::vector<GenClassSpec> out;
  for (int rep = 0; rep < 2; ++rep) {
    for (const auto& [b, p] : procedures) {
      GenClassSpec spec;
      spec.baseline = b;
      spec.perturbation = p;
      spec.order = order;
      spec.per_class = per_class;
      spec.length = length;
      spec.noise_var = noise_var;
      out.push_back(spec);
    }
  }
  return out;
}

Eigen::VectorXd gen_baseline(const GenClassSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const Index d = spec.order;
  Eigen::VectorXd b(d);
  if (spec.baseline == Baseline::exp_decay) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double z = unit(rng);
    double norm = 0;
    for (Index s = 1; s <= d; ++s) norm += std::pow(spec.decay, static_cast<double>(s));
    for (Index s = 1; s <= d; ++s) b(s - 1) = z * std::pow(spec.decay, static_cast<double>(s)) / norm;
  } else {
    std::uniform_real_distribution<double> pick(0.0, 1.0 / (2.0 * static_cast<double>(d)));
    for (Index s = 0; s < d; ++s) b(s) = pick(rng);
  }
  return b;
}

Eigen::VectorXd random_unit_vector(Index order, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(order);
  do {
    for (Index s = 0; s < order; ++s) v(s) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Eigen::VectorXd perturb(const Eigen::VectorXd& baseline, const GenClassSpec& spec,
                        const Eigen::VectorXd& direction, std::mt19937_64& rng) {
  spec.validate();
  detail::require<ShapeError>(baseline.size() == spec.order, "baseline length must equal d");
  Eigen::VectorXd b = baseline;
  std::normal_distribution<double> noise(0.0, std::sqrt(spec.perturb_var));
  switch (spec.perturbation) {
  case Perturbation::gaussian:
    for (Index j = 0; j < b.size(); ++j) b(j) += noise(rng);
    break;
  case Perturbation::most_recent_third: {
    // 1-based indices j < ceil(d/3), i.e. the ceil(d/3) - 1 most recent lags.
    const Index cutoff = (spec.order + 2) / 3;
    for (Index j = 1; j < cutoff; ++j) b(j - 1) += noise(rng);
    break;
  }
  case Perturbation::uniform_fixed_vector: {
    detail::require<ShapeError>(direction.size() == spec.order, "direction length must equal d");
    std::uniform_real_distribution<double> theta(-1.0, 1.0);
    b += theta(rng) * direction;
    break;
  }
  }
  return b;
}

Eigen::RowVectorXd simulate_ar(const Eigen::VectorXd& coeffs, Index length, double noise_var,
                               std::mt19937_64& rng) {
  const Index d = coeffs.size();
  detail::require(d >= 1, "coefficient vector must be non-empty");
  detail::require(length > d, "length T must exceed d");
  detail::require(noise_var >= 0, "noise variance must be nonnegative");
  std::normal_distribution<double> seat(0.0, 1.0);
  std::normal_distribution<double> innovation(0.0, std::sqrt(noise_var));
  Eigen::RowVectorXd x(length);
  for (Index t = 0; t < d; ++t) x(t) = seat(rng);
  for (Index t = d; t < length; ++t) {
    double v = noise_var > 0 ? innovation(rng) : 0.0;
    for (Index s = 1; s <= d; ++s) v += coeffs(s - 1) * x(t - s);
    if (!std::isfinite(v) || std::abs(v) > kBlowUp)
      throw NumericalError("simulated series exceeded 1e12 at t=" + std::to_string(t + 1) +
                           "; unstable coefficients");
    x(t) = v;
  }
  return x;
}

Benchmark gen_benchmark(std::span<const GenClassSpec> classes, std::uint64_t seed) {
  detail::require(!classes.empty(), "at least one class spec is required");
  const Index order = classes.front().order;
  Index total = 0;
  for (const auto& spec : classes) {
    spec.validate();
    detail::require(spec.order == order, "all classes must share the same order d");
    total += spec.per_class;
  }

  std::vector<Eigen::MatrixXd> sequences;
  std::vector<std::string> ids;
  std::vector<int> labels;
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(parameter_rows(1, order), total);
  std::vector<Eigen::VectorXd> baselines;
  sequences.reserve(static_cast<std::size_t>(total));

  Index column = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& spec = classes[c];
    std::mt19937_64 class_rng(detail::mix_seed(seed, c));
    const Eigen::VectorXd baseline = gen_baseline(spec, class_rng);
    const Eigen::VectorXd direction = random_unit_vector(order, class_rng);
    baselines.push_back(baseline);
    for (Index j = 0; j < spec.per_class; ++j, ++column) {
      std::mt19937_64 rng(detail::mix_seed(seed, (static_cast<std::uint64_t>(c + 1) << 32) +
                                                     static_cast<std::uint64_t>(j)));
      Eigen::VectorXd coeffs;
      Eigen::RowVectorXd series;
      for (int attempt = 0;; ++attempt) {
        coeffs = perturb(baseline, spec, direction, rng);
        try {
          series = simulate_ar(coeffs, spec.length, spec.noise_var, rng);
          break;
        } catch (const NumericalError& e) {
          if (attempt >= 1)
            throw NumericalError("class " + std::to_string(c) + " sequence " + std::to_string(j) +
                                 ": " + e.what());
        }
      }
      truth.col(column).tail(order) = coeffs;
      sequences.emplace_back(series);
      ids.push_back("c" + std::to_string(c) + "_s" + std::to_string(j));
      labels.push_back(static_cast<int>(c));
    }
  }
  return Benchmark{SequenceCollection<double>(std::move(sequences), std::move(ids),
                                              std::move(labels), 1, SequenceKind::real),
                   ParameterMatrix<double>(std::move(truth), 1, order), std::move(baselines)};
}

} // namespace lrvi::synthetic
