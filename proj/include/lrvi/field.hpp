#pragma once

// Least-squares loss and the empirical monotone field
//
//   loss(B)  = 1/|S| sum_t || forward_t(B) - y_t ||^2
//   field(B) = 1/|S| sum_t adjoint_t( w eta(R_i xi_{i,t}) - y_t )
//
// where y_t = w x_t is the slice target. The link acts on the per-sequence
// predictions R_i xi_{i,t}; the operator weight w scales predictions and
// targets alike, so the true parameters are a zero of the field for every
// link. With the identity link the scaling convention is
//
//   grad loss(B) = 2 field(B).

#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lrvi/measurement.hpp"

namespace lrvi {

enum class FieldMode { full_horizon, stochastic_subwindow };

struct FieldSpec {
  Link link = Link::identity;
  Index order = 1;
  FieldMode mode = FieldMode::full_horizon;
  /// Sub-window length G (stochastic mode only).
  Index window = 0;
  std::uint64_t seed = 0;
  /// Operator weight; defaults to 1/N.
  std::optional<double> weight;

  void validate() const {
    detail::require(order >= 1, "order d must be at least 1");
    if (mode == FieldMode::stochastic_subwindow)
      detail::require(window >= order + 1, "stochastic mode requires G >= d+1");
  }
};

namespace detail {

/// Pairwise (tree) summation of term(k) for k in [lo, hi).
template <typename Scalar, typename Term>
Matrix<Scalar> tree_sum(Index lo, Index hi, const Term& term) {
  if (hi - lo == 1) return term(lo);
  const Index mid = lo + (hi - lo) / 2;
  Matrix<Scalar> left = tree_sum<Scalar>(lo, mid, term);
  left += tree_sum<Scalar>(mid, hi, term);
  return left;
}

template <typename Scalar>
Vector<Scalar> linked_residual(Link link, const MeasurementSlice<Scalar>& slice,
                               const Matrix<Scalar>& b) {
  const Scalar w = slice.weight();
  Vector<Scalar> pred = forward(slice, b) / w;
  pred = apply_link(link, pred, slice.channels());
  return w * (pred - slice.observed());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

} // namespace detail

template <typename Scalar>
Scalar ls_loss(const Matrix<Scalar>& b, std::span<const MeasurementSlice<Scalar>> slices) {
  detail::require(!slices.empty(), "ls_loss needs at least one slice");
  Scalar total = 0;
  for (const auto& s : slices) total += (forward(s, b) - s.target()).squaredNorm();
  return total / Scalar(slices.size());
}

template <typename Scalar>
Matrix<Scalar> field(Link link, const Matrix<Scalar>& b,
                     std::span<const MeasurementSlice<Scalar>> slices) {
  detail::require(!slices.empty(), "field needs at least one slice");
  const auto term = [&](Index k) {
    const auto& s = slices[static_cast<std::size_t>(k)];
    return adjoint(s, detail::linked_residual(link, s, b));
  };
  Matrix<Scalar> out = detail::tree_sum<Scalar>(0, static_cast<Index>(slices.size()), term);
  return out / Scalar(slices.size());
}

template <typename Scalar>
Scalar field_norm_surrogate(Link link, const Matrix<Scalar>& b,
                            std::span<const MeasurementSlice<Scalar>> slices) {
  return field(link, b, slices).norm();
}

/// Empirical field over a collection, evaluated without materialising slices.
///
/// Full-horizon mode uses every t = d+1..T_min. Stochastic mode draws one
/// random window of length G per sequence; the draw is fixed between calls
/// and replaced by advance(iteration), which seeds from (seed, iteration) so
/// runs are reproducible. The identity link in full-horizon mode runs on
/// cached per-sequence Gram matrices.
template <typename Scalar = double>
class EmpiricalField {
public:
  EmpiricalField(const SequenceCollection<Scalar>& collection, FieldSpec spec)
      : collection_(&collection), spec_(spec),
        plan_(plan_full_horizon(collection, spec.order, weight_option(spec))) {
    spec_.validate();
    if (spec_.mode == FieldMode::stochastic_subwindow) {
      advance(0);
    } else if (spec_.link == Link::identity) {
      build_gram();
    }
  }

  const FieldSpec& spec() const noexcept { return spec_; }
  const SlicePlan<Scalar>& plan() const noexcept { return plan_; }
  Index rows() const noexcept { return parameter_rows(collection_->channels(), spec_.order); }
  Index cols() const noexcept { return static_cast<Index>(collection_->size()); }
  bool uses_gram() const noexcept { return !gram_.empty(); }

  /// Redraws the stochastic windows for solver iteration `iteration`. No-op in
  /// full-horizon mode.
  void advance(std::uint64_t iteration) {
    if (spec_.mode != FieldMode::stochastic_subwindow) return;
    std::mt19937_64 rng(detail::mix_seed(spec_.seed, iteration));
    plan_ = plan_subwindows(*collection_, spec_.order, spec_.window, rng, weight_option(spec_));
  }

  Matrix<Scalar> operator()(const Matrix<Scalar>& b) const {
    check(b);
    const Index c = collection_->channels();
    const Index len = regressor_length(c, spec_.order);
    const Scalar w = plan_.weight();
    const Scalar scale = w * w / Scalar(plan_.count());
    Matrix<Scalar> out(b.rows(), b.cols());
    for (Index i = 0; i < b.cols(); ++i) {
      Eigen::Map<const Matrix<Scalar>> r(b.col(i).data(), c, len);
      Eigen::Map<Matrix<Scalar>> g(out.col(i).data(), c, len);
      if (uses_gram()) {
        g.noalias() = r * gram_[static_cast<std::size_t>(i)];
        g -= cross_[static_cast<std::size_t>(i)];
      } else {
        const Matrix<Scalar> design = design_matrix(i);
        Matrix<Scalar> res = r * design;
        link_columns(res);
        res -= observations(i);
        g.noalias() = res * design.transpose();
      }
      g *= scale;
    }
    return out;
  }

  /// (1/|S|) sum_t || w (eta(R_i xi) - x) ||^2; equals ls_loss for the
  /// identity link.
  Scalar loss(const Matrix<Scalar>& b) const {
    check(b);
    const Index c = collection_->channels();
    const Index len = regressor_length(c, spec_.order);
    const Scalar w = plan_.weight();
    Scalar total = 0;
    for (Index i = 0; i < b.cols(); ++i) {
      Eigen::Map<const Matrix<Scalar>> r(b.col(i).data(), c, len);
      if (uses_gram()) {
        const auto k = static_cast<std::size_t>(i);
        total += (r * gram_[k]).cwiseProduct(r).sum() - Scalar(2) * r.cwiseProduct(cross_[k]).sum() +
                 target_energy_[k];
      } else {
        const Matrix<Scalar> design = design_matrix(i);
        Matrix<Scalar> res = r * design;
        link_columns(res);
        res -= observations(i);
        total += res.squaredNorm();
      }
    }
    return std::max(Scalar(0), w * w * total / Scalar(plan_.count()));
  }

  /// (C d + 1) x |S| matrix of regressors for sequence i under the current plan.
  Matrix<Scalar> design_matrix(Index i) const {
    Matrix<Scalar> design(regressor_length(collection_->channels(), spec_.order), plan_.count());
    for (Index k = 0; k < plan_.count(); ++k) plan_.fill_regressor(i, k, design.col(k));
    return design;
  }

  /// C x |S| block of observed targets for sequence i.
  auto observations(Index i) const {
    const auto& seq = collection_->sequence(static_cast<std::size_t>(i));
    return seq.middleCols(plan_.time(i, 0) - 1, plan_.count());
  }

private:
  static std::optional<Scalar> weight_option(const FieldSpec& spec) {
    if (spec.weight) return static_cast<Scalar>(*spec.weight);
    return std::nullopt;
  }

  void check(const Matrix<Scalar>& b) const {
    detail::require<ShapeError>(b.rows() == rows() && b.cols() == cols(),
                                "parameter shape does not match the field");
  }

  void link_columns(Matrix<Scalar>& m) const {
    if (spec_.link == Link::identity) return;
    for (Index k = 0; k < m.cols(); ++k) detail::apply_link_block<Scalar>(spec_.link, m.col(k));
  }

  void build_gram() {
    const auto n = collection_->size();
    gram_.resize(n);
    cross_.resize(n);
    target_energy_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix<Scalar> design = design_matrix(static_cast<Index>(i));
      const auto obs = observations(static_cast<Index>(i));
      gram_[i].noalias() = design * design.transpose();
      cross_[i].noalias() = obs * design.transpose();
      target_energy_[i] = obs.squaredNorm();
    }
  }

  const SequenceCollection<Scalar>* collection_;
  FieldSpec spec_;
  SlicePlan<Scalar> plan_;
  std::vector<Matrix<Scalar>> gram_;
  std::vector<Matrix<Scalar>> cross_;
  std::vector<Scalar> target_energy_;
};

} // namespace lrvi
