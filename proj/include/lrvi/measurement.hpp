#pragma once

// Random linear measurement operator A_t and its adjoint.
//
// A slice packages, for one time step, the regressor window of every sequence
// together with the observed values at that step. The operator is
//
//   forward(B) = w * vec([R_i xi_i]_i)
//   adjoint(y) = w * [vec(y_i xi_i^T)]_i
//
// with weight w (default 1/N). Targets live on the same scale as the operator
// output: target() = w * observed(). Observation noise enters only through
// the data, never through the operator.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lrvi/model.hpp"

namespace lrvi {

template <typename Scalar = double>
class MeasurementSlice {
public:
  /// `regressors` is (C d + 1) x N, column i the window of sequence i;
  /// `observed` is the stacked x_{i,t}, length C N.
  MeasurementSlice(Matrix<Scalar> regressors, Vector<Scalar> observed, Index channels,
                   Index order, Scalar weight)
      : regressors_(std::move(regressors)), observed_(std::move(observed)), channels_(channels),
        order_(order), weight_(weight) {
    detail::require<ShapeError>(regressors_.rows() == regressor_length(channels_, order_),
                                "regressor rows must be C*d+1");
    detail::require<ShapeError>(observed_.size() == channels_ * regressors_.cols(),
                                "target length must be C*N");
    detail::require((regressors_.row(0).array() == Scalar(1)).all(),
                    "regressor bias entries must equal 1");
  }

  Index sequences() const noexcept { return regressors_.cols(); }
  Index channels() const noexcept { return channels_; }
  Index order() const noexcept { return order_; }
  Scalar weight() const noexcept { return weight_; }

  const Matrix<Scalar>& regressors() const noexcept { return regressors_; }
  RegressorWindow<Scalar> regressor(Index i) const {
    return RegressorWindow<Scalar>(regressors_.col(i), channels_, order_);
  }
  const Vector<Scalar>& observed() const noexcept { return observed_; }
  Vector<Scalar> target() const { return weight_ * observed_; }

private:
  Matrix<Scalar> regressors_;
  Vector<Scalar> observed_;
  Index channels_;
  Index order_;
  Scalar weight_;
};

namespace detail {

template <typename Scalar>
inline void check_slice_params(const MeasurementSlice<Scalar>& slice, const Matrix<Scalar>& b) {
  require<ShapeError>(b.rows() == parameter_rows(slice.channels(), slice.order()),
                      "parameter rows do not match slice (C^2 d + C)");
  require<ShapeError>(b.cols() == slice.sequences(), "parameter columns do not match N");
}

} // namespace detail

template <typename Scalar>
Vector<Scalar> forward(const MeasurementSlice<Scalar>& slice, const Matrix<Scalar>& b) {
  detail::check_slice_params(slice, b);
  const Index c = slice.channels();
  const Index len = regressor_length(c, slice.order());
  Vector<Scalar> out(c * slice.sequences());
  for (Index i = 0; i < slice.sequences(); ++i) {
    Eigen::Map<const Matrix<Scalar>> r(b.col(i).data(), c, len);
    out.segment(i * c, c).noalias() = r * slice.regressors().col(i);
  }
  return slice.weight() * out;
}

template <typename Scalar>
Vector<Scalar> forward(const MeasurementSlice<Scalar>& slice, const ParameterMatrix<Scalar>& p) {
  return forward(slice, p.data());
}

template <typename Scalar>
Matrix<Scalar> adjoint(const MeasurementSlice<Scalar>& slice, const Vector<Scalar>& y) {
  const Index c = slice.channels();
  const Index len = regressor_length(c, slice.order());
  detail::require<ShapeError>(y.size() == c * slice.sequences(), "adjoint input must have length C*N");
  Matrix<Scalar> out(parameter_rows(c, slice.order()), slice.sequences());
  for (Index i = 0; i < slice.sequences(); ++i) {
    Eigen::Map<Matrix<Scalar>> r(out.col(i).data(), c, len);
    r.noalias() = slice.weight() * y.segment(i * c, c) * slice.regressors().col(i).transpose();
  }
  return out;
}

/// Lazily evaluated set of slices: per-sequence window offsets plus a common
/// count. Slice k uses, for sequence i, local time d+1+k inside the window
/// that starts at offsets[i].
template <typename Scalar = double>
class SlicePlan {
public:
  SlicePlan(const SequenceCollection<Scalar>& collection, Index order,
            std::vector<Index> offsets, Index count, Scalar weight)
      : collection_(&collection), order_(order), offsets_(std::move(offsets)), count_(count),
        weight_(weight) {
    detail::require<ShapeError>(offsets_.size() == collection.size(), "one offset per sequence");
  }

  const SequenceCollection<Scalar>& collection() const noexcept { return *collection_; }
  Index order() const noexcept { return order_; }
  Index channels() const noexcept { return collection_->channels(); }
  Index count() const noexcept { return count_; }
  Index sequences() const noexcept { return static_cast<Index>(collection_->size()); }
  Scalar weight() const noexcept { return weight_; }
  const std::vector<Index>& offsets() const noexcept { return offsets_; }

  /// 1-based absolute time of slice k in sequence i.
  Index time(Index i, Index k) const noexcept {
    return offsets_[static_cast<std::size_t>(i)] + order_ + 1 + k;
  }

  template <typename Out>
  void fill_regressor(Index i, Index k, Out&& out) const {
    detail::fill_regressor<Scalar>(collection_->sequence(static_cast<std::size_t>(i)), time(i, k),
                                   order_, out);
  }

  auto observed(Index i, Index k) const {
    return collection_->sequence(static_cast<std::size_t>(i)).col(time(i, k) - 1);
  }

  MeasurementSlice<Scalar> slice(Index k) const {
    const Index c = channels();
    const Index n = sequences();
    Matrix<Scalar> xi(regressor_length(c, order_), n);
    Vector<Scalar> obs(c * n);
    for (Index i = 0; i < n; ++i) {
      fill_regressor(i, k, xi.col(i));
      obs.segment(i * c, c) = observed(i, k);
    }
    return MeasurementSlice<Scalar>(std::move(xi), std::move(obs), c, order_, weight_);
  }

  std::vector<MeasurementSlice<Scalar>> materialize() const {
    std::vector<MeasurementSlice<Scalar>> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (Index k = 0; k < count_; ++k) out.push_back(slice(k));
    return out;
  }

private:
  const SequenceCollection<Scalar>* collection_;
  Index order_;
  std::vector<Index> offsets_;
  Index count_;
  Scalar weight_;
};

/// Default operator weight 1/N.
template <typename Scalar>
Scalar default_weight(const SequenceCollection<Scalar>& collection) {
  return collection.size() == 0 ? Scalar(1) : Scalar(1) / Scalar(collection.size());
}

/// Slices t = d+1 .. T_min, aligned at the start of every sequence.
template <typename Scalar>
SlicePlan<Scalar> plan_full_horizon(const SequenceCollection<Scalar>& collection, Index order,
                                    std::optional<Scalar> weight = std::nullopt) {
  detail::require(order >= 1, "order d must be at least 1");
  detail::require<ShapeError>(collection.size() > 0, "empty collection");
  const Index tmin = collection.min_length();
  detail::require<IndexError>(tmin >= order + 1, "sequences shorter than d+1 (T_min = " +
                                                     std::to_string(tmin) + ")");
  return SlicePlan<Scalar>(collection, order, std::vector<Index>(collection.size(), 0),
                           tmin - order, weight.value_or(default_weight(collection)));
}

template <typename Scalar>
std::vector<MeasurementSlice<Scalar>> enumerate_slices(const SequenceCollection<Scalar>& collection,
                                                       Index order,
                                                       std::optional<Scalar> weight = std::nullopt) {
  return plan_full_horizon(collection, order, weight).materialize();
}

/// One uniformly random window of length G per sequence, aligned positionally;
/// yields G - d slices.
template <typename Scalar, typename Rng>
SlicePlan<Scalar> plan_subwindows(const SequenceCollection<Scalar>& collection, Index order,
                                  Index window, Rng& rng,
                                  std::optional<Scalar> weight = std::nullopt) {
  detail::require(order >= 1, "order d must be at least 1");
  detail::require(window >= order + 1, "window length G must be at least d+1");
  detail::require<ShapeError>(collection.size() > 0, "empty collection");
  detail::require<IndexError>(window <= collection.min_length(),
                              "window length G exceeds the shortest sequence");
  std::vector<Index> offsets(collection.size());
  for (std::size_t i = 0; i < collection.size(); ++i) {
    std::uniform_int_distribution<Index> pick(0, collection.length(i) - window);
    offsets[i] = pick(rng);
  }
  return SlicePlan<Scalar>(collection, order, std::move(offsets), window - order,
                           weight.value_or(default_weight(collection)));
}

template <typename Scalar, typename Rng>
std::vector<MeasurementSlice<Scalar>> sample_subwindow_slices(
    const SequenceCollection<Scalar>& collection, Index order, Index window, Rng& rng,
    std::optional<Scalar> weight = std::nullopt) {
  return plan_subwindows(collection, order, window, rng, weight).materialize();
}

} // namespace lrvi
