#pragma once

// Observation model: sequence containers, regressor windows, parameter
// matrices and monotone link functions.
//
// A sequence is stored as a C x T matrix (one column per time step). Time
// indices in the public API are 1-based to match the usual AR notation: the
// regressor at time t uses observations t-1, ..., t-d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "lrvi/errors.hpp"

namespace lrvi {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Number of rows of a parameter matrix: C^2 d + C.
constexpr Index parameter_rows(Index channels, Index order) noexcept {
  return channels * channels * order + channels;
}

/// Length of a regressor window: C d + 1.
constexpr Index regressor_length(Index channels, Index order) noexcept {
  return channels * order + 1;
}

enum class SequenceKind { real, simplex };

template <typename Scalar = double>
class SequenceCollection {
public:
  using MatrixType = Matrix<Scalar>;

  SequenceCollection() = default;

  /// Empty `ids` are replaced with "seq_<i>". Throws ShapeError/ConfigError on
  /// invariant violations.
  SequenceCollection(std::vector<MatrixType> sequences, std::vector<std::string> ids,
                     std::optional<std::vector<int>> labels, Index channels,
                     SequenceKind kind = SequenceKind::real)
      : sequences_(std::move(sequences)), ids_(std::move(ids)), labels_(std::move(labels)),
        channels_(channels), kind_(kind) {
    detail::require(channels_ >= 1, "channel_count must be positive");
    if (ids_.empty()) {
      ids_.reserve(sequences_.size());
      for (std::size_t i = 0; i < sequences_.size(); ++i) ids_.push_back("seq_" + std::to_string(i));
    }
    detail::require<ShapeError>(ids_.size() == sequences_.size(), "one id per sequence required");
    if (labels_)
      detail::require<ShapeError>(labels_->size() == sequences_.size(),
                                  "one label per sequence required");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_)
      detail::require(seen.insert(id).second, "duplicate sequence id: " + id);
    for (std::size_t i = 0; i < sequences_.size(); ++i) {
      const auto& s = sequences_[i];
      detail::require<ShapeError>(s.rows() == channels_,
                                  "sequence " + ids_[i] + " has wrong channel count");
      detail::require<NumericalError>(s.allFinite(), "sequence " + ids_[i] + " is not finite");
      if (kind_ == SequenceKind::simplex) {
        for (Index t = 0; t < s.cols(); ++t) {
          const bool nonneg = (s.col(t).array() >= Scalar(0)).all();
          const bool sums = std::abs(static_cast<double>(s.col(t).sum()) - 1.0) <= 1e-9;
          detail::require(nonneg && sums,
                          "sequence " + ids_[i] + " column " + std::to_string(t) +
                              " is not on the probability simplex");
        }
      }
    }
  }

  std::size_t size() const noexcept { return sequences_.size(); }
  Index channels() const noexcept { return channels_; }
  SequenceKind kind() const noexcept { return kind_; }

  const MatrixType& sequence(std::size_t i) const { return sequences_.at(i); }
  const std::vector<MatrixType>& sequences() const noexcept { return sequences_; }
  Index length(std::size_t i) const { return sequences_.at(i).cols(); }

  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }

  Index min_length() const {
    if (sequences_.empty()) return 0;
    Index m = sequences_.front().cols();
    for (const auto& s : sequences_) m = std::min(m, s.cols());
    return m;
  }

  SequenceCollection subset(std::span<const std::size_t> which) const {
    std::vector<MatrixType> seqs;
    std::vector<std::string> ids;
    std::optional<std::vector<int>> labels;
    if (labels_) labels.emplace();
    for (auto i : which) {
      seqs.push_back(sequences_.at(i));
      ids.push_back(ids_.at(i));
      if (labels_) labels->push_back((*labels_)[i]);
    }
    return SequenceCollection(std::move(seqs), std::move(ids), std::move(labels), channels_, kind_);
  }

private:
  std::vector<MatrixType> sequences_;
  std::vector<std::string> ids_;
  std::optional<std::vector<int>> labels_;
  Index channels_ = 1;
  SequenceKind kind_ = SequenceKind::real;
};

/// vec(1, x_{t-1}, ..., x_{t-d}): bias first, then the d past observations,
/// most recent first, channels of one time step contiguous.
template <typename Scalar = double>
class RegressorWindow {
public:
  explicit RegressorWindow(Vector<Scalar> values, Index channels, Index order)
      : values_(std::move(values)) {
    detail::require<ShapeError>(values_.size() == regressor_length(channels, order),
                                "regressor length must be C*d+1");
    detail::require(values_.size() > 0 && values_(0) == Scalar(1),
                    "regressor bias entry must equal 1");
  }

  const Vector<Scalar>& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  Scalar operator[](Index k) const { return values_(k); }

private:
  Vector<Scalar> values_;
};

namespace detail {

template <typename Scalar>
inline void check_regressor_index(const Matrix<Scalar>& seq, Index t, Index order) {
  require(order >= 1, "order d must be at least 1");
  require<IndexError>(t > order && t <= seq.cols(),
                      "time index " + std::to_string(t) + " outside (d, T] = (" +
                          std::to_string(order) + ", " + std::to_string(seq.cols()) + "]");
}

/// Writes the regressor for 1-based time t into `out` (length C d + 1).
/// No bounds checking.
template <typename Scalar, typename Out>
inline void fill_regressor(const Matrix<Scalar>& seq, Index t, Index order, Out&& out) {
  const Index c = seq.rows();
  out(0) = Scalar(1);
  for (Index s = 1; s <= order; ++s) out.segment(1 + (s - 1) * c, c) = seq.col(t - 1 - s);
}

} // namespace detail

template <typename Scalar>
RegressorWindow<Scalar> build_regressor(const Matrix<Scalar>& seq, Index t, Index order) {
  detail::check_regressor_index(seq, t, order);
  Vector<Scalar> xi(regressor_length(seq.rows(), order));
  detail::fill_regressor<Scalar>(seq, t, order, xi);
  return RegressorWindow<Scalar>(std::move(xi), seq.rows(), order);
}

/// Stacked per-sequence AR weights; column i is vec(R_i) with R_i of shape
/// C x (C d + 1), stored column-major.
template <typename Scalar = double>
class ParameterMatrix {
public:
  using MatrixType = Matrix<Scalar>;
  using BlockMap = Eigen::Map<const MatrixType>;

  ParameterMatrix(MatrixType data, Index channels, Index order)
      : data_(std::move(data)), channels_(channels), order_(order) {
    detail::require(channels_ >= 1 && order_ >= 1, "channels and order must be positive");
    detail::require<ShapeError>(data_.rows() == parameter_rows(channels_, order_),
                                "parameter matrix must have C^2 d + C rows");
    detail::require<NumericalError>(data_.allFinite(), "parameter matrix has non-finite entries");
  }

  static ParameterMatrix zeros(Index channels, Index order, Index sequences) {
    return ParameterMatrix(MatrixType::Zero(parameter_rows(channels, order), sequences), channels,
                           order);
  }

  const MatrixType& data() const noexcept { return data_; }
  Index channels() const noexcept { return channels_; }
  Index order() const noexcept { return order_; }
  Index rows() const noexcept { return data_.rows(); }
  Index sequences() const noexcept { return data_.cols(); }

  /// R_i as a C x (C d + 1) view.
  BlockMap block(Index i) const {
    return BlockMap(data_.col(i).data(), channels_, regressor_length(channels_, order_));
  }

private:
  MatrixType data_;
  Index channels_;
  Index order_;
};

enum class Link { identity, softmax, exponential, logistic };

/// Inputs to exp/logistic are clamped to [-500, 500]; exp(500) ~ 1.4e217.
inline constexpr double kLinkClamp = 500.0;

inline std::string_view to_string(Link link) {
  switch (link) {
  case Link::identity: return "identity";
  case Link::softmax: return "softmax";
  case Link::exponential: return "exponential";
  case Link::logistic: return "logistic";
  }
  return "identity";
}

inline Link parse_link(std::string_view name) {
  if (name == "identity" || name == "linear") return Link::identity;
  if (name == "softmax") return Link::softmax;
  if (name == "exponential" || name == "exp") return Link::exponential;
  if (name == "logistic") return Link::logistic;
  throw ConfigError("unknown link function: " + std::string(name));
}

namespace detail {

template <typename Scalar>
inline Scalar clamp_link_input(Scalar z) {
  return std::clamp(z, Scalar(-kLinkClamp), Scalar(kLinkClamp));
}

/// Applies the link in place to one block of C entries.
template <typename Scalar, typename Block>
inline void apply_link_block(Link link, Block&& z) {
  using std::exp;
  switch (link) {
  case Link::identity: break;
  case Link::softmax: {
    const Scalar mx = z.maxCoeff();
    for (Index k = 0; k < z.size(); ++k) z(k) = exp(z(k) - mx);
    z /= z.sum();
    break;
  }
  case Link::exponential:
    for (Index k = 0; k < z.size(); ++k) z(k) = exp(clamp_link_input(z(k)));
    break;
  case Link::logistic:
    for (Index k = 0; k < z.size(); ++k) {
      const Scalar v = clamp_link_input(z(k));
      z(k) = v >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-v)) : exp(v) / (Scalar(1) + exp(v));
    }
    break;
  }
}

} // namespace detail

/// Applies the link to a stacked vector; softmax acts on each contiguous block
/// of `channels` entries, the other variants elementwise.
template <typename Scalar>
Vector<Scalar> apply_link(Link link, const Vector<Scalar>& z, Index channels) {
  detail::require(channels >= 1, "channels must be positive");
  detail::require<ShapeError>(z.size() % channels == 0, "length must be a multiple of C");
  Vector<Scalar> out = z;
  for (Index b = 0; b < out.size(); b += channels)
    detail::apply_link_block<Scalar>(link, out.segment(b, channels));
  return out;
}

/// Stacked eta(R_i xi_{i,t}) over all sequences at 1-based time t.
template <typename Scalar>
Vector<Scalar> predict(const ParameterMatrix<Scalar>& params,
                       const SequenceCollection<Scalar>& collection, Index t, Link link) {
  const Index c = collection.channels();
  const Index n = static_cast<Index>(collection.size());
  detail::require<ShapeError>(params.channels() == c, "channel count mismatch");
  detail::require<ShapeError>(params.sequences() == n, "sequence count mismatch");
  Vector<Scalar> out(c * n);
  Vector<Scalar> xi(regressor_length(c, params.order()));
  for (Index i = 0; i < n; ++i) {
    const auto& seq = collection.sequence(static_cast<std::size_t>(i));
    detail::check_regressor_index(seq, t, params.order());
    detail::fill_regressor<Scalar>(seq, t, params.order(), xi);
    out.segment(i * c, c) = params.block(i) * xi;
    detail::apply_link_block<Scalar>(link, out.segment(i * c, c));
  }
  return out;
}

} // namespace lrvi
