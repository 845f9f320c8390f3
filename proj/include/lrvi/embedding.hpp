#pragma once

// Sequence embeddings from a recovered parameter matrix B = U Sigma V^T.
// The coordinates Sigma V^T hold one r-dimensional embedding per column.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lrvi/nuclear.hpp"

namespace lrvi {

template <typename Scalar = double>
struct EmbeddingResult {
  Matrix<Scalar> basis;           // m x r
  Vector<Scalar> singular_values; // r, non-increasing
  Matrix<Scalar> coordinates;     // r x N
  Index approx_rank = 0;
  std::vector<std::string> ids;

  Index rank() const noexcept { return singular_values.size(); }
  bool empty() const noexcept { return rank() == 0; }
  Matrix<Scalar> reconstruct() const { return basis * coordinates; }
};

enum class RankThreshold { relative, additive };

/// Count of singular values "within 1e-2 of the principal one". The relative
/// reading counts sigma_i >= tol * sigma_1; the additive one counts
/// sigma_1 - sigma_i <= tol.
template <typename Scalar>
Index approx_rank(const Vector<Scalar>& singular_values, Scalar tol = Scalar(1e-2),
                  RankThreshold mode = RankThreshold::relative) {
  if (singular_values.size() == 0) return 0;
  const Scalar top = singular_values.maxCoeff();
  if (!(top > Scalar(0))) return 0;
  Index count = 0;
  for (Index i = 0; i < singular_values.size(); ++i) {
    const Scalar s = singular_values(i);
    if (mode == RankThreshold::relative ? s >= tol * top : top - s <= tol) ++count;
  }
  return count;
}

/// Thin SVD keeping singular triples with sigma_i > truncation_tol * sigma_1.
/// A zero matrix yields an empty embedding.
template <typename Scalar>
EmbeddingResult<Scalar> factorize(const Matrix<Scalar>& b, std::vector<std::string> ids = {},
                                  Scalar truncation_tol = Scalar(1e-10)) {
  detail::require<NumericalError>(b.allFinite(), "parameter matrix is not finite");
  if (!ids.empty())
    detail::require<ShapeError>(static_cast<Index>(ids.size()) == b.cols(), "one id per column");
  EmbeddingResult<Scalar> out;
  out.ids = std::move(ids);
  if (b.size() == 0) {
    out.coordinates.resize(0, b.cols());
    return out;
  }
  const auto svd = detail::thin_svd(b);
  const Vector<Scalar>& s = svd.singularValues();
  Index r = 0;
  const Scalar top = s.size() > 0 ? s(0) : Scalar(0);
  while (r < s.size() && top > Scalar(0) && s(r) > truncation_tol * top) ++r;
  out.basis = svd.matrixU().leftCols(r);
  out.singular_values = s.head(r);
  out.coordinates = out.singular_values.asDiagonal() * svd.matrixV().leftCols(r).transpose();
  out.approx_rank = approx_rank<Scalar>(out.singular_values);
  return out;
}

template <typename Scalar>
EmbeddingResult<Scalar> factorize(const ParameterMatrix<Scalar>& p,
                                  std::vector<std::string> ids = {},
                                  Scalar truncation_tol = Scalar(1e-10)) {
  return factorize<Scalar>(p.data(), std::move(ids), truncation_tol);
}

template <typename Scalar = double>
struct PcaResult {
  Matrix<Scalar> projection;                // k x N
  Vector<Scalar> explained_variance_ratio;  // k
  Matrix<Scalar> axes;                      // r x k
  bool degenerate = false;                  // zero total variance
};

/// Centres the columns and projects onto the top-k principal axes.
template <typename Scalar>
PcaResult<Scalar> pca_project(const Matrix<Scalar>& coordinates, Index k) {
  const Index r = coordinates.rows();
  const Index n = coordinates.cols();
  detail::require(k >= 1, "k must be positive");
  detail::require(k <= r, "k exceeds the embedding dimension");
  detail::require(n >= 1, "no points to project");
  const Vector<Scalar> mean = coordinates.rowwise().mean();
  const Matrix<Scalar> centred = coordinates.colwise() - mean;
  const Matrix<Scalar> cov = centred * centred.transpose() / Scalar(n);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(cov);
  detail::require<NumericalError>(eig.info() == Eigen::Success, "eigendecomposition failed");
  // Eigenvalues come in increasing order.
  const Vector<Scalar> values = eig.eigenvalues().reverse().cwiseMax(Scalar(0));
  const Matrix<Scalar> vectors = eig.eigenvectors().rowwise().reverse();
  PcaResult<Scalar> out;
  const Scalar total = values.sum();
  out.degenerate = !(total > Scalar(0));
  out.axes = vectors.leftCols(k);
  out.projection = out.axes.transpose() * centred;
  out.explained_variance_ratio =
      out.degenerate ? Vector<Scalar>::Zero(k) : Vector<Scalar>(values.head(k) / total);
  return out;
}

/// Header: id[,label],dim_1..dim_r
template <typename Scalar>
void write_embedding_csv(std::ostream& os, const EmbeddingResult<Scalar>& e,
                         const std::optional<std::vector<int>>& labels = std::nullopt) {
  const auto old = os.precision(17);
  os << "id";
  if (labels) os << ",label";
  for (Index d = 0; d < e.rank(); ++d) os << ",dim_" << d + 1;
  os << '\n';
  for (Index i = 0; i < e.coordinates.cols(); ++i) {
    os << (e.ids.empty() ? "seq_" + std::to_string(i) : e.ids[static_cast<std::size_t>(i)]);
    if (labels) os << ',' << (*labels)[static_cast<std::size_t>(i)];
    for (Index d = 0; d < e.rank(); ++d) os << ',' << static_cast<double>(e.coordinates(d, i));
    os << '\n';
  }
  os.precision(old);
}

} // namespace lrvi
