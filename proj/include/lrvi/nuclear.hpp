#pragma once

// Prox geometry of the nuclear-norm ball {M : ||M||_* <= radius}.
//
// The distance-generating function is the power DGF
//   omega(M) = alpha * sum_i sigma_i(M)^(1+q),
//   q = 1 / (2 ln(2r)),  alpha = 4 sqrt(e) ln(2r) / (2^q (1+q)),  r = min(rows, cols).
//
// prox_nuc follows the ProxNuc recipe: subtract the DGF subgradient at the
// centre, take an SVD, solve the capped-simplex program on the singular
// values and reassemble with negated weights. Two DGF choices are available
// for the subgradient step:
//   - DgfKind::power      subgradient of the power DGF above, projection
//                         from the quadratic capped-simplex program;
//   - DgfKind::euclidean  omega = 1/2 ||M||_F^2, so the prox is the exact
//                         Frobenius projection of (Z - X) onto the ball.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string_view>
#include <vector>

#include <Eigen/SVD>

#include "lrvi/model.hpp"

namespace lrvi {

enum class DgfKind { power, euclidean };

inline std::string_view to_string(DgfKind k) {
  return k == DgfKind::power ? "power" : "euclidean";
}

inline DgfKind parse_dgf(std::string_view name) {
  if (name == "power" || name == "printed") return DgfKind::power;
  if (name == "euclidean" || name == "quadratic") return DgfKind::euclidean;
  throw ConfigError("unknown DGF kind: " + std::string(name));
}

template <typename Scalar = double>
class NuclearBallGeometry {
public:
  /// `radius` may be +infinity, in which case the prox never projects.
  NuclearBallGeometry(Scalar radius, Index rows, Index cols, DgfKind dgf = DgfKind::euclidean)
      : radius_(radius), rows_(rows), cols_(cols), dgf_(dgf) {
    detail::require(radius > Scalar(0), "nuclear radius must be positive");
    detail::require(rows >= 1 && cols >= 1, "matrix space must be non-empty");
    const Scalar two_r = Scalar(2) * Scalar(rank());
    q_ = Scalar(1) / (Scalar(2) * std::log(two_r));
    alpha_ = Scalar(4) * std::sqrt(std::numbers::e_v<Scalar>) * std::log(two_r) /
             (std::pow(Scalar(2), q_) * (Scalar(1) + q_));
  }

  Scalar radius() const noexcept { return radius_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index rank() const noexcept { return std::min(rows_, cols_); }
  Scalar q() const noexcept { return q_; }
  Scalar alpha() const noexcept { return alpha_; }
  DgfKind dgf() const noexcept { return dgf_; }
  bool unbounded() const noexcept { return std::isinf(radius_); }

  NuclearBallGeometry with_radius(Scalar radius) const {
    return NuclearBallGeometry(radius, rows_, cols_, dgf_);
  }

private:
  Scalar radius_;
  Index rows_;
  Index cols_;
  DgfKind dgf_;
  Scalar q_ = 0;
  Scalar alpha_ = 0;
};

namespace detail {

template <typename Scalar>
inline void check_geometry_shape(const NuclearBallGeometry<Scalar>& g, const Matrix<Scalar>& m) {
  require<ShapeError>(m.rows() == g.rows() && m.cols() == g.cols(),
                      "matrix shape does not match the geometry");
  require<NumericalError>(m.allFinite(), "matrix has non-finite entries");
}

template <typename Scalar>
inline Eigen::BDCSVD<Matrix<Scalar>> thin_svd(const Matrix<Scalar>& m, bool vectors = true) {
  const unsigned opts = vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  Eigen::BDCSVD<Matrix<Scalar>> svd(m, opts);
  require<NumericalError>(svd.info() == Eigen::Success, "SVD failed to converge");
  return svd;
}

} // namespace detail

template <typename Scalar>
Vector<Scalar> singular_values(const Matrix<Scalar>& m) {
  return detail::thin_svd(m, false).singularValues();
}

template <typename Scalar>
Scalar nuclear_norm(const Matrix<Scalar>& m) {
  if (m.size() == 0) return Scalar(0);
  return singular_values(m).sum();
}

template <typename Scalar>
Scalar omega(const NuclearBallGeometry<Scalar>& g, const Matrix<Scalar>& m) {
  detail::check_geometry_shape(g, m);
  const Vector<Scalar> s = singular_values(m);
  return g.alpha() * s.array().pow(Scalar(1) + g.q()).sum();
}

/// alpha (1+q) sum_i sigma_i^q u_i v_i^T; singular values at or below
/// 1e-12 sigma_max contribute nothing.
template <typename Scalar>
Matrix<Scalar> omega_subgradient(const NuclearBallGeometry<Scalar>& g, const Matrix<Scalar>& m) {
  detail::check_geometry_shape(g, m);
  const auto svd = detail::thin_svd(m);
  const Vector<Scalar>& s = svd.singularValues();
  const Scalar cutoff = s.size() > 0 ? Scalar(1e-12) * s(0) : Scalar(0);
  Vector<Scalar> w(s.size());
  for (Index i = 0; i < s.size(); ++i)
    w(i) = (s(i) > cutoff && s(i) > Scalar(0)) ? g.alpha() * (Scalar(1) + g.q()) * std::pow(s(i), g.q())
                                               : Scalar(0);
  return svd.matrixU() * w.asDiagonal() * svd.matrixV().transpose();
}

/// argmin sum_j (t_j^2 / 2 - sigma_j t_j) subject to t >= 0, sum t <= lambda.
/// Closed form t_j = max(sigma_j - theta, 0); theta found by a sorted
/// breakpoint scan in O(r log r). lambda = +inf returns sigma.
template <typename Scalar>
Vector<Scalar> capped_simplex_project(const Vector<Scalar>& sigma, Scalar lambda) {
  detail::require(lambda > Scalar(0), "lambda must be positive");
  detail::require<NumericalError>(sigma.allFinite(), "sigma must be finite");
  detail::require((sigma.array() >= Scalar(0)).all(), "sigma must be nonnegative");
  const Index r = sigma.size();
  if (std::isinf(lambda) || sigma.sum() <= lambda) return sigma;

  std::vector<Scalar> sorted(sigma.data(), sigma.data() + r);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  Scalar theta = 0;
  Scalar cumsum = 0;
  for (Index k = 0; k < r; ++k) {
    cumsum += sorted[static_cast<std::size_t>(k)];
    const Scalar candidate = (cumsum - lambda) / Scalar(k + 1);
    if (sorted[static_cast<std::size_t>(k)] > candidate) theta = candidate;
    else break;
  }
  theta = std::max(theta, Scalar(0));
  return (sigma.array() - theta).max(Scalar(0)).matrix();
}

/// Prox of `x` centred at `z`: with Y = x - grad_omega(z) = U diag(delta) V^T,
/// returns U diag(-t) V^T where t = capped_simplex_project(delta, radius).
template <typename Scalar>
Matrix<Scalar> prox_nuc(const NuclearBallGeometry<Scalar>& g, const Matrix<Scalar>& z,
                        const Matrix<Scalar>& x) {
  detail::check_geometry_shape(g, z);
  detail::check_geometry_shape(g, x);
  Matrix<Scalar> y = x;
  if (g.dgf() == DgfKind::euclidean) y -= z;
  else y -= omega_subgradient(g, z);

  if (g.unbounded()) return -y;

  const auto svd = detail::thin_svd(y);
  const Vector<Scalar> t = capped_simplex_project<Scalar>(svd.singularValues(), g.radius());
  Index keep = 0;
  while (keep < t.size() && t(keep) > Scalar(0)) ++keep;
  if (keep == 0) return Matrix<Scalar>::Zero(y.rows(), y.cols());
  return -(svd.matrixU().leftCols(keep) * t.head(keep).asDiagonal() *
           svd.matrixV().leftCols(keep).transpose());
}

} // namespace lrvi
