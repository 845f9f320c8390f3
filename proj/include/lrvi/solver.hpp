#pragma once

// First-order solvers for monotone VIs over the nuclear ball.
//
// mirror_descent:            B_{k+1} = prox(B_k, gamma_k F(B_k)),
//                            gamma_k = 1 / (kappa0 sqrt(k)), gamma-weighted average.
// mirror_prox_backtracking:  extragradient with a doubling Lipschitz estimate
//                            and aggregate weights alpha_t = 2 / (t + 1).
//
// A field is any callable Matrix -> Matrix. If it also provides
// `advance(iteration)` it is called once at the start of every iteration
// (stochastic fields redraw their samples there) and if it provides
// `loss(B)` the aggregate's loss is recorded in the history.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

#include "lrvi/nuclear.hpp"

namespace lrvi {

enum class SolverMode { mirror_descent, mirror_prox };

inline std::string_view to_string(SolverMode m) {
  return m == SolverMode::mirror_descent ? "mirror-descent" : "mirror-prox";
}

inline SolverMode parse_solver_mode(std::string_view name) {
  if (name == "mirror-descent" || name == "md") return SolverMode::mirror_descent;
  if (name == "mirror-prox" || name == "mirror-prox-backtracking" || name == "mp")
    return SolverMode::mirror_prox;
  throw ConfigError("unknown solver mode: " + std::string(name));
}

struct SolverConfig {
  /// Nuclear radius; +infinity disables the constraint.
  double lambda = 1.0;
  int max_iters = 256;
  double kappa0 = 1.0;
  SolverMode mode = SolverMode::mirror_prox;
  std::uint64_t seed = 0;
  /// Early stop once the field norm at the candidate drops below this.
  std::optional<double> stop_tol;
  /// Each iteration starts from kappa_{t-1} * kappa_decay. 1 keeps the
  /// estimate non-decreasing across iterations.
  double kappa_decay = 1.0;
  int max_backtracks = 60;
  bool record_loss = true;

  void validate() const {
    detail::require(max_iters >= 1, "max_iters must be at least 1");
    detail::require(kappa0 > 0 && std::isfinite(kappa0), "kappa0 must be positive");
    detail::require(lambda > 0, "lambda must be positive");
    detail::require(kappa_decay > 0 && kappa_decay <= 1, "kappa_decay must lie in (0, 1]");
  }
};

struct IterationRecord {
  int iter = 0;
  /// Loss of the aggregate after this iteration (NaN when not recorded).
  double loss = 0;
  /// Frobenius norm of the field at the candidate point.
  double field_norm = 0;
  double kappa = 0;
  double gamma = 0;
  int backtracks = 0;
};

template <typename Scalar = double>
struct SolverState {
  Matrix<Scalar> iterate;   // R_t
  Matrix<Scalar> candidate; // B_t
  Matrix<Scalar> aggregate; // tilde B_t
  Scalar kappa = 0;
  Scalar gamma = 0;
  int t = 0;
  std::vector<IterationRecord> history;
};

template <typename F, typename Scalar>
concept VectorField = requires(const F& f, const Matrix<Scalar>& b) {
  { f(b) } -> std::convertible_to<Matrix<Scalar>>;
};

namespace detail {

template <typename F>
inline void advance_field(F& f, std::uint64_t iteration) {
  if constexpr (requires { f.advance(iteration); }) f.advance(iteration);
}

template <typename Scalar, typename F>
inline double field_loss(const F& f, const Matrix<Scalar>& b, bool enabled) {
  if constexpr (requires { f.loss(b); }) {
    if (enabled) return static_cast<double>(f.loss(b));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

template <typename Scalar>
inline void require_finite(const Matrix<Scalar>& m, const char* what, int iter) {
  require<NumericalError>(m.allFinite(), std::string(what) + " is not finite at iteration " +
                                             std::to_string(iter));
}

} // namespace detail

template <typename Scalar, typename F>
  requires VectorField<F, Scalar>
SolverState<Scalar> mirror_descent(F& field, const NuclearBallGeometry<Scalar>& geom,
                                   const SolverConfig& config) {
  config.validate();
  detail::require(config.mode == SolverMode::mirror_descent, "config.mode must be mirror-descent");
  const auto ball = geom.with_radius(static_cast<Scalar>(config.lambda));
  SolverState<Scalar> st;
  st.iterate = Matrix<Scalar>::Zero(geom.rows(), geom.cols());
  st.aggregate = st.iterate;
  st.kappa = static_cast<Scalar>(config.kappa0);
  Matrix<Scalar> weighted = st.iterate;
  Scalar gamma_sum = 0;
  for (int k = 1; k <= config.max_iters; ++k) {
    detail::advance_field(field, static_cast<std::uint64_t>(k - 1));
    const Matrix<Scalar> g = field(st.iterate);
    detail::require_finite(g, "field", k);
    st.gamma = Scalar(1) / (st.kappa * std::sqrt(Scalar(k)));
    st.iterate = prox_nuc(ball, st.iterate, Matrix<Scalar>(st.gamma * g));
    detail::require_finite(st.iterate, "iterate", k);
    weighted += st.gamma * st.iterate;
    gamma_sum += st.gamma;
    st.aggregate = weighted / gamma_sum;
    st.candidate = st.iterate;
    st.t = k;
    const double gnorm = static_cast<double>(g.norm());
    st.history.push_back({k, detail::field_loss<Scalar>(field, st.aggregate, config.record_loss),
                          gnorm, static_cast<double>(st.kappa), static_cast<double>(st.gamma), 0});
    if (config.stop_tol && gnorm < *config.stop_tol) break;
  }
  return st;
}

template <typename Scalar, typename F>
  requires VectorField<F, Scalar>
SolverState<Scalar> mirror_prox_backtracking(F& field, const NuclearBallGeometry<Scalar>& geom,
                                             const SolverConfig& config) {
  config.validate();
  detail::require(config.mode == SolverMode::mirror_prox, "config.mode must be mirror-prox");
  const auto ball = geom.with_radius(static_cast<Scalar>(config.lambda));
  SolverState<Scalar> st;
  st.iterate = Matrix<Scalar>::Zero(geom.rows(), geom.cols());
  st.candidate = st.iterate;
  st.aggregate = st.iterate;
  st.kappa = static_cast<Scalar>(config.kappa0);
  for (int t = 1; t <= config.max_iters; ++t) {
    detail::advance_field(field, static_cast<std::uint64_t>(t - 1));
    const Scalar alpha = Scalar(2) / Scalar(t + 1);
    Scalar kappa = st.kappa * static_cast<Scalar>(config.kappa_decay);
    const Matrix<Scalar> g_iter = field(st.iterate);
    detail::require_finite(g_iter, "field", t);

    int backtracks = 0;
    Scalar gamma = 0;
    Matrix<Scalar> candidate;
    Matrix<Scalar> g_cand;
    for (;;) {
      gamma = Scalar(1) / (Scalar(2) * kappa);
      candidate = prox_nuc(ball, st.iterate, Matrix<Scalar>(gamma * g_iter));
      g_cand = field(candidate);
      detail::require_finite(g_cand, "field", t);
      if ((g_cand - g_iter).norm() <= kappa * (candidate - st.iterate).norm()) break;
      kappa *= Scalar(2);
      if (++backtracks > config.max_backtracks)
        throw NumericalError("backtracking exceeded " + std::to_string(config.max_backtracks) +
                             " doublings at iteration " + std::to_string(t) +
                             "; the field is not Lipschitz on the ball");
    }
    st.kappa = kappa;
    st.gamma = gamma;
    st.iterate = prox_nuc(ball, st.iterate, Matrix<Scalar>(gamma * g_cand));
    detail::require_finite(st.iterate, "iterate", t);
    st.candidate = std::move(candidate);
    st.aggregate = (Scalar(1) - alpha) * st.aggregate + alpha * st.candidate;
    st.t = t;
    const double gnorm = static_cast<double>(g_cand.norm());
    st.history.push_back({t, detail::field_loss<Scalar>(field, st.aggregate, config.record_loss),
                          gnorm, static_cast<double>(kappa), static_cast<double>(gamma),
                          backtracks});
    if (config.stop_tol && gnorm < *config.stop_tol) break;
  }
  return st;
}

/// Dispatches on config.mode.
template <typename Scalar, typename F>
  requires VectorField<F, Scalar>
SolverState<Scalar> solve(F& field, const NuclearBallGeometry<Scalar>& geom,
                          const SolverConfig& config) {
  return config.mode == SolverMode::mirror_descent ? mirror_descent(field, geom, config)
                                                   : mirror_prox_backtracking(field, geom, config);
}

/// Power-iteration estimate of the field's local Lipschitz constant around 0.
/// Exact (up to convergence) for affine fields; a starting guess otherwise.
template <typename Scalar, typename F>
  requires VectorField<F, Scalar>
Scalar estimate_lipschitz(const F& field, Index rows, Index cols, std::uint64_t seed = 0,
                          int iterations = 20) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix<Scalar> v(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) v(i, j) = static_cast<Scalar>(normal(rng));
  const Matrix<Scalar> base = field(Matrix<Scalar>::Zero(rows, cols));
  Scalar estimate = 0;
  for (int k = 0; k < iterations; ++k) {
    const Scalar vn = v.norm();
    if (vn == Scalar(0)) break;
    v /= vn;
    Matrix<Scalar> fv = field(v) - base;
    estimate = fv.norm();
    if (!(estimate > Scalar(0)) || !std::isfinite(static_cast<double>(estimate))) break;
    v = std::move(fv);
  }
  return estimate > Scalar(0) ? estimate : Scalar(1);
}

inline void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  const auto old = os.precision(17);
  os << "iter,loss,field_norm,kappa,gamma,backtracks\n";
  for (const auto& r : history)
    os << r.iter << ',' << r.loss << ',' << r.field_norm << ',' << r.kappa << ',' << r.gamma << ','
       << r.backtracks << '\n';
  os.precision(old);
}

} // namespace lrvi
