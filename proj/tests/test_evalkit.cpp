#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lrvi/evalkit.hpp"
#include "lrvi/nuclear.hpp"
#include "support.hpp"

using namespace lrvi;
using namespace lrvi::eval;

namespace {

double choose2(double n) { return n * (n - 1) / 2; }

// ARI from pair counts over all unordered pairs.
double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      pairs += 1;
    }
  const double expected = in_a * in_b / pairs;
  const double max = 0.5 * (in_a + in_b);
  return (both - expected) / (max - expected);
}

// Euclidean projection onto {t >= 0, sum t <= radius} by bisection on the shift.
Eigen::VectorXd project_budget(const Eigen::VectorXd& s, double radius) {
  if (s.sum() <= radius) return s;
  double lo = 0, hi = s.maxCoeff();
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    ((s.array() - mid).max(0.0).sum() > radius ? lo : hi) = mid;
  }
  return (s.array() - hi).max(0.0);
}

struct SpectralToy {
  Eigen::MatrixXd u, v;
  Eigen::VectorXd sigma;

  explicit SpectralToy(std::uint64_t seed) : sigma(Eigen::Vector3d(4, 2, 1)) {
    std::mt19937_64 rng(seed);
    u = test::gaussian(3, 3, rng).householderQr().householderQ();
    v = test::gaussian(3, 3, rng).householderQr().householderQ();
  }

  ParameterMatrix<double> operator()(double lambda) const {
    const Eigen::VectorXd t = std::isinf(lambda) ? sigma : project_budget(sigma, lambda);
    return ParameterMatrix<double>(u * t.asDiagonal() * v.transpose(), 1, 2);
  }
};

Eigen::MatrixXd blobs(const std::vector<Eigen::Vector2d>& centres, int per, double spread,
                      std::mt19937_64& rng, std::vector<int>& labels) {
  Eigen::MatrixXd out(2, static_cast<Index>(centres.size()) * per);
  std::normal_distribution<double> n(0.0, spread);
  Index col = 0;
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (int k = 0; k < per; ++k) {
      out.col(col++) = centres[c] + Eigen::Vector2d(n(rng), n(rng));
      labels.push_back(static_cast<int>(c));
    }
  return out;
}

} // namespace

TEST_CASE("ARI small cases") {
  const std::vector<int> a{0, 0, 1, 1};
  const std::vector<int> b{0, 1, 0, 1};
  CHECK(ari(a, a) == doctest::Approx(1.0));
  CHECK(ari(a, b) == doctest::Approx(-0.5));
  CHECK(ari_by_pairs(a, b) == doctest::Approx(-0.5));
  CHECK(ari(a, std::vector<int>{7, 7, 3, 3}) == doctest::Approx(1.0));
  const std::vector<int> one(6, 0);
  CHECK(ari(one, one) == doctest::Approx(1.0));
}

TEST_CASE("ARI agrees with the pair-count formula and is symmetric") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(30), b(30);
    for (auto& x : a) x = lab(rng);
    for (auto& x : b) x = lab(rng);
    CHECK(ari(a, b) == doctest::Approx(ari_by_pairs(a, b)).epsilon(1e-12));
    CHECK(ari(a, b) == doctest::Approx(ari(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("NMI small cases") {
  const std::vector<int> a{0, 0, 1, 1};
  const std::vector<int> b{0, 1, 0, 1};
  CHECK(nmi(a, a) == doctest::Approx(1.0));
  CHECK(nmi(a, b) == doctest::Approx(0.0));
  // Entropies by hand: H(a) = ln 2, H(c) = 1.5 ln 2, I = ln 2, so NMI = 0.8.
  CHECK(nmi(a, std::vector<int>{0, 1, 2, 2}) == doctest::Approx(0.8));
  CHECK(nmi(std::vector<int>{0, 1, 2, 2}, a) == doctest::Approx(0.8));
}

TEST_CASE("scores are invariant to label permutation") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> pred{1, 1, 0, 2, 2, 2, 0};
  std::vector<int> relabelled(pred.size());
  std::transform(pred.begin(), pred.end(), relabelled.begin(), [](int x) { return (x + 1) % 3 + 10; });
  CHECK(ari(truth, pred) == doctest::Approx(ari(truth, relabelled)));
  CHECK(nmi(truth, pred) == doctest::Approx(nmi(truth, relabelled)));
  const auto p = LabeledPartition::compact(relabelled);
  CHECK(p.k == 3);
  CHECK(p.assignments == std::vector<int>{0, 0, 1, 2, 2, 2, 1});
}

TEST_CASE("accuracy and macro-F1") {
  const std::vector<int> truth{0, 0, 1, 1};
  const auto perfect = accuracy_and_macro_f1(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_f1 == doctest::Approx(1.0));
  const auto flat = accuracy_and_macro_f1(truth, std::vector<int>{0, 0, 0, 0});
  CHECK(flat.accuracy == 0.5);
  CHECK(flat.macro_f1 == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(accuracy_and_macro_f1(truth, std::vector<int>{0}), ShapeError);
}

TEST_CASE("k-means recovers separated blobs") {
  std::mt19937_64 rng(1);
  std::vector<int> labels;
  const Eigen::MatrixXd x = blobs({{0, 0}, {10, 0}, {0, 10}}, 30, 0.5, rng, labels);
  const auto r = kmeans(x, 3, 4);
  CHECK(ari(labels, r.partition.assignments) == doctest::Approx(1.0));
  CHECK(r.centroids.cols() == 3);
  for (std::size_t k = 1; k < r.wcss_trace.size(); ++k) CHECK(r.wcss_trace[k] <= r.wcss_trace[k - 1] + 1e-9);
  CHECK(r.wcss == doctest::Approx(r.wcss_trace.back()));

  double wcss = 0;
  for (Index i = 0; i < x.cols(); ++i)
    wcss += (x.col(i) - r.centroids.col(r.partition.assignments[static_cast<std::size_t>(i)])).squaredNorm();
  CHECK(r.wcss == doctest::Approx(wcss));
  CHECK(kmeans(x, 3, 4).partition.assignments == r.partition.assignments);
}

TEST_CASE("k-means edge cases") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = test::gaussian(3, 8, rng);
  CHECK(kmeans(x, 8, 1).wcss == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd dup = Eigen::MatrixXd::Zero(2, 10);
  dup.rightCols(3).setConstant(5.0);
  const auto r = kmeans(dup, 2, 7);
  CHECK(r.wcss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ari(std::vector<int>{0, 0, 0, 0, 0, 0, 0, 1, 1, 1}, r.partition.assignments) == doctest::Approx(1.0));
  CHECK_THROWS(kmeans(x, 9, 1));
}

TEST_CASE("KNN classification") {
  std::mt19937_64 rng(5);
  std::vector<int> labels;
  const Eigen::MatrixXd train = blobs({{0, 0}, {8, 8}}, 20, 0.5, rng, labels);
  CHECK(knn_classify(train, labels, train, 1) == labels);

  std::vector<int> test_labels;
  const Eigen::MatrixXd test = blobs({{0, 0}, {8, 8}}, 10, 0.5, rng, test_labels);
  for (int k : {1, 3, 7}) CHECK(accuracy_and_macro_f1(test_labels, knn_classify(train, labels, test, k)).accuracy == 1.0);

  Eigen::MatrixXd tiny(1, 3);
  tiny << 0, 1, 10;
  Eigen::MatrixXd q(1, 1);
  q << 0.2;
  CHECK(knn_classify(tiny, std::vector<int>{4, 5, 5}, q, 2) == std::vector<int>{4});
  CHECK(knn_classify(tiny, std::vector<int>{4, 5, 5}, q, 3) == std::vector<int>{5});
}

TEST_CASE("KNN cross-validation over the default grid") {
  std::mt19937_64 rng(6);
  std::vector<int> labels;
  const Eigen::MatrixXd train = blobs({{0, 0}, {8, 8}}, 25, 0.5, rng, labels);
  const auto sel = select_knn_k(train, labels, 3);
  CHECK(sel.grid == std::vector<int>{1, 2, 4, 8, 16});
  REQUIRE(sel.cv_accuracy.size() == 5);
  CHECK(sel.cv_accuracy[0] == 1.0);
  CHECK(sel.best_k == 1);
  const auto again = select_knn_k(train, labels, 3);
  CHECK(again.cv_accuracy == sel.cv_accuracy);
}

TEST_CASE("reconstruction error") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd b = test::gaussian(6, 4, rng);
  CHECK(reconstruction_error(b, b) == 0.0);
  CHECK(reconstruction_error(b, Eigen::MatrixXd::Zero(6, 4)) == doctest::Approx(1.0));
  CHECK(reconstruction_error(b, 2.0 * b) == doctest::Approx(1.0));
  const Eigen::MatrixXd e = b + test::gaussian(6, 4, rng);
  const Eigen::MatrixXd q = test::gaussian(6, 6, rng).householderQr().householderQ();
  CHECK(reconstruction_error(q * b, q * e) == doctest::Approx(reconstruction_error(b, e)).epsilon(1e-12));
  CHECK_THROWS_AS(reconstruction_error(b, Eigen::MatrixXd::Zero(6, 3)), ShapeError);
  CHECK_THROWS_AS(reconstruction_error(Eigen::MatrixXd::Zero(6, 4), b), NumericalError);
}

TEST_CASE("Brent finds the kink of |x - 3|") {
  const auto r = brent_minimize([](double x) { return std::abs(x - 3.0); }, 0.0, 10.0, 1e-3);
  CHECK(std::abs(r.x - 3.0) <= 1e-3);
  CHECK(r.fx == doctest::Approx(std::abs(r.x - 3.0)));
  CHECK(r.golden_steps > 0);

  const auto smooth = brent_minimize([](double x) { return (x - 1.25) * (x - 1.25) + 2; }, -4.0, 4.0, 1e-6);
  CHECK(std::abs(smooth.x - 1.25) <= 1e-5);
  CHECK(smooth.evaluations < 20);
  CHECK_THROWS_AS(brent_minimize([](double x) { return x; }, 1.0, 1.0), ConfigError);
}

TEST_CASE("lambda grids") {
  const auto lin = lambda_grid(0.0, 1.0, 5, Spacing::linear);
  CHECK(lin == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const auto lg = lambda_grid(0.01, 100.0, 5, Spacing::log);
  REQUIRE(lg.size() == 5);
  for (std::size_t k = 0; k < lg.size(); ++k) CHECK(lg[k] == doctest::Approx(std::pow(10.0, -2.0 + static_cast<double>(k))));
  CHECK(lambda_grid(2.0, 3.0, 1, Spacing::linear) == std::vector<double>{3.0});
  CHECK_THROWS_AS(lambda_grid(0.0, 1.0, 3, Spacing::log), ConfigError);
}

TEST_CASE("bisection finds the largest rank-one lambda") {
  const SpectralToy toy(11);
  // Rank one at relative threshold 1e-2 while the shifted second value stays
  // below 1% of the shifted first: theta >= 1.96 / 0.99, lambda = 6 - 2 theta.
  const double critical = 6.0 - 2.0 * (1.96 / 0.99);
  const auto r = lambda_search({.solve = toy}, {.strategy = SearchStrategy::bisect_rank1});
  CHECK(r.upper == doctest::Approx(7.0));
  CHECK(r.best_lambda <= critical);
  CHECK(r.best_lambda >= critical * 0.98);
  REQUIRE(r.best_params.has_value());
  CHECK(approx_rank<double>(singular_values<double>(r.best_params->data())) == 1);
}

TEST_CASE("brent and grid strategies minimise a toy objective") {
  const SpectralToy toy(12);
  const auto objective = [](const ParameterMatrix<double>& p) {
    const double n = nuclear_norm<double>(p.data());
    return (n - 2.5) * (n - 2.5);
  };
  const auto brent = lambda_search({.solve = toy, .objective = objective}, {.strategy = SearchStrategy::brent});
  CHECK(std::abs(brent.best_lambda - 2.5) <= 2e-3);
  CHECK(brent.lambdas_tried.size() == brent.scores.size());

  const auto grid = lambda_search({.solve = toy, .objective = objective},
                                  {.strategy = SearchStrategy::grid, .grid_points = 20, .lower = 0.5});
  CHECK(grid.upper == doctest::Approx(7.0));
  const auto points = lambda_grid(0.5, grid.upper, 20, Spacing::log);
  CHECK(grid.lambdas_tried == points);
  double best = 0, best_score = std::numeric_limits<double>::infinity();
  for (double l : points) {
    const auto p = toy(l);
    if (approx_rank<double>(singular_values<double>(p.data())) < 3 && objective(p) < best_score) {
      best_score = objective(p);
      best = l;
    }
  }
  CHECK(grid.best_lambda == best);
  CHECK(grid.best_score == doctest::Approx(best_score));
}
