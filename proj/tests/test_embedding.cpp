#include <doctest.h>

#include <sstream>

#include "lrvi/embedding.hpp"
#include "support.hpp"

using namespace lrvi;

TEST_CASE("rank-one factorization") {
  const Eigen::Vector3d u = Eigen::Vector3d(1, 2, 2) / 3.0;
  const Eigen::Vector4d v = Eigen::Vector4d(1, -1, 1, -1) / 2.0;
  const auto e = factorize<double>(Eigen::MatrixXd(5.0 * u * v.transpose()));
  REQUIRE(e.rank() == 1);
  CHECK(e.approx_rank == 1);
  CHECK(e.singular_values(0) == doctest::Approx(5.0));
  const double sign = e.basis(0, 0) > 0 ? 1.0 : -1.0;
  CHECK((sign * e.coordinates.row(0).transpose() - 5.0 * v).norm() < 1e-12);
}

TEST_CASE("zero matrix gives an empty embedding") {
  const auto e = factorize<double>(Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 3)), {"a", "b", "c"});
  CHECK(e.empty());
  CHECK(e.approx_rank == 0);
  CHECK(e.coordinates.cols() == 3);
  std::ostringstream os;
  write_embedding_csv(os, e);
  CHECK(os.str() == "id\na\nb\nc\n");
}

TEST_CASE("full-rank factorization reconstructs") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd b = test::gaussian(10, 5, rng);
  const auto e = factorize<double>(b);
  CHECK(e.rank() == 5);
  CHECK((e.basis.transpose() * e.basis - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((e.reconstruct() - b).cwiseAbs().maxCoeff() < 1e-9);
  for (Index i = 1; i < e.rank(); ++i) CHECK(e.singular_values(i) <= e.singular_values(i - 1));
}

TEST_CASE("factorize truncates tiny singular values") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd low = test::gaussian(8, 2, rng) * test::gaussian(2, 6, rng);
  const auto e = factorize<double>(low);
  CHECK(e.rank() == 2);
  CHECK((e.reconstruct() - low).cwiseAbs().maxCoeff() < 1e-9);
  Eigen::MatrixXd bad = low;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(factorize<double>(bad), NumericalError);
  CHECK_THROWS_AS(factorize<double>(low, {"only-one"}), ShapeError);
}

TEST_CASE("approx_rank readings") {
  CHECK(approx_rank<double>(Eigen::Vector3d(10, 5, 0.05)) == 2);
  CHECK(approx_rank<double>(Eigen::Vector3d(1, 1, 1)) == 3);
  CHECK(approx_rank<double>(Eigen::VectorXd()) == 0);
  CHECK(approx_rank<double>(Eigen::Vector3d(1.0, 0.995, 0.5), 1e-2, RankThreshold::additive) == 2);
  const Eigen::VectorXd s = (Eigen::VectorXd(5) << 4, 2, 0.05, 0.03, 0.01).finished();
  for (double c : {1e-6, 0.3, 7.0, 1e8}) CHECK(approx_rank<double>(Eigen::VectorXd(c * s)) == 3);
}

TEST_CASE("pca of a full projection explains everything") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd pts = test::gaussian(4, 30, rng);
  const auto p = pca_project<double>(pts, 4);
  CHECK(p.explained_variance_ratio.sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(!p.degenerate);
  for (Index i = 1; i < 4; ++i) CHECK(p.explained_variance_ratio(i) <= p.explained_variance_ratio(i - 1));
  CHECK_THROWS_AS(pca_project<double>(pts, 5), ConfigError);
}

TEST_CASE("pca on a dominant direction") {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd pts = test::gaussian(3, 200, rng, 0.01);
  std::normal_distribution<double> n;
  for (Index j = 0; j < pts.cols(); ++j) pts(1, j) += 5.0 * n(rng);
  const auto p = pca_project<double>(pts, 1);
  CHECK(p.explained_variance_ratio(0) > 0.999);
  CHECK(std::abs(p.axes(1, 0)) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("pca of identical columns is degenerate") {
  const Eigen::MatrixXd pts = Eigen::Vector3d(1, 2, 3).replicate(1, 5);
  const auto p = pca_project<double>(pts, 2);
  CHECK(p.degenerate);
  CHECK(p.explained_variance_ratio.isZero(0));
  CHECK(p.projection.isZero(1e-12));
}

TEST_CASE("pca is rotation invariant up to sign") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd pts = test::gaussian(3, 50, rng);
  pts.row(0) *= 4.0;
  pts.row(1) *= 2.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(test::gaussian(3, 3, rng));
  const Eigen::MatrixXd q = qr.householderQ();
  const auto a = pca_project<double>(pts, 2);
  const auto b = pca_project<double>(Eigen::MatrixXd(q * pts), 2);
  for (Index k = 0; k < 2; ++k) {
    const double sign = a.projection.row(k).dot(b.projection.row(k)) > 0 ? 1.0 : -1.0;
    CHECK((a.projection.row(k) - sign * b.projection.row(k)).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK((a.explained_variance_ratio - b.explained_variance_ratio).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("embedding CSV layout") {
  Eigen::MatrixXd b(2, 2);
  b << 2, 0, 0, 1;
  const auto e = factorize<double>(b, {"x", "y"});
  std::ostringstream os;
  write_embedding_csv(os, e, std::vector<int>{3, 4});
  std::istringstream is(os.str());
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "id,label,dim_1,dim_2");
  CHECK(first.rfind("x,3,", 0) == 0);
}
