#include <doctest.h>

#include <cmath>

#include "ctes/baselines.hpp"
#include "ctes/errors.hpp"
#include "ctes/random.hpp"

using namespace ctes;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Ordinary least squares with an intercept via the normal equations.
MatrixXd ols_predict(const MatrixXd& x, const MatrixXd& y, const MatrixXd& probe) {
  MatrixXd a(x.rows(), x.cols() + 1);
  a << MatrixXd::Ones(x.rows(), 1), x;
  const MatrixXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  MatrixXd p(probe.rows(), probe.cols() + 1);
  p << MatrixXd::Ones(probe.rows(), 1), probe;
  return p * beta;
}

MatrixXd nearest_neighbor(const MatrixXd& x, const MatrixXd& y, const MatrixXd& probe) {
  MatrixXd out(probe.rows(), y.cols());
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < x.rows(); ++j)
      if ((x.row(j) - probe.row(i)).squaredNorm() < (x.row(best) - probe.row(i)).squaredNorm()) best = j;
    out.row(i) = y.row(best);
  }
  return out;
}

}  // namespace

TEST_CASE("pls recovers an exact scalar line") {
  MatrixXd x(5, 1), y(5, 1);
  x << 1, 2, 3, 4, 5;
  y = 2 * x;
  const auto m = pls_fit(x, y, 1);
  CHECK((pls_predict(m, x) - y).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("pls with full components equals least squares on noiseless linear data") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd x = gaussian(40, 4, rng);
    const MatrixXd b = gaussian(4, 3, rng);
    const MatrixXd y = x * b + RowVectorXd::LinSpaced(3, -1, 1).replicate(40, 1);
    const auto m = pls_fit(x, y, 4);
    const MatrixXd probe = gaussian(10, 4, rng);
    CHECK((pls_predict(m, probe) - ols_predict(x, y, probe)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("pls centering and affinity") {
  Rng rng(2);
  const MatrixXd x = gaussian(30, 3, rng);
  const MatrixXd y = gaussian(30, 2, rng);
  const auto m = pls_fit(x, y, 2);
  CHECK(m.components == 2);
  CHECK((pls_predict(m, x.colwise().mean()) - y.colwise().mean()).cwiseAbs().maxCoeff() <= 1e-12);
  const MatrixXd p1 = gaussian(1, 3, rng), p2 = gaussian(1, 3, rng);
  for (double a : {-1.5, 0.0, 0.3, 2.0}) {
    const MatrixXd mixed = pls_predict(m, a * p1 + (1 - a) * p2);
    const MatrixXd expected = a * pls_predict(m, p1) + (1 - a) * pls_predict(m, p2);
    CHECK((mixed - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(pls_predict(m, x) == pls_predict(pls_fit(x, y, 2), x));
}

TEST_CASE("pls errors") {
  Rng rng(3);
  const MatrixXd x = gaussian(10, 2, rng), y = gaussian(10, 1, rng);
  CHECK_THROWS_AS(pls_fit(MatrixXd::Constant(10, 2, 4.0), y, 1), InputError);
  CHECK_THROWS_AS(pls_fit(x, y, 0), ConfigError);
  CHECK_THROWS_AS(pls_fit(x, y, 3), ConfigError);
  CHECK_THROWS_AS(pls_fit(x, gaussian(9, 1, rng), 1), InputError);
  const auto m = pls_fit(x, y, 2);
  CHECK_THROWS_AS(pls_predict(m, MatrixXd::Zero(1, 3)), InputError);
}

TEST_CASE("grnn examples") {
  MatrixXd x(1, 2), y(1, 3);
  x << 1, 2;
  y << 5, 6, 7;
  const auto single = grnn_fit(x, y, 0.7);
  Rng rng(4);
  const MatrixXd probes = gaussian(5, 2, rng);
  CHECK(grnn_predict(single, probes) == y.replicate(5, 1));

  MatrixXd x2(2, 1), y2(2, 2);
  x2 << -1, 1;
  y2 << 0, 10, 4, 20;
  for (double bw : {0.01, 0.5, 3.0}) {
    const auto m = grnn_fit(x2, y2, bw);
    const MatrixXd p = grnn_predict(m, MatrixXd::Zero(1, 1));
    CHECK(p(0, 0) == doctest::Approx(2.0));
    CHECK(p(0, 1) == doctest::Approx(15.0));
  }
}

TEST_CASE("grnn with a tiny bandwidth is nearest neighbor") {
  Rng rng(5);
  const MatrixXd x = gaussian(50, 3, rng), y = gaussian(50, 2, rng);
  const auto m = grnn_fit(x, y, 1e-6);
  const MatrixXd probe = gaussian(200, 3, rng);
  CHECK(grnn_predict(m, probe) == nearest_neighbor(x, y, probe));
}

TEST_CASE("grnn outputs stay inside the target range") {
  Rng rng(6);
  const MatrixXd x = gaussian(40, 2, rng), y = gaussian(40, 3, rng);
  const auto m = grnn_fit(x, y);
  CHECK(m.bandwidth == doctest::Approx(median_pairwise_distance(x)));
  const MatrixXd p = grnn_predict(m, 3 * gaussian(300, 2, rng));
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(p.col(j).minCoeff() >= y.col(j).minCoeff());
    CHECK(p.col(j).maxCoeff() <= y.col(j).maxCoeff());
  }
  CHECK_THROWS_AS(grnn_fit(x, y, 0.0), ConfigError);
  CHECK_THROWS_AS(grnn_predict(m, MatrixXd::Zero(1, 4)), InputError);
}

TEST_CASE("median pairwise distance") {
  MatrixXd x(3, 1);
  x << 0, 1, 3;  // distances 1, 2, 3
  CHECK(median_pairwise_distance(x) == doctest::Approx(2.0));
}

TEST_CASE("adversarial variants") {
  CHECK(variant_config("gan-cls").beta == 0.5);
  const auto cgan = variant_config("cgan");
  CHECK(cgan.beta == 1.0);
  CHECK_FALSE(cgan.ensemble);
  const auto ctes = variant_config("ctes");
  CHECK(ctes.beta == 0.9);
  CHECK_FALSE(ctes.ensemble);
  const auto se = variant_config("se-ctes");
  CHECK(se.beta == 0.9);
  CHECK(se.ensemble);
  CHECK(se.k == 5);
  CHECK(se.h == 2);
  CHECK_THROWS_AS(variant_config("pls"), ConfigError);
  CHECK_THROWS_AS(variant_config("wgan"), ConfigError);
  for (const char* n : {"pls", "grnn", "cgan", "gan-cls", "ctes", "se-ctes"})
    CHECK(to_string(parse_method(n)) == n);
  CHECK_THROWS_AS(parse_method("svm"), ConfigError);
  CHECK(is_gan(MethodKind::cgan));
  CHECK_FALSE(is_gan(MethodKind::grnn));
}
