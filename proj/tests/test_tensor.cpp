#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "scfrp/tensor.hpp"

using namespace scfrp;

namespace {

// Independent high-order Taylor oracle in extended precision.
Mat3 taylor_exp_oracle(const Mat3& a) {
  Eigen::Matrix<long double, 3, 3> as = a.cast<long double>();
  int squarings = 0;
  while (as.cwiseAbs().maxCoeff() > 0.05L && squarings < 80) {
    as *= 0.5L;
    ++squarings;
  }
  Eigen::Matrix<long double, 3, 3> term = Eigen::Matrix<long double, 3, 3>::Identity();
  Eigen::Matrix<long double, 3, 3> sum = term;
  for (int k = 1; k <= 40; ++k) {
    term = (term * as) / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum.cast<double>();
}

Mat3 random_matrix(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = scale * u(rng);
  return m;
}

}  // namespace

TEST_CASE("polar decomposition identity and pure rotation") {
  const auto pid = polar_decompose(Mat3::Identity());
  CHECK((pid.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK((pid.stretch - Mat3::Identity()).norm() < 1e-12);

  const double th = 30.0 * M_PI / 180.0;
  Mat3 r = Mat3::Identity();
  r(0, 0) = std::cos(th); r(0, 1) = -std::sin(th);
  r(1, 0) = std::sin(th); r(1, 1) = std::cos(th);
  const auto pr = polar_decompose(r);
  CHECK((pr.rotation - r).norm() < 1e-12);
  CHECK((pr.stretch - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("polar decomposition reconstructs random well-conditioned inputs") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 1000; ++trial) {
    Mat3 f = Mat3::Identity() + random_matrix(rng, 0.35);
    if (f.determinant() < 0.2) continue;
    const auto pp = polar_decompose(f);
    CHECK((pp.rotation * pp.stretch - f).norm() < 1e-10 * f.norm());
    CHECK((pp.rotation.transpose() * pp.rotation - Mat3::Identity()).norm() < 1e-12);
    CHECK(pp.rotation.determinant() == Catch::Approx(1.0).margin(1e-12));
    CHECK((pp.stretch - pp.stretch.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("polar decomposition rejects singular and inverted inputs") {
  Mat3 bad = Mat3::Identity();
  bad(2, 2) = 0.0;
  CHECK_THROWS_AS(polar_decompose(bad), std::domain_error);
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(polar_decompose(bad), std::domain_error);
}

TEST_CASE("matrix exponential basic values") {
  CHECK((matrix_exp(Mat3::Zero()) - Mat3::Identity()).norm() < 1e-15);

  Mat3 d = Mat3::Zero();
  d(0, 0) = 0.7; d(1, 1) = -0.2; d(2, 2) = 1.3;
  const Mat3 e = matrix_exp(d);
  CHECK(e(0, 0) == Catch::Approx(std::exp(0.7)).epsilon(1e-14));
  CHECK(e(1, 1) == Catch::Approx(std::exp(-0.2)).epsilon(1e-14));
  CHECK(e(2, 2) == Catch::Approx(std::exp(1.3)).epsilon(1e-14));
  CHECK(std::abs(e(0, 1)) + std::abs(e(1, 0)) < 1e-16);
}

TEST_CASE("matrix exponential matches Taylor oracle and determinant identity") {
  std::mt19937 rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3 a = random_matrix(rng, 1.5);
    const Mat3 mine = matrix_exp(a);
    const Mat3 oracle = taylor_exp_oracle(a);
    CHECK((mine - oracle).norm() < 1e-11 * oracle.norm());
    CHECK(mine.determinant() == Catch::Approx(std::exp(a.trace())).epsilon(1e-9));

    const Mat3 traceless = dev(a);
    CHECK(matrix_exp(traceless).determinant() == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("symmetric eigen decomposition") {
  SECTION("isotropic 2x2") {
    const auto pairs = sym_eigen2(0.5 * Mat2::Identity());
    CHECK(pairs[0].first == Catch::Approx(0.5));
    CHECK(pairs[1].first == Catch::Approx(0.5));
  }
  SECTION("hand-diagonalized two-family tensor") {
    Mat2 a;
    a << 0.5, 0.2, 0.2, 0.5;
    const auto pairs = sym_eigen2(a);
    CHECK(pairs[0].first == Catch::Approx(0.7).margin(1e-12));
    CHECK(pairs[1].first == Catch::Approx(0.3).margin(1e-12));
    const Vec2 v0 = pairs[0].second;
    const Vec2 v1 = pairs[1].second;
    CHECK(std::abs(std::abs(v0.dot(Vec2(1, 1).normalized())) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(v1.dot(Vec2(1, -1).normalized())) - 1.0) < 1e-12);
  }
  SECTION("already diagonal") {
    Mat2 a = Mat2::Zero();
    a(0, 0) = 0.75; a(1, 1) = 0.25;
    const auto pairs = sym_eigen2(a);
    CHECK(pairs[0].first == Catch::Approx(0.75));
    CHECK(pairs[0].second.isApprox(Vec2(1, 0), 1e-12));
    CHECK(pairs[1].second.isApprox(Vec2(0, 1), 1e-12));
  }
  SECTION("3x3 reconstruction and ordering") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      Mat3 m = random_matrix(rng, 1.0);
      Mat3 s = 0.5 * (m + m.transpose());
      const auto pairs = sym_eigen(s);
      CHECK(pairs[0].value >= pairs[1].value);
      CHECK(pairs[1].value >= pairs[2].value);
      Mat3 rec = Mat3::Zero();
      for (const auto& p : pairs) rec += p.value * p.vector * p.vector.transpose();
      CHECK((rec - s).norm() < 1e-10 * std::max(1.0, s.norm()));
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
          CHECK(std::abs(pairs[i].vector.dot(pairs[j].vector)) < 1e-10);
    }
  }
  SECTION("non-symmetric input rejected") {
    Mat3 ns = Mat3::Identity();
    ns(0, 1) = 0.3;
    CHECK_THROWS_AS(sym_eigen(ns), std::domain_error);
  }
}

TEST_CASE("deviatoric operator") {
  CHECK(dev(Mat3::Identity()).norm() < 1e-15);

  Mat3 d = Mat3::Zero();
  d(0, 0) = 2.0;
  const Mat3 dd = dev(d);
  CHECK(dd(0, 0) == Catch::Approx(4.0 / 3.0));
  CHECK(dd(1, 1) == Catch::Approx(-2.0 / 3.0));
  CHECK(dd(2, 2) == Catch::Approx(-2.0 / 3.0));

  std::mt19937 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 t = random_matrix(rng, 2.0);
    CHECK(std::abs(dev(t).trace()) < 1e-12 * std::max(1.0, t.norm()));
    const Mat3 rec = dev(t) + (t.trace() / 3.0) * Mat3::Identity();
    CHECK((rec - t).norm() < 1e-13 * std::max(1.0, t.norm()));
  }
}
