#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "scfrp/shm.hpp"

using namespace scfrp;

TEST_CASE("z-score normalization") {
  Eigen::MatrixXd rows(4, 3);
  rows << 1, 5, 2,
          2, 5, 4,
          3, 5, 6,
          4, 5, 8;
  const auto st = zscore_fit(rows, "unit test");

  SECTION("training features normalize to zero mean, unit deviation") {
    const Eigen::MatrixXd n = zscore_apply(st, rows);
    for (int c : {0, 2}) {
      CHECK(std::abs(n.col(c).mean()) < 1e-10);
      const double sd = std::sqrt((n.col(c).array() - n.col(c).mean()).square().mean());
      CHECK(sd == Catch::Approx(1.0).margin(1e-10));
    }
  }

  SECTION("constant column floors to zero") {
    const Eigen::MatrixXd n = zscore_apply(st, rows);
    CHECK(n.col(1).cwiseAbs().maxCoeff() < 1e-9);
  }

  SECTION("round trip") {
    const Eigen::MatrixXd n = zscore_apply(st, rows);
    CHECK((zscore_invert(st, n) - rows).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("foreign rows keep the training statistics") {
    Eigen::MatrixXd test(2, 3);
    test << 10, 5, 20, 12, 5, 24;
    const auto self = zscore_fit(test, "leak");
    const Eigen::MatrixXd with_train = zscore_apply(st, test);
    const Eigen::MatrixXd with_self = zscore_apply(self, test);
    CHECK((with_train - with_self).cwiseAbs().maxCoeff() > 0.1);
  }

  SECTION("empty input rejected") {
    CHECK_THROWS_AS(zscore_fit(Eigen::MatrixXd(0, 3), "x"), std::domain_error);
  }
}

TEST_CASE("network initialization") {
  const Network n31 = network_init(31, 7);
  CHECK(n31.param_count() == 818);
  const Network n32 = network_init(32, 7);
  CHECK(n32.param_count() == 834);

  const Network again = network_init(31, 7);
  CHECK((n31.w1 - again.w1).norm() == 0.0);
  CHECK((n31.w3 - again.w3).norm() == 0.0);
  const Network other = network_init(31, 8);
  CHECK((n31.w1 - other.w1).norm() > 0.0);

  // fan-in bound
  CHECK(n31.w1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(31.0));
}

TEST_CASE("forward pass") {
  Network net = network_init(5, 3);

  SECTION("zero weights produce the output mean") {
    net.w1.setZero(); net.w2.setZero(); net.w3.setZero();
    net.out_stats.mean << 0.7, 1.3;
    const Eigen::Vector2d y = forward(net, Eigen::VectorXd::Ones(5));
    CHECK(y(0) == Catch::Approx(0.7));
    CHECK(y(1) == Catch::Approx(1.3));
  }

  SECTION("deterministic and dimension checked") {
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
    CHECK((forward(net, x) - forward(net, x)).norm() == 0.0);
    CHECK_THROWS_AS(forward(net, Eigen::VectorXd::Ones(4)), std::domain_error);
  }
}

TEST_CASE("analytic Jacobian matches finite differences") {
  Network net = network_init(6, 11);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // random weights, not just the init distribution
  for (int r = 0; r < net.w2.rows(); ++r)
    for (int c = 0; c < net.w2.cols(); ++c) net.w2(r, c) += 0.3 * u(rng);
  for (int r = 0; r < net.b1.size(); ++r) net.b1(r) = 0.2 * u(rng);

  Eigen::VectorXd xn(6);
  for (int i = 0; i < 6; ++i) xn(i) = u(rng);

  const int np = net.param_count();
  Eigen::MatrixXd jac(2, np);
  detail::sample_jacobian(net, xn, jac, 0);

  Eigen::VectorXd params;
  detail::pack_params(net, params);
  const double h = 1e-7;
  double max_rel = 0.0;
  for (int p = 0; p < np; ++p) {
    Eigen::VectorXd pp = params, pm = params;
    pp(p) += h;
    pm(p) -= h;
    Network np_net = net, nm_net = net;
    detail::unpack_params(np_net, pp);
    detail::unpack_params(nm_net, pm);
    const Eigen::Vector2d fp = detail::forward_normalized(np_net, xn);
    const Eigen::Vector2d fm = detail::forward_normalized(nm_net, xn);
    for (int k = 0; k < 2; ++k) {
      const double fd = (fp(k) - fm(k)) / (2.0 * h);
      const double scale = std::max(std::abs(fd), 1e-6);
      max_rel = std::max(max_rel, std::abs(jac(k, p) - fd) / scale);
    }
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("LM training") {
  SECTION("recovers a linear map through the tanh network") {
    // y = 2x - 1 and y = -x + 0.5 on [-0.5, 0.5]; the network can fit this
    // to high accuracy, and LM should get there quickly
    const int n = 120;
    Eigen::MatrixXd x(n, 1), y(n, 2);
    for (int i = 0; i < n; ++i) {
      const double xi = -0.5 + static_cast<double>(i) / (n - 1);
      x(i, 0) = xi;
      y(i, 0) = 2.0 * xi - 1.0;
      y(i, 1) = -xi + 0.5;
    }
    Network net = network_init(1, 5);
    TrainConfig cfg;
    cfg.max_epochs = 300;
    cfg.patience = 60;
    cfg.seed = 5;
    const TrainHistory hist = lm_train(net, x, y, cfg);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d p = forward(net, x.row(i).transpose());
      worst = std::max(worst, (p - y.row(i).transpose()).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 5e-4);
    CHECK(hist.best_epoch >= 0);

    // accepted-step training MSE is non-increasing
    for (std::size_t e = 1; e < hist.train_mse.size(); ++e)
      CHECK(hist.train_mse[e] <= hist.train_mse[e - 1] + 1e-15);
  }

  SECTION("seeded training is reproducible") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd x(40, 3), y(40, 2);
    for (int i = 0; i < 40; ++i) {
      for (int c = 0; c < 3; ++c) x(i, c) = u(rng);
      y(i, 0) = std::sin(x(i, 0)) + 0.3 * x(i, 1);
      y(i, 1) = x(i, 2) * x(i, 2);
    }
    TrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.patience = 39;
    Network a = network_init(3, 17);
    Network b = network_init(3, 17);
    lm_train(a, x, y, cfg);
    lm_train(b, x, y, cfg);
    CHECK((a.w1 - b.w1).norm() == 0.0);
    CHECK((a.w3 - b.w3).norm() == 0.0);
    Eigen::VectorXd probe(3);
    probe << 0.1, -0.2, 0.4;
    CHECK((forward(a, probe) - forward(b, probe)).norm() == 0.0);
  }

  SECTION("the update interpolates Gauss-Newton and gradient descent") {
    Network net = network_init(2, 21);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 10;
    Eigen::MatrixXd jac(2 * n, net.param_count());
    Eigen::VectorXd resid(2 * n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd xn(2);
      xn << u(rng), u(rng);
      detail::sample_jacobian(net, xn, jac, 2 * i);
      const Eigen::Vector2d p = detail::forward_normalized(net, xn);
      resid(2 * i) = p(0) - u(rng);
      resid(2 * i + 1) = p(1) - u(rng);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * resid;
    auto lm_delta = [&](double lambda) {
      Eigen::MatrixXd aug = jtj;
      aug.diagonal().array() += lambda;
      return Eigen::VectorXd(aug.ldlt().solve(jtr));
    };
    // lambda -> 0: Gauss-Newton; use a mild ridge as reference since the
    // network Jacobian is rank deficient at random weights
    const Eigen::VectorXd gn = lm_delta(1e-10);
    const Eigen::VectorXd near0 = lm_delta(1e-9);
    CHECK(gn.dot(near0) / (gn.norm() * near0.norm()) > 1.0 - 1e-6);
    // lambda -> inf: scaled gradient direction
    const double big = 1e12;
    const Eigen::VectorXd gd = lm_delta(big);
    CHECK(gd.dot(jtr) / (gd.norm() * jtr.norm()) > 1.0 - 1e-9);
    CHECK((big * gd - jtr).norm() < 1e-3 * jtr.norm());
  }

  SECTION("input validation") {
    Network net = network_init(3, 1);
    TrainConfig cfg;
    CHECK_THROWS_AS(lm_train(net, Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 2), cfg),
                    std::domain_error);
    cfg.val_fraction = 0.7;
    CHECK_THROWS_AS(lm_train(net, Eigen::MatrixXd(10, 3), Eigen::MatrixXd(10, 2), cfg),
                    std::domain_error);
  }
}

TEST_CASE("evaluation metrics") {
  Eigen::MatrixXd truth(4, 2);
  truth << 0.0, 1.0, 0.1, 1.2, 0.2, 1.4, 0.3, 1.6;

  SECTION("perfect prediction") {
    const Metrics m = metrics(truth, truth);
    CHECK(m.r2[0] == 1.0);
    CHECK(m.r2[1] == 1.0);
    CHECK(m.rmse[0] == 0.0);
  }

  SECTION("mean prediction gives zero R2") {
    Eigen::MatrixXd pred(4, 2);
    for (int c = 0; c < 2; ++c) pred.col(c).setConstant(truth.col(c).mean());
    const Metrics m = metrics(pred, truth);
    CHECK(m.r2[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.r2[1] == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("hand-computed case") {
    Eigen::MatrixXd pred = truth;
    pred(0, 0) += 0.1;  // single error of 0.1 on output 0
    const Metrics m = metrics(pred, truth);
    // ss_res = 0.01, ss_tot = 0.05, rmse = sqrt(0.01/4)
    CHECK(m.r2[0] == Catch::Approx(1.0 - 0.01 / 0.05).margin(1e-12));
    CHECK(m.rmse[0] == Catch::Approx(std::sqrt(0.0025)).margin(1e-12));
  }

  SECTION("zero-variance truth reports a sentinel") {
    Eigen::MatrixXd flat(3, 2);
    flat << 1, 1, 1, 1, 1, 1;
    const Metrics m = metrics(flat, flat);
    CHECK(std::isinf(m.r2[0]));
    CHECK(m.rmse[0] == 0.0);
  }
}

TEST_CASE("feature matrices honor the input mode") {
  std::vector<ShmRecord> rows(2);
  rows[0].a11 = 0.5; rows[0].a12 = 0.2; rows[0].vf = 0.3; rows[0].theta = 298.0;
  rows[0].g_ratios.fill(1.0);
  rows[1] = rows[0];
  rows[1].theta = 253.0;
  const Eigen::MatrixXd x32 = feature_matrix(rows, 32);
  CHECK(x32.cols() == 32);
  CHECK(x32(0, 3) == 298.0);
  const Eigen::MatrixXd x31 = feature_matrix(rows, 31);
  CHECK(x31.cols() == 31);
  CHECK(x31(0, 3) == 1.0);  // first conductance ratio when temperature is dropped
  CHECK_THROWS_AS(feature_matrix(rows, 30), std::domain_error);
}
