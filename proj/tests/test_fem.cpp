#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "scfrp/simulate.hpp"

using namespace scfrp;

namespace {

constexpr double kDeg = M_PI / 180.0;

Mesh unit_element() {
  Mesh m;
  m.W = 1.0;
  m.H = 1.0;
  m.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  m.elems = {{0, 1, 2, 3}};
  m.bottom = {0, 1};
  m.top = {3, 2};
  m.left = {0, 3};
  m.right = {1, 2};
  for (auto& e : m.electrodes) e = {0};
  return m;
}

SimSetup small_setup(double theta = 298.0, double angle_deg = 0.0) {
  SimSetup s;
  s.mesh = build_sen_mesh(1.0, 1.0, 0.5, 0.1, 0.2);
  s.orientation = decompose_families(orientation_from_angles({angle_deg * kDeg}, {1.0}), 0.3);
  s.theta = theta;
  for (auto dummy : {0}) (void)dummy;
  s.pf.l0 = 0.08;
  s.pf.alpha_hat = 2.0;
  s.loading.initial_du = 1e-3;
  s.loading.max_disp = 5e-3;
  s.solver.threads = 2;
  return s;
}

}  // namespace

TEST_CASE("mechanical assembly at the undeformed state") {
  const Mesh m = build_sen_mesh(1.0, 1.0, 0.5, 0.2, 0.3);
  const auto orient = decompose_families(orientation_from_angles({0.0}, {1.0}), 0.3);
  MaterialParams p;
  SolverConfig cfg;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * m.n_nodes());
  const Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.n_nodes());
  std::vector<MaterialState> gp(4 * m.n_elems());

  const auto asm_ = assemble_mechanical(m, u, phi, gp, 0.01, orient, p, cfg);
  CHECK(asm_.fint.norm() < 1e-10);

  const Eigen::MatrixXd k = Eigen::MatrixXd(asm_.k);
  CHECK((k - k.transpose()).norm() < 1e-8 * k.norm());
}

TEST_CASE("single-element patch: internal force matches the stress by virtual work") {
  const Mesh m = unit_element();
  const auto orient = decompose_families(orientation_from_angles({30 * kDeg}, {1.0}), 0.3);
  MaterialParams p;
  SolverConfig cfg;
  cfg.consistent_tangent_mode = false;

  Mat2 grad;  // affine displacement u = G x
  grad << 0.012, 0.004, -0.003, 0.008;
  Eigen::VectorXd u(8);
  for (int a = 0; a < 4; ++a) {
    const Vec2 ux = grad * m.nodes[a];
    u(2 * a) = ux.x();
    u(2 * a + 1) = ux.y();
  }
  const Eigen::VectorXd phi = Eigen::VectorXd::Zero(4);
  std::vector<MaterialState> gp(4);
  std::vector<MaterialState> gp_out;
  std::vector<double> y_out;
  const auto asm_ = assemble_mechanical(m, u, phi, gp, 1e-3, orient, p, cfg, &gp_out, &y_out);

  // uniform F for an affine field
  const Mat3 f = detail::embed_plane_strain(Mat2::Identity() + grad);
  const auto sr = eval_stress(gp_out[0].F, gp_out[0].Fv, gp_out[0].Fvp, 0.0, 296.0, orient, p);
  CHECK((gp_out[0].F - f).norm() < 1e-12);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  const double vol = (Mat2::Identity() + grad).determinant();
  for (int trial = 0; trial < 5; ++trial) {
    Mat2 g;
    g << ur(rng), ur(rng), ur(rng), ur(rng);
    Eigen::VectorXd du(8);
    for (int a = 0; a < 4; ++a) {
      const Vec2 xc = m.nodes[a] + Vec2(u(2 * a), u(2 * a + 1));
      const Vec2 d = g * xc;
      du(2 * a) = d.x();
      du(2 * a + 1) = d.y();
    }
    const double work_fe = du.dot(asm_.fint);
    const double work_sigma = vol * (sr.sigma.topLeftCorner<2, 2>().array() * g.array()).sum();
    CHECK(work_fe == Catch::Approx(work_sigma).epsilon(1e-9));
  }
}

TEST_CASE("phase-field assembly") {
  const Mesh m = build_sen_mesh(1.0, 1.0, 0.5, 0.2, 0.3);
  MaterialParams p;
  SolverConfig cfg;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * m.n_nodes());
  const Mat2 a_hat = gradient_anisotropy(random_orientation(), 2.0);

  SECTION("homogeneous history keeps the field at zero") {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.n_nodes());
    std::vector<double> hist(4 * m.n_elems(), 0.0);
    const auto rep = solve_phasefield(m, u, phi, hist, a_hat, p, cfg);
    CHECK(rep.converged);
    CHECK(phi.norm() < 1e-12);
  }

  SECTION("stiffness is symmetric positive definite with nonzero history") {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.n_nodes());
    std::vector<double> hist(4 * m.n_elems(), 0.5);
    const auto asm_ = assemble_phasefield(m, u, phi, hist, a_hat, p);
    const Eigen::MatrixXd k = Eigen::MatrixXd(asm_.k);
    CHECK((k - k.transpose()).norm() < 1e-10 * k.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }

  SECTION("uniform history drives a uniform field toward equilibrium value") {
    // with zero gradient, equilibrium: (2H + Gc/l0) phi = 2H
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.n_nodes());
    const double h = 1.0;
    std::vector<double> hist(4 * m.n_elems(), h);
    const auto rep = solve_phasefield(m, u, phi, hist, a_hat, p, cfg);
    CHECK(rep.converged);
    const double expected = 2.0 * h / (2.0 * h + p.Gc / p.l0);
    for (int i = 0; i < m.n_nodes(); ++i) CHECK(phi(i) == Catch::Approx(expected).margin(1e-8));
  }
}

TEST_CASE("staggered step control flow") {
  SimSetup s = small_setup();

  SECTION("zero increment leaves the state unchanged") {
    Simulation sim(s);
    double du = 0.0, dt = 1.0;
    const auto rec = sim.staggered_step(du, dt);
    CHECK(rec.disp == 0.0);
    CHECK(rec.force == Catch::Approx(0.0).margin(1e-12));
    CHECK(rec.a_tilde == Catch::Approx(0.0).margin(1e-12));
    CHECK(rec.c_tilde == 1.0);
    for (double r : rec.ratios) CHECK(r == 1.0);
    CHECK(sim.fields().u.norm() == 0.0);
  }

  SECTION("forced non-convergence reduces the load exactly n_red times") {
    s.solver.n_red = 3;
    s.solver.max_newton = 6;
    Simulation sim(s);
    double du = 0.6;  // far beyond anything integrable in one step
    double dt = 1.0;
    const double du0 = du;
    CHECK_THROWS_AS(sim.staggered_step(du, dt), RunTerminated);
    CHECK(du == Catch::Approx(du0 / std::pow(s.solver.k_red, s.solver.n_red)));
    CHECK(sim.fields().u.norm() == 0.0);  // state rolled back
  }
}

TEST_CASE("loaded steps satisfy global equilibrium") {
  SimSetup s = small_setup();
  Simulation sim(s);
  double du = 2e-3, dt = du / (1.0 / 60.0);
  StepRecord rec;
  for (int k = 0; k < 3; ++k) rec = sim.staggered_step(du, dt);

  CHECK(rec.force > 0.0);
  CHECK(rec.disp == Catch::Approx(6e-3));
  CHECK(rec.reductions == 0);

  // reaction consistency: top vs bottom, and the converged residual
  CHECK(rec.force == Catch::Approx(-rec.force_bottom).epsilon(1e-8));
  REQUIRE(!rec.newton_residuals.empty());
  CHECK(rec.newton_residuals.back() < s.solver.newton_tol);

  // notch faces separate under tension
  double jump = 0.0;
  for (const auto& [lo, hi] : s.mesh.slit_pairs) {
    jump = std::max(jump, sim.fields().u(2 * hi + 1) - sim.fields().u(2 * lo + 1));
  }
  CHECK(jump > 1e-5);

  // Newton converges superlinearly in the elastic regime
  const auto& res = rec.newton_residuals;
  REQUIRE(res.size() >= 3);
  for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] < res[i - 1]);
  const double last_ratio = res[res.size() - 1] / res[res.size() - 2];
  CHECK(last_ratio < 0.2);

  // phase-field bounds
  CHECK(sim.fields().phi_min_raw > -1e-6);
  CHECK(sim.fields().phi_max_raw < 1.0 + 1e-6);
  CHECK(sim.fields().phi.minCoeff() >= 0.0);
  CHECK(sim.fields().phi.maxCoeff() <= 1.0);
}

TEST_CASE("short run emits monotone records") {
  SimSetup s = small_setup();
  s.loading.max_disp = 4e-3;
  const RunResult rr = run_simulation(s);
  REQUIRE(rr.records.size() >= 4);
  CHECK(rr.records.front().step == 0);
  CHECK(rr.records.front().c_tilde == 1.0);
  for (std::size_t i = 1; i < rr.records.size(); ++i) {
    CHECK(rr.records[i].disp > rr.records[i - 1].disp);
    CHECK(rr.records[i].a_tilde >= rr.records[i - 1].a_tilde - 1e-12);
    CHECK(rr.records[i].time > rr.records[i - 1].time);
  }
  // compliance normalization: first loaded step defines C0
  CHECK(rr.records[1].c_tilde == Catch::Approx(1.0).margin(1e-6));
}
