/**
 * @file fem.hpp
 * @brief Q4 finite-element machinery for the coupled displacement /
 *        phase-field problem: tangent assembly with geometric stiffness,
 *        Newton loops, and the per-step staggered solve with adaptive
 *        load reduction.
 *
 * The displacement weak form is evaluated in the current configuration
 * (shape gradients pushed forward through F); the phase-field form carries
 * the J^-1 factor, which cancels the volume map so its quadrature runs on
 * the reference measure with spatial gradients.
 */

#ifndef SCFRP_FEM_HPP
#define SCFRP_FEM_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "scfrp/fracture.hpp"
#include "scfrp/material.hpp"
#include "scfrp/mesh.hpp"
#include "scfrp/parallel.hpp"
#include "scfrp/sensing.hpp"

namespace scfrp {

struct SolverConfig {
  double newton_tol = 1e-6;   // residual tolerance, both sub-problems
  int max_newton = 40;
  double stagger_tol = 1e-4;  // joint relative-increment tolerance per pass
  int max_stagger = 120;
  int n_red = 4;              // load reductions per step before termination
  double k_red = 2.0;
  double fp_tol = 1e-8;       // internal-variable fixed point
  int fp_max_iter = 50;
  double tangent_eps = 1e-5;
  bool consistent_tangent_mode = true;  // re-integrate internal variables under perturbation
  int threads = 1;
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the staggered step when all load reductions are exhausted.
class RunTerminated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh-wide solution state. Gauss-point material states are stored in
/// element-quadrature order (4 per element).
struct FieldState {
  Eigen::VectorXd u;    // nodal displacements, interleaved (ux, uy)
  Eigen::VectorXd phi;  // nodal phase field
  std::vector<MaterialState> gp;
  int step = 0;
  double time = 0.0;
  double reaction_top = 0.0;
  double reaction_bottom = 0.0;
  double phi_min_raw = 0.0, phi_max_raw = 0.0;  // pre-projection bounds
};

inline FieldState make_field_state(const Mesh& m, double theta) {
  FieldState fs;
  fs.u = Eigen::VectorXd::Zero(2 * m.n_nodes());
  fs.phi = Eigen::VectorXd::Zero(m.n_nodes());
  fs.gp.assign(static_cast<std::size_t>(4 * m.n_elems()), MaterialState{});
  for (auto& s : fs.gp) s.theta = theta;
  return fs;
}

struct MechAssembly {
  SpMat k;              // tangent, material + geometric parts
  Eigen::VectorXd fint;
};

struct PhiAssembly {
  SpMat k;
  Eigen::VectorXd f;
};

namespace detail {

inline Mat2 deformation_gradient_2d(const std::array<Vec2, 4>& dndX,
                                    const std::array<int, 4>& conn,
                                    const Eigen::VectorXd& u) {
  Mat2 f2 = Mat2::Identity();
  for (int a = 0; a < 4; ++a) {
    const Vec2 ua(u(2 * conn[a]), u(2 * conn[a] + 1));
    f2 += ua * dndX[a].transpose();
  }
  return f2;
}

inline Mat3 embed_plane_strain(const Mat2& f2) {
  Mat3 f = Mat3::Identity();
  f.topLeftCorner<2, 2>() = f2;
  return f;
}

struct MechElemResult {
  Eigen::Matrix<double, 8, 8> ke;
  Eigen::Matrix<double, 8, 1> fe;
};

}  // namespace detail

/// Tangent stiffness and internal force of the displacement sub-problem.
/// Internal variables are integrated from `gp_prev` at each Gauss point;
/// the updated states and crack driving energies are written to `gp_out`
/// and `y_out` when provided.
inline MechAssembly assemble_mechanical(const Mesh& m, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& phi,
                                        const std::vector<MaterialState>& gp_prev,
                                        double dt, const OrientationSpec& orient,
                                        const MaterialParams& p, const SolverConfig& cfg,
                                        std::vector<MaterialState>* gp_out = nullptr,
                                        std::vector<double>* y_out = nullptr,
                                        std::vector<int>* nsub_ws = nullptr) {
  const int ne = m.n_elems();
  std::vector<detail::MechElemResult> results(ne);
  if (gp_out) gp_out->resize(static_cast<std::size_t>(4 * ne));
  if (y_out) y_out->assign(static_cast<std::size_t>(4 * ne), 0.0);
  if (nsub_ws && nsub_ws->size() != static_cast<std::size_t>(4 * ne))
    nsub_ws->assign(static_cast<std::size_t>(4 * ne), 1);

  std::vector<std::string> gp_errors(ne);
  parallel_for(ne, cfg.threads, [&](int e) {
    try {
      const auto& conn = m.elems[e];
      const auto shapes = quad_gauss(element_coords(m, e));
      auto& res = results[e];
      res.ke.setZero();
      res.fe.setZero();
      for (int q = 0; q < 4; ++q) {
        const auto& sh = shapes[q];
        const Mat2 f2 = detail::deformation_gradient_2d(sh.dndx, conn, u);
        const double det_f2 = f2.determinant();
        if (!(det_f2 > 0.0)) throw SolveError("assemble_mechanical: element inverted");
        const Mat3 f3 = detail::embed_plane_strain(f2);
        double phi_gp = 0.0;
        for (int a = 0; a < 4; ++a) phi_gp += sh.n[a] * phi(conn[a]);
        phi_gp = std::clamp(phi_gp, 0.0, 1.0);

        const MaterialState& prev = gp_prev[4 * e + q];
        TangentResult tan;
        MaterialState snew;
        StressResult stress;
        // The substep count per Gauss point is held in the workspace so the
        // integration path stays fixed across Newton iterations; it only
        // ratchets up when the fixed point fails for the current iterate.
        int nsub_local = 1;
        int& nsub = nsub_ws ? (*nsub_ws)[4 * e + q] : nsub_local;
        for (;;) {
          try {
            if (cfg.consistent_tangent_mode) {
              auto ct = consistent_tangent(f3, prev, dt, phi_gp, orient, p,
                                           cfg.fp_tol, cfg.fp_max_iter, cfg.tangent_eps, nsub);
              tan = ct.tangent;
              snew = ct.state;
              stress = ct.stress;
            } else {
              snew = integrate_substeps(f3, prev, dt, nsub, phi_gp, orient, p,
                                        cfg.fp_tol, cfg.fp_max_iter);
              stress = eval_stress(snew.F, snew.Fv, snew.Fvp, phi_gp, prev.theta, orient, p);
              tan = spatial_tangent(snew, phi_gp, orient, p, cfg.tangent_eps);
            }
            break;
          } catch (const IntegrationError&) {
            if (nsub >= (1 << 14))
              throw SolveError("internal-variable integration exceeded the substep cap");
            nsub *= 2;
          }
        }
        if (gp_out) (*gp_out)[4 * e + q] = snew;
        if (y_out) (*y_out)[4 * e + q] = crack_driving_energy(stress.breakdown);

        // push shape gradients to the current configuration
        const Mat2 f2_inv = f2.inverse();
        std::array<Vec2, 4> dndx;
        for (int a = 0; a < 4; ++a) dndx[a] = f2_inv.transpose() * sh.dndx[a];
        const double w = sh.jxw * det_f2;

        const Mat2 sig2 = stress.sigma.topLeftCorner<2, 2>();
        for (int a = 0; a < 4; ++a) {
          for (int i = 0; i < 2; ++i) {
            res.fe(2 * a + i) += w * (sig2(i, 0) * dndx[a](0) + sig2(i, 1) * dndx[a](1));
          }
          for (int b = 0; b < 4; ++b) {
            const double geo = w * dndx[a].dot(sig2 * dndx[b]);
            for (int i = 0; i < 2; ++i) {
              for (int j = 0; j < 2; ++j) {
                double mat = 0.0;
                for (int k = 0; k < 2; ++k)
                  for (int l = 0; l < 2; ++l)
                    mat += dndx[a](k) * tan.spatial[i][k][j][l] * dndx[b](l);
                res.ke(2 * a + i, 2 * b + j) += w * mat + ((i == j) ? geo : 0.0);
              }
            }
          }
        }
      }
    } catch (const std::exception& ex) {
      gp_errors[e] = ex.what();
    }
  });
  for (int e = 0; e < ne; ++e) {
    if (!gp_errors[e].empty())
      throw SolveError("element " + std::to_string(e) + ": " + gp_errors[e]);
  }

  MechAssembly out;
  out.fint = Eigen::VectorXd::Zero(2 * m.n_nodes());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(ne) * 64);
  for (int e = 0; e < ne; ++e) {
    const auto& conn = m.elems[e];
    for (int a = 0; a < 4; ++a) {
      for (int i = 0; i < 2; ++i) {
        out.fint(2 * conn[a] + i) += results[e].fe(2 * a + i);
        for (int b = 0; b < 4; ++b)
          for (int j = 0; j < 2; ++j)
            trip.emplace_back(2 * conn[a] + i, 2 * conn[b] + j, results[e].ke(2 * a + i, 2 * b + j));
      }
    }
  }
  out.k.resize(2 * m.n_nodes(), 2 * m.n_nodes());
  out.k.setFromTriplets(trip.begin(), trip.end());
  return out;
}

/// Phase-field tangent and internal force. `history_gp` holds the trial
/// history per Gauss point; the anisotropic diffusion tensor a_hat couples
/// the fiber architecture into the crack resistance.
inline PhiAssembly assemble_phasefield(const Mesh& m, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& phi,
                                       const std::vector<double>& history_gp,
                                       const Mat2& a_hat, const MaterialParams& p) {
  PhiAssembly out;
  out.f = Eigen::VectorXd::Zero(m.n_nodes());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.n_elems()) * 16);
  const double gc_over_l = p.Gc / p.l0;
  const double gc_l = p.Gc * p.l0;
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto& conn = m.elems[e];
    const auto shapes = quad_gauss(element_coords(m, e));
    for (int q = 0; q < 4; ++q) {
      const auto& sh = shapes[q];
      const Mat2 f2 = detail::deformation_gradient_2d(sh.dndx, conn, u);
      const Mat2 f2_inv = f2.inverse();
      std::array<Vec2, 4> dndx;
      for (int a = 0; a < 4; ++a) dndx[a] = f2_inv.transpose() * sh.dndx[a];
      // J^-1 dv cancels the volume map: quadrature on the reference measure
      const double w = sh.jxw;

      double phi_gp = 0.0;
      Vec2 grad = Vec2::Zero();
      for (int a = 0; a < 4; ++a) {
        phi_gp += sh.n[a] * phi(conn[a]);
        grad += dndx[a] * phi(conn[a]);
      }
      const double hist = history_gp[4 * e + q];
      const double gp_prime = -2.0 * (1.0 - std::clamp(phi_gp, 0.0, 1.0));
      const double mass = 2.0 * hist + gc_over_l;  // g'' H + Gc/l0
      const Vec2 aniso_grad = a_hat * grad;
      for (int a = 0; a < 4; ++a) {
        out.f(conn[a]) += w * (sh.n[a] * (gp_prime * hist + gc_over_l * phi_gp) +
                               gc_l * dndx[a].dot(aniso_grad));
        for (int b = 0; b < 4; ++b) {
          const double kab = w * (sh.n[a] * mass * sh.n[b] +
                                  gc_l * dndx[a].dot(a_hat * dndx[b]));
          trip.emplace_back(conn[a], conn[b], kab);
        }
      }
    }
  }
  out.k.resize(m.n_nodes(), m.n_nodes());
  out.k.setFromTriplets(trip.begin(), trip.end());
  return out;
}

/// Dirichlet data of the tension test: bottom edge fixed vertically, one
/// bottom corner pinned horizontally, top edge driven vertically.
struct MechBC {
  std::vector<int> dofs;
  std::vector<double> values;
  std::vector<int> top_ydofs;
  std::vector<int> bottom_ydofs;
};

inline MechBC make_tension_bc(const Mesh& m, double u_bar) {
  MechBC bc;
  int pin = m.bottom.front();
  for (int n : m.bottom) {
    if (m.nodes[n].x() < m.nodes[pin].x()) pin = n;
  }
  for (int n : m.bottom) {
    bc.dofs.push_back(2 * n + 1);
    bc.values.push_back(0.0);
    bc.bottom_ydofs.push_back(2 * n + 1);
  }
  bc.dofs.push_back(2 * pin);
  bc.values.push_back(0.0);
  for (int n : m.top) {
    bc.dofs.push_back(2 * n + 1);
    bc.values.push_back(u_bar);
    bc.top_ydofs.push_back(2 * n + 1);
  }
  return bc;
}

namespace detail {

struct ReducedSystem {
  std::vector<int> map;  // full dof -> reduced index or -1
  int n_free = 0;
};

inline ReducedSystem make_reduction(int n_dofs, const std::vector<int>& fixed) {
  ReducedSystem r;
  r.map.assign(n_dofs, 0);
  for (int d : fixed) r.map[d] = -1;
  for (int i = 0; i < n_dofs; ++i) {
    if (r.map[i] != -1) r.map[i] = r.n_free++;
  }
  return r;
}

inline SpMat reduce_matrix(const SpMat& k, const ReducedSystem& r) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(k.nonZeros());
  for (int col = 0; col < k.outerSize(); ++col) {
    for (SpMat::InnerIterator it(k, col); it; ++it) {
      const int ri = r.map[it.row()];
      const int ci = r.map[col];
      if (ri >= 0 && ci >= 0) trip.emplace_back(ri, ci, it.value());
    }
  }
  SpMat kff(r.n_free, r.n_free);
  kff.setFromTriplets(trip.begin(), trip.end());
  return kff;
}

}  // namespace detail

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;
};

/// Newton solve of the displacement sub-problem at frozen phase field.
/// External loads are displacement-driven, so the convergence measure is
/// ||f_int||_free / max(||f_ext||, 1) with f_ext = 0.
inline NewtonReport solve_displacement(const Mesh& m, Eigen::VectorXd& u,
                                       const Eigen::VectorXd& phi,
                                       const std::vector<MaterialState>& gp_prev,
                                       double dt, const OrientationSpec& orient,
                                       const MaterialParams& p, const SolverConfig& cfg,
                                       const MechBC& bc,
                                       std::vector<MaterialState>& gp_trial,
                                       std::vector<double>& y_trial,
                                       double& reaction_top, double& reaction_bottom,
                                       std::vector<int>* nsub_ws = nullptr) {
  NewtonReport rep;
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) u(bc.dofs[i]) = bc.values[i];
  const auto red = detail::make_reduction(static_cast<int>(u.size()), bc.dofs);

  for (int it = 0; it < cfg.max_newton; ++it) {
    const MechAssembly asm_ = assemble_mechanical(m, u, phi, gp_prev, dt, orient, p, cfg,
                                                  &gp_trial, &y_trial, nsub_ws);
    double rnorm = 0.0;
    Eigen::VectorXd r_free(red.n_free);
    for (int d = 0; d < u.size(); ++d) {
      if (red.map[d] >= 0) r_free(red.map[d]) = asm_.fint(d);
    }
    rnorm = r_free.norm();
    rep.residuals.push_back(rnorm);
    if (!std::isfinite(rnorm)) throw SolveError("solve_displacement: residual diverged");
    if (rnorm < cfg.newton_tol) {
      rep.converged = true;
      reaction_top = 0.0;
      reaction_bottom = 0.0;
      for (int d : bc.top_ydofs) reaction_top += asm_.fint(d);
      for (int d : bc.bottom_ydofs) reaction_bottom += asm_.fint(d);
      return rep;
    }
    const SpMat kff = detail::reduce_matrix(asm_.k, red);
    Eigen::SparseLU<SpMat> lu(kff);
    if (lu.info() != Eigen::Success) throw SolveError("solve_displacement: singular tangent");
    const Eigen::VectorXd du = lu.solve(-r_free);
    for (int d = 0; d < u.size(); ++d) {
      if (red.map[d] >= 0) u(d) += du(red.map[d]);
    }
    rep.iterations = it + 1;
  }
  return rep;  // converged = false
}

/// Linear-in-phi Newton solve of the damage sub-problem.
inline NewtonReport solve_phasefield(const Mesh& m, const Eigen::VectorXd& u,
                                     Eigen::VectorXd& phi,
                                     const std::vector<double>& history_gp,
                                     const Mat2& a_hat, const MaterialParams& p,
                                     const SolverConfig& cfg,
                                     double* min_raw = nullptr, double* max_raw = nullptr) {
  NewtonReport rep;
  for (int it = 0; it < std::max(2, cfg.max_newton); ++it) {
    const PhiAssembly asm_ = assemble_phasefield(m, u, phi, history_gp, a_hat, p);
    const double rnorm = asm_.f.norm();
    rep.residuals.push_back(rnorm);
    if (rnorm < cfg.newton_tol) {
      rep.converged = true;
      break;
    }
    Eigen::SimplicialLDLT<SpMat> ldlt(asm_.k);
    if (ldlt.info() != Eigen::Success) throw SolveError("solve_phasefield: factorization failed");
    phi += ldlt.solve(-asm_.f);
    rep.iterations = it + 1;
  }
  if (min_raw) *min_raw = phi.minCoeff();
  if (max_raw) *max_raw = phi.maxCoeff();
  phi = phi.cwiseMax(0.0).cwiseMin(1.0);
  return rep;
}

}  // namespace scfrp

#endif  // SCFRP_FEM_HPP
