/**
 * @file sensing.hpp
 * @brief Piezoresistive conductivity evaluation, electric-potential solves
 *        on the electrode harness and the 28-pair conductance sweep.
 *
 * The electric problem is assembled on the reference mesh coordinates; the
 * deformation enters through the gauge-factor strain terms. Conductances
 * are evaluated from the discrete reaction currents at the constrained
 * electrode nodes, which makes anode/cathode conservation exact.
 */

#ifndef SCFRP_SENSING_HPP
#define SCFRP_SENSING_HPP

#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "scfrp/material.hpp"
#include "scfrp/mesh.hpp"
#include "scfrp/orientation.hpp"
#include "scfrp/parallel.hpp"

namespace scfrp {

using SpMat = Eigen::SparseMatrix<double>;

struct ElectricalParams {
  double sigma_m = 1e-14;     // S/mm, matrix conductivity
  double sigma_par0 = 66.7;   // S/mm, axial fiber conductivity
  double sigma_perp0 = 15.9;  // S/mm, transverse fiber conductivity
  double gf_par = 2.0;
  double gf_perp = 2.0;
  double p_exp = 2.0;
  double k_e = 1e-6;          // residual conductivity factor
  double v_app = 1.0;         // V

  void validate() const {
    if (sigma_m < 0.0 || sigma_par0 < 0.0 || sigma_perp0 < 0.0)
      throw std::domain_error("ElectricalParams: conductivities must be >= 0");
    if (!(k_e > 0.0)) throw std::domain_error("ElectricalParams: k_e must be positive");
  }
};

/// Effective in-plane conductivity tensor at one material point:
/// matrix + transversely isotropic family contributions with linear
/// gauge-factor strain sensitivity, degraded by h_e = (1-phi)^p + k_e.
/// The strain factors are floored at 1e-3 of nominal.
inline Mat2 conductivity_tensor(const Mat3& f, double phi, const OrientationSpec& orient,
                                const ElectricalParams& ep) {
  phi = std::clamp(phi, 0.0, 1.0);
  const Mat3 e = green_strain(f);
  Mat2 sig = ep.sigma_m * Mat2::Identity();
  for (const FiberFamily& fam : orient.families) {
    const Vec3 a0(fam.direction.x(), fam.direction.y(), 0.0);
    const double eps_par = a0.dot(e * a0);
    const double eps_perp = 0.5 * (e.trace() - eps_par);
    const double fac_par = std::max(1.0 - ep.gf_par * eps_par, 1e-3);
    const double fac_perp = std::max(1.0 - ep.gf_perp * eps_perp, 1e-3);
    const Mat2 aa = fam.direction * fam.direction.transpose();
    sig += fam.volume_fraction *
           (ep.sigma_par0 * fac_par * aa +
            ep.sigma_perp0 * fac_perp * (Mat2::Identity() - aa));
  }
  const double he = std::pow(1.0 - phi, ep.p_exp) + ep.k_e;
  return he * sig;
}

/// Conductivity stiffness on the reference mesh from per-Gauss-point
/// tensors (4 per element, quadrature order). Entries are scaled by
/// 1/sigma_par0 to protect the factorization conditioning; conductances
/// computed from it are rescaled back.
inline SpMat assemble_electric(const Mesh& m, const std::vector<Mat2>& sigma_gp,
                               double scale) {
  if (sigma_gp.size() != static_cast<std::size_t>(4 * m.n_elems()))
    throw std::invalid_argument("assemble_electric: need 4 Gauss tensors per element");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.n_elems()) * 16);
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto shapes = quad_gauss(element_coords(m, e));
    const auto& conn = m.elems[e];
    Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
    for (int q = 0; q < 4; ++q) {
      const Mat2 s = sigma_gp[4 * e + q] / scale;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          ke(a, b) += shapes[q].jxw * shapes[q].dndx[a].dot(s * shapes[q].dndx[b]);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trip.emplace_back(conn[a], conn[b], ke(a, b));
  }
  SpMat k(m.n_nodes(), m.n_nodes());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

/// Dirichlet solve: v_app on the anode nodes, 0 on the cathode nodes,
/// homogeneous Neumann elsewhere.
inline Eigen::VectorXd solve_electric(const SpMat& k, const std::vector<int>& anode,
                                      const std::vector<int>& cathode, double v_app) {
  const int n = static_cast<int>(k.rows());
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  for (int i : anode) {
    if (fixed[i]) throw std::domain_error("solve_electric: anode and cathode overlap");
    fixed[i] = 1;
    value(i) = v_app;
  }
  for (int i : cathode) {
    if (fixed[i]) throw std::domain_error("solve_electric: anode and cathode overlap");
    fixed[i] = 1;
    value(i) = 0.0;
  }
  std::vector<int> map(n, -1);
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) map[i] = nf++;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
  for (int col = 0; col < n; ++col) {
    for (SpMat::InnerIterator it(k, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (fixed[row]) continue;
      if (fixed[col]) {
        rhs(map[row]) -= it.value() * value(col);
      } else {
        trip.emplace_back(map[row], map[col], it.value());
      }
    }
  }
  SpMat kff(nf, nf);
  kff.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> solver(kff);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("solve_electric: factorization failed");
  const Eigen::VectorXd xf = solver.solve(rhs);
  Eigen::VectorXd phi_e = value;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) phi_e(i) = xf(map[i]);
  return phi_e;
}

/// Reaction current through an electrode divided by the applied voltage.
/// `scale` is the conductivity scale used in assemble_electric.
inline double conductance_pair(const SpMat& k, const Eigen::VectorXd& phi_e,
                               const std::vector<int>& electrode, double v_app,
                               double scale = 1.0) {
  const Eigen::VectorXd r = k * phi_e;
  double current = 0.0;
  for (int i : electrode) current += r(i);
  return std::abs(current) * scale / v_app;
}

/// 28 conductances in lexicographic pair order (1,2), (1,3), ..., (7,8).
struct ConductanceVector {
  std::array<double, 28> g{};       // S per unit thickness
  std::array<double, 28> g0{};      // reference values
  std::array<double, 28> ratios{};  // g / g0
};

inline int pair_index(int i, int j) {
  if (i > j) std::swap(i, j);
  // i, j in 0..7
  return i * 7 - i * (i - 1) / 2 + (j - i - 1);
}

/// Cycle through all 8-choose-2 injection pairs. Ratios are taken against
/// `reference` when given, otherwise against the sweep itself.
inline ConductanceVector eit_sweep(const Mesh& m, const std::vector<Mat2>& sigma_gp,
                                   const ElectricalParams& ep,
                                   const ConductanceVector* reference = nullptr,
                                   int threads = 1) {
  const double scale = (ep.sigma_par0 > 0.0) ? ep.sigma_par0 : 1.0;
  const SpMat k = assemble_electric(m, sigma_gp, scale);
  ConductanceVector out;
  std::array<std::pair<int, int>, 28> pairs;
  {
    int idx = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) pairs[idx++] = {i, j};
  }
  parallel_for(28, threads, [&](int idx) {
    const auto [i, j] = pairs[idx];
    const Eigen::VectorXd phi_e = solve_electric(k, m.electrodes[i], m.electrodes[j], ep.v_app);
    out.g[idx] = conductance_pair(k, phi_e, m.electrodes[i], ep.v_app, scale);
  });
  for (int idx = 0; idx < 28; ++idx) {
    out.g0[idx] = reference ? reference->g0[idx] : out.g[idx];
    out.ratios[idx] = (out.g0[idx] > 0.0) ? out.g[idx] / out.g0[idx] : 0.0;
  }
  return out;
}

/// Resistance and the dimensionless self-sensing ratio from a conductance
/// and its undamaged reference.
inline std::pair<double, double> resistance_and_norm(double g, double g0) {
  if (!(g > 0.0) || !(g0 > 0.0))
    throw std::domain_error("resistance_and_norm: conductance must be positive");
  return {1.0 / g, g / g0};
}

/// Per-Gauss-point conductivity tensors for a whole field.
inline std::vector<Mat2> conductivity_field(const Mesh& m,
                                            const std::vector<MaterialState>& gp_states,
                                            const Eigen::VectorXd& phi,
                                            const OrientationSpec& orient,
                                            const ElectricalParams& ep) {
  std::vector<Mat2> out(static_cast<std::size_t>(4 * m.n_elems()));
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto shapes = quad_gauss(element_coords(m, e));
    const auto& conn = m.elems[e];
    for (int q = 0; q < 4; ++q) {
      double p = 0.0;
      for (int a = 0; a < 4; ++a) p += shapes[q].n[a] * phi(conn[a]);
      out[4 * e + q] = conductivity_tensor(gp_states[4 * e + q].F, p, orient, ep);
    }
  }
  return out;
}

}  // namespace scfrp

#endif  // SCFRP_SENSING_HPP
