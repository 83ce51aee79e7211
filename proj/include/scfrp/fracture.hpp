/**
 * @file fracture.hpp
 * @brief Phase-field quantities beyond the material point: degradation
 *        function, crack-surface functional and damage indicators.
 */

#ifndef SCFRP_FRACTURE_HPP
#define SCFRP_FRACTURE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <tuple>

#include "scfrp/mesh.hpp"

namespace scfrp {

struct PhaseFieldParams {
  double Gc = 0.2;        // N/mm
  double l0 = 0.02;       // mm
  double alpha_hat = 2.0; // gradient anisotropy strength
  double k_res = 1e-6;

  void validate() const {
    if (Gc <= 0.0 || l0 <= 0.0 || alpha_hat < 0.0)
      throw std::domain_error("PhaseFieldParams: Gc, l0 must be positive and alpha_hat >= 0");
  }
};

/// Quadratic degradation g = (1-phi)^2 + k_res with its derivatives.
/// Out-of-range phi is clamped (warned once per process).
inline std::tuple<double, double, double> degradation(double phi, double k_res = 1e-6) {
  if (phi < 0.0 || phi > 1.0) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "warning: phase-field value " << phi << " clamped to [0,1]\n";
      warned = true;
    }
    phi = std::clamp(phi, 0.0, 1.0);
  }
  const double one = 1.0 - phi;
  return {one * one + k_res, -2.0 * one, 2.0};
}

/// Regularized crack length: Gauss quadrature of
/// phi^2/(2 l0) + (l0/2) |grad phi|^2 over the reference mesh.
inline double crack_surface_length(const Eigen::VectorXd& phi, const Mesh& m, double l0) {
  double total = 0.0;
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto shapes = quad_gauss(element_coords(m, e));
    const auto& conn = m.elems[e];
    for (const auto& q : shapes) {
      double p = 0.0;
      Vec2 grad = Vec2::Zero();
      for (int a = 0; a < 4; ++a) {
        p += q.n[a] * phi(conn[a]);
        grad += q.dndx[a] * phi(conn[a]);
      }
      total += q.jxw * (p * p / (2.0 * l0) + 0.5 * l0 * grad.squaredNorm());
    }
  }
  return total;
}

/// Crack length normalized by the specimen width.
inline double normalized_crack_length(const Eigen::VectorXd& phi, const Mesh& m,
                                      double l0, double w) {
  if (!(w > 0.0)) throw std::domain_error("normalized_crack_length: width must be positive");
  return crack_surface_length(phi, m, l0) / w;
}

/// Largest x-coordinate among nodes with phi >= threshold; falls back to the
/// notch tip when no node qualifies.
inline double crack_tip_x(const Eigen::VectorXd& phi, const Mesh& m, double threshold = 0.95) {
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw std::domain_error("crack_tip_x: threshold must lie in (0,1)");
  double x = m.notch_tip_x;
  bool found = false;
  for (int i = 0; i < m.n_nodes(); ++i) {
    if (phi(i) >= threshold) {
      x = found ? std::max(x, m.nodes[i].x()) : m.nodes[i].x();
      found = true;
    }
  }
  return found ? x : m.notch_tip_x;
}

}  // namespace scfrp

#endif  // SCFRP_FRACTURE_HPP
