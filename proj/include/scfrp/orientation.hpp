/**
 * @file orientation.hpp
 * @brief Second-order fiber orientation tensor, its decomposition into
 *        discrete fiber families with effective volume fractions, and the
 *        anisotropic gradient-energy tensor for the damage operator.
 */

#ifndef SCFRP_ORIENTATION_HPP
#define SCFRP_ORIENTATION_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "scfrp/tensor.hpp"

namespace scfrp {

/// One discrete fiber family: unit reference direction and effective
/// volume fraction.
struct FiberFamily {
  Vec2 direction;
  double volume_fraction = 0.0;
};

/// In-plane orientation state of the composite at a material point.
struct OrientationSpec {
  Mat2 A = Mat2::Identity() * 0.5;  // second-order orientation tensor
  std::vector<FiberFamily> families;
  double vf_total = 0.0;  // total fiber volume fraction
  double vm = 1.0;        // matrix volume fraction = 1 - vf_total
};

/// Assemble the orientation tensor A = sum_k w_k a_k (x) a_k from discrete
/// in-plane fiber angles. Weights must be non-negative and sum to one.
inline Mat2 orientation_from_angles(const std::vector<double>& angles_rad,
                                    const std::vector<double>& weights) {
  if (angles_rad.empty() || angles_rad.size() != weights.size()) {
    throw std::domain_error("orientation_from_angles: need matching, non-empty angle/weight lists");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::domain_error("orientation_from_angles: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-10) {
    throw std::domain_error("orientation_from_angles: weights must sum to 1");
  }
  Mat2 a = Mat2::Zero();
  for (std::size_t k = 0; k < angles_rad.size(); ++k) {
    const Vec2 d(std::cos(angles_rad[k]), std::sin(angles_rad[k]));
    a += weights[k] * d * d.transpose();
  }
  return a;
}

/// The 2D isotropic ("random") orientation tensor diag(1/2, 1/2).
inline Mat2 random_orientation() { return 0.5 * Mat2::Identity(); }

/// Split an orientation tensor into eigen-aligned fiber families.
/// Family i carries volume fraction vf_total * lambda_i / sum(lambda_j).
/// Families with negligible eigenvalue (< 1e-9) are dropped.
inline OrientationSpec decompose_families(const Mat2& a, double vf_total) {
  if (std::abs(a.trace() - 1.0) > 1e-6) {
    throw std::domain_error("decompose_families: orientation tensor trace must be 1");
  }
  if (vf_total < 0.0 || vf_total > 1.0) {
    throw std::domain_error("decompose_families: fiber volume fraction must lie in [0,1]");
  }
  const auto pairs = sym_eigen2(0.5 * (a + a.transpose()));
  double lam_sum = 0.0;
  for (const auto& [lam, v] : pairs) {
    if (lam < -1e-9) throw std::domain_error("decompose_families: orientation tensor must be PSD");
    if (lam >= 1e-9) lam_sum += lam;
  }
  OrientationSpec spec;
  spec.A = a;
  spec.vf_total = vf_total;
  spec.vm = 1.0 - vf_total;
  if (lam_sum > 0.0) {
    for (const auto& [lam, v] : pairs) {
      if (lam < 1e-9) continue;
      FiberFamily fam;
      fam.direction = v.normalized();
      fam.volume_fraction = vf_total * lam / lam_sum;
      spec.families.push_back(fam);
    }
  }
  return spec;
}

/// Gradient-energy anisotropy tensor A_hat = I + alpha_hat * A.
/// alpha_hat = 0 recovers the isotropic damage operator.
inline Mat2 gradient_anisotropy(const Mat2& a, double alpha_hat) {
  if (alpha_hat < 0.0) {
    throw std::domain_error("gradient_anisotropy: anisotropy parameter must be >= 0");
  }
  return Mat2::Identity() + alpha_hat * a;
}

}  // namespace scfrp

#endif  // SCFRP_ORIENTATION_HPP
