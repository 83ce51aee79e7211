/**
 * @file tensor.hpp
 * @brief Small dense 2x2/3x3 tensor kernels used by the constitutive and
 *        orientation computations: polar decomposition, matrix exponential,
 *        symmetric eigen-decomposition and deviatoric operators.
 */

#ifndef SCFRP_TENSOR_HPP
#define SCFRP_TENSOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace scfrp {

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Rotation/stretch pair from the right polar decomposition F = R * U.
struct PolarPair {
  Mat3 rotation;  // proper orthogonal
  Mat3 stretch;   // symmetric positive definite
};

inline double frobenius_norm(const Mat3& a) { return a.norm(); }

inline double trace(const Mat3& a) { return a.trace(); }

/// Deviatoric part, 3D convention: dev(T) = T - tr(T)/3 * I.
inline Mat3 dev(const Mat3& t) {
  return t - (t.trace() / 3.0) * Mat3::Identity();
}

inline Mat2 dev2(const Mat2& t) {
  return t - (t.trace() / 2.0) * Mat2::Identity();
}

/// Right polar decomposition F = R*U with det(R) = +1.
/// Requires det(F) > 0; throws std::domain_error otherwise.
inline PolarPair polar_decompose(const Mat3& f) {
  const double j = f.determinant();
  if (!(j > 0.0) || !f.allFinite()) {
    throw std::domain_error("polar_decompose: deformation gradient must have positive determinant");
  }
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Vec3 s = svd.singularValues();
  // det(F) > 0 makes det(U V^T) = +1 up to sign flips of paired columns.
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
    s(2) *= -1.0;
  }
  PolarPair out;
  out.rotation = u * v.transpose();
  out.stretch = v * s.asDiagonal() * v.transpose();
  return out;
}

/// Matrix exponential by scaling-and-squaring with a Taylor kernel.
/// For traceless A the result has unit determinant to machine precision.
inline Mat3 matrix_exp(const Mat3& a) {
  if (!a.allFinite()) {
    throw std::domain_error("matrix_exp: non-finite input");
  }
  // Scale so the Taylor series converges fast, then square back.
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  if (nrm > 0.25) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.25)));
    squarings = std::min(squarings, 60);
  }
  const Mat3 as = a / std::ldexp(1.0, squarings);
  Mat3 term = Mat3::Identity();
  Mat3 sum = Mat3::Identity();
  for (int k = 1; k <= 24; ++k) {
    term = (term * as) / static_cast<double>(k);
    sum += term;
    if (term.norm() < 1e-18 * sum.norm()) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// One eigen-pair of a symmetric tensor.
struct EigenPair {
  double value;
  Vec3 vector;
};

/// Eigen-decomposition of a symmetric 3x3 tensor.
/// Eigenvalues are returned in descending order; eigenvectors are
/// orthonormal with the largest-magnitude component made positive
/// (first such component on ties) so the decomposition is deterministic.
inline std::vector<EigenPair> sym_eigen(const Mat3& s) {
  if ((s - s.transpose()).norm() > 1e-10 * std::max(1.0, s.norm())) {
    throw std::domain_error("sym_eigen: input tensor is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (s + s.transpose()));
  std::vector<EigenPair> out(3);
  for (int i = 0; i < 3; ++i) {
    const int src = 2 - i;  // solver returns ascending order
    EigenPair p;
    p.value = es.eigenvalues()(src);
    p.vector = es.eigenvectors().col(src);
    int imax = 0;
    for (int c = 1; c < 3; ++c) {
      if (std::abs(p.vector(c)) > std::abs(p.vector(imax)) + 1e-14) imax = c;
    }
    if (p.vector(imax) < 0.0) p.vector = -p.vector;
    out[i] = p;
  }
  return out;
}

/// 2x2 variant used by the in-plane orientation tensor.
inline std::vector<std::pair<double, Vec2>> sym_eigen2(const Mat2& s) {
  if (std::abs(s(0, 1) - s(1, 0)) > 1e-10 * std::max(1.0, s.norm())) {
    throw std::domain_error("sym_eigen2: input tensor is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (s + s.transpose()));
  std::vector<std::pair<double, Vec2>> out(2);
  for (int i = 0; i < 2; ++i) {
    const int src = 1 - i;
    double lam = es.eigenvalues()(src);
    Vec2 v = es.eigenvectors().col(src);
    int imax = (std::abs(v(1)) > std::abs(v(0)) + 1e-14) ? 1 : 0;
    if (v(imax) < 0.0) v = -v;
    out[i] = {lam, v};
  }
  return out;
}

}  // namespace scfrp

#endif  // SCFRP_TENSOR_HPP
