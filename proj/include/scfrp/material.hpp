/**
 * @file material.hpp
 * @brief Finite-strain viscoelastic-viscoplastic constitutive point model
 *        for short-fiber composites: free energies, Cauchy stress,
 *        exponential-map integration of the internal variables, crack
 *        driving energy and the numerically perturbed spatial tangent.
 *
 * Tensors are stored 3x3 with the out-of-plane stretch carried explicitly
 * (plane strain, F33 = 1), so deviatoric and trace operators follow the 3D
 * definitions used by the flow rules.
 */

#ifndef SCFRP_MATERIAL_HPP
#define SCFRP_MATERIAL_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scfrp/orientation.hpp"
#include "scfrp/tensor.hpp"

namespace scfrp {

/// Scalar constants of the mechanical, fracture and thermal model.
/// Defaults are the calibrated CF/epoxy values; everything is configurable.
struct MaterialParams {
  // Viscoelastic-viscoplastic constants
  double mu_eq0 = 760.0;         // MPa, equilibrium shear modulus at theta0
  double mu_neq0 = 790.0;        // MPa, non-equilibrium shear modulus at theta0
  double kv0 = 1154.0;           // MPa, volumetric bulk modulus
  double eps_dot0 = 1.0447e12;   // 1/s, viscous pre-exponential rate
  double delta_H = 1.977e-19;    // J, activation energy
  double m_exp = 0.657;          // stress exponent
  double tau0 = 40.0;            // MPa, athermal shear resistance
  double a_vp = 0.005;           // viscoplastic prefactor (dry condition)
  double b_vp = 1.1;             // viscoplastic exponent
  double sigma0_vp = 25.0;       // MPa, viscoplastic stress threshold
  double eps0_vp = 0.02;         // onset strain of viscoplastic flow
  double alpha_theta = 0.01093;  // 1/K, temperature sensitivity
  double a1 = 9.0, a2 = 1.0, a3 = 1.0;  // fiber stiffening constants

  // Phase-field fracture constants
  double Gc = 0.2;     // N/mm, critical energy release rate
  double l0 = 0.02;    // mm, regularization length
  double k_res = 1e-6; // residual stiffness in the degradation function

  // Thermal constants
  double theta0 = 296.0;       // K, reference temperature
  double kb = 1.380649e-23;    // J/K
  double J_theta = 1.0;        // fixed thermal dilatation scalar

  // Weight of the matrix free energy in the family sum. The fiber-fraction
  // weighting is the composite form used for the simulations; the unit
  // weighting recovers a plain neo-Hookean matrix as vf -> 0.
  enum class MatrixWeight { kFiberFraction, kUnit };
  MatrixWeight matrix_weight = MatrixWeight::kFiberFraction;

  void validate() const {
    if (mu_eq0 <= 0.0 || mu_neq0 <= 0.0 || kv0 <= 0.0)
      throw std::domain_error("MaterialParams: moduli must be positive");
    if (m_exp <= 0.0) throw std::domain_error("MaterialParams: stress exponent must be positive");
    if (l0 <= 0.0 || Gc <= 0.0) throw std::domain_error("MaterialParams: fracture constants must be positive");
    if (!(k_res > 0.0) || k_res > 1e-3)
      throw std::domain_error("MaterialParams: residual stiffness must lie in (0, 1e-3]");
    if (J_theta <= 0.0) throw std::domain_error("MaterialParams: thermal dilatation must be positive");
  }
};

/// Full state of one material point.
struct MaterialState {
  Mat3 F = Mat3::Identity();    // total deformation gradient
  Mat3 Fv = Mat3::Identity();   // viscous distortional gradient, det = 1
  Mat3 Fvp = Mat3::Identity();  // viscoplastic distortional gradient, det = 1
  double history = 0.0;         // max crack driving energy over history
  double theta = 296.0;         // K
};

/// Free-energy split at one evaluation.
struct EnergyBreakdown {
  double psi_eq = 0.0;
  double psi_neq = 0.0;
  double psi_vol_plus = 0.0;
  double psi_vol_minus = 0.0;
};

struct StressResult {
  Mat3 sigma = Mat3::Zero();      // total Cauchy stress, MPa
  Mat3 sigma_neq = Mat3::Zero();  // degraded non-equilibrium deviatoric stress
  EnergyBreakdown breakdown;
};

/// Raised when the internal-variable fixed point fails to converge.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& msg, double residual)
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Temperature-scaled shear moduli, mu = mu0 * (2 - exp(alpha*(theta-theta0))).
inline std::pair<double, double> temperature_moduli(double theta, const MaterialParams& p) {
  const double fac = 2.0 - std::exp(p.alpha_theta * (theta - p.theta0));
  if (!std::isfinite(fac) || fac <= 0.0) {
    throw std::domain_error("temperature_moduli: temperature too far above reference, modulus would vanish");
  }
  return {p.mu_eq0 * fac, p.mu_neq0 * fac};
}

/// Arrhenius-type viscous strain rate driven by the non-equilibrium stress norm.
inline double viscous_rate(double tau_neq, double theta, const MaterialParams& p) {
  if (tau_neq < 0.0) throw std::domain_error("viscous_rate: stress norm must be >= 0");
  const double c = p.delta_H / (p.kb * theta);
  return p.eps_dot0 * std::exp(c * (std::pow(tau_neq / p.tau0, p.m_exp) - 1.0));
}

/// Threshold-based viscoplastic strain rate. The power-law base is clamped
/// at zero below the onset strain.
inline double viscoplastic_rate(double tau_tot, double eps, double eps_dot,
                                const MaterialParams& p) {
  if (eps < 0.0) throw std::domain_error("viscoplastic_rate: strain measure must be >= 0");
  if (tau_tot < p.sigma0_vp) return 0.0;
  const double base = std::max(eps - p.eps0_vp, 0.0);
  return p.a_vp * std::pow(base, p.b_vp) * eps_dot;
}

/// Green-Lagrange strain of a deformation gradient.
inline Mat3 green_strain(const Mat3& f) {
  return 0.5 * (f.transpose() * f - Mat3::Identity());
}

namespace detail {

struct FiberBranch {
  double psi = 0.0;   // strain energy density (one family, one branch)
  Mat3 sigma2 = Mat3::Zero();  // 2 * [bracket]; divide by J outside
};

// Transversely isotropic fiber energy and its exact stress push-forward
// for one family on one branch (equilibrium or non-equilibrium).
inline FiberBranch fiber_branch(const Mat3& fx, const Mat3& cx, const Vec3& a0,
                                double mu, double vfi, double vm,
                                const MaterialParams& p) {
  FiberBranch out;
  const Vec3 ca = cx * a0;
  const double i4 = a0.dot(ca);
  const double i5 = ca.squaredNorm();
  const double i1 = cx.trace();
  const double sqi4 = std::sqrt(i4);

  const double ef = std::exp(p.a3 * (i4 - 1.0));
  const double f = p.a1 + p.a2 * ef;
  const double fp = p.a2 * p.a3 * ef;

  const double n1 = (1.0 + vfi) * f + (1.0 - vfi);
  const double d1 = (1.0 - vfi) * f + 1.0 + vfi;
  const double g1 = n1 / d1;
  const double g1p = fp * ((1.0 + vfi) * d1 - n1 * (1.0 - vfi)) / (d1 * d1);

  const double n2 = (1.0 + 0.4 * vfi) * f + 0.4 * (1.0 - vfi);
  const double d2 = (1.0 - vfi) * f + 0.4 + vfi;
  const double g2 = n2 / d2;
  const double g2p = fp * ((1.0 + 0.4 * vfi) * d2 - n2 * (1.0 - vfi)) / (d2 * d2);

  const double t1 = i4 + 2.0 / sqi4 - 3.0;
  const double t2 = (i5 - i4 * i4) / i4;
  const double t3 = i1 - (i5 + 2.0 * sqi4) / i4;

  out.psi = 0.5 * mu * ((vm + vfi * f) * t1 + g1 * t2 + g2 * t3);

  const double w1 = 0.5 * mu * g2;
  const double w4 = 0.5 * mu *
      (vfi * fp * t1 + (vm + vfi * f) * (1.0 - 1.0 / (i4 * sqi4))
       + g1p * t2 - g1 * (i5 / (i4 * i4) + 1.0)
       + g2p * t3 + g2 * (i5 / (i4 * i4) + 1.0 / (i4 * sqi4)));
  const double w5 = 0.5 * mu * (g1 - g2) / i4;

  const Vec3 b = fx * a0;           // |b|^2 = i4
  const Vec3 bb = (fx * fx.transpose()) * b;  // B_x b, with b.(B_x b) = i5
  const Mat3 id = Mat3::Identity();
  out.sigma2 = 2.0 * (w1 * dev(fx * fx.transpose())
                      + w4 * (b * b.transpose() - (i4 / 3.0) * id)
                      + w5 * (bb * b.transpose() + b * bb.transpose() - (2.0 * i5 / 3.0) * id));
  return out;
}

}  // namespace detail

/// Cauchy stress and free-energy breakdown at a fixed internal state.
/// The deviatoric and tensile-volumetric parts are degraded by
/// g(phi) = (1-phi)^2 + k_res; the compressive volumetric part is not.
inline StressResult eval_stress(const Mat3& f, const Mat3& fv, const Mat3& fvp,
                                double phi, double theta,
                                const OrientationSpec& orient,
                                const MaterialParams& p) {
  const double j = f.determinant();
  if (!(j > 0.0)) throw std::domain_error("eval_stress: det(F) must be positive");
  phi = std::clamp(phi, 0.0, 1.0);

  const double jm = j / p.J_theta;
  const Mat3 fbar = std::pow(j, -1.0 / 3.0) * f;
  const Mat3 fve = fbar * fvp.inverse();
  const Mat3 fe = fve * fv.inverse();
  const Mat3 bve = fve * fve.transpose();
  const Mat3 be = fe * fe.transpose();
  const Mat3 cve = fve.transpose() * fve;
  const Mat3 ce = fe.transpose() * fe;

  const auto [mu_eq, mu_neq] = temperature_moduli(theta, p);

  const double w_m = (p.matrix_weight == MaterialParams::MatrixWeight::kFiberFraction)
                         ? orient.vf_total
                         : 1.0;
  double psi_eq = w_m * 0.5 * mu_eq * (bve.trace() - 3.0);
  double psi_neq = w_m * 0.5 * mu_neq * (be.trace() - 3.0);
  Mat3 sig_eq = w_m * mu_eq * dev(bve);
  Mat3 sig_neq = w_m * mu_neq * dev(be);

  for (const FiberFamily& fam : orient.families) {
    const Vec3 a0(fam.direction.x(), fam.direction.y(), 0.0);
    const auto eq = detail::fiber_branch(fve, cve, a0, mu_eq, fam.volume_fraction, orient.vm, p);
    const auto ne = detail::fiber_branch(fe, ce, a0, mu_neq, fam.volume_fraction, orient.vm, p);
    psi_eq += fam.volume_fraction * eq.psi;
    psi_neq += fam.volume_fraction * ne.psi;
    sig_eq += fam.volume_fraction * eq.sigma2;
    sig_neq += fam.volume_fraction * ne.sigma2;
  }

  const double psi_vol = 0.5 * p.kv0 * (0.5 * (jm * jm - 1.0) - std::log(jm));
  const double dpsi_vol_dj = 0.5 * p.kv0 * (jm - 1.0 / jm) / p.J_theta;

  StressResult out;
  out.breakdown.psi_eq = psi_eq;
  out.breakdown.psi_neq = psi_neq;
  out.breakdown.psi_vol_plus = (jm >= 1.0) ? psi_vol : 0.0;
  out.breakdown.psi_vol_minus = (jm < 1.0) ? psi_vol : 0.0;

  const double g = (1.0 - phi) * (1.0 - phi) + p.k_res;
  const Mat3 sigma_dev = (sig_eq + sig_neq) / j;
  const Mat3 sigma_vol = dpsi_vol_dj * Mat3::Identity();
  Mat3 sigma = g * sigma_dev + ((jm >= 1.0) ? g : 1.0) * sigma_vol;
  out.sigma = 0.5 * (sigma + sigma.transpose());
  out.sigma_neq = g * dev(sig_neq) / j;
  return out;
}

/// Instantaneous energy density available to drive fracture: deviatoric
/// branches plus the tensile volumetric part only.
inline double crack_driving_energy(const EnergyBreakdown& bd) {
  return bd.psi_eq + bd.psi_neq + bd.psi_vol_plus;
}

/// Monotone history update enforcing crack irreversibility.
inline double update_history(double h_n, double y_new) {
  return std::max(h_n, y_new);
}

namespace detail {

// One fixed-point solve of the exponential-map update over [t_n, t_n + dt].
// Returns false if the iteration fails to contract within max_iter.
inline bool integrate_fixed_point(const Mat3& f_next, const MaterialState& sn,
                                  double dt, double phi,
                                  const OrientationSpec& orient,
                                  const MaterialParams& p, double tol,
                                  int max_iter, MaterialState& out,
                                  double& residual) {
  const double eps_n = green_strain(sn.F).norm();
  const double eps_new = green_strain(f_next).norm();
  const double eps_dot = std::max(0.0, (eps_new - eps_n) / dt);

  const double j = f_next.determinant();
  if (!(j > 0.0)) throw std::domain_error("integrate_internal: det(F) must be positive");
  const Mat3 fbar = std::pow(j, -1.0 / 3.0) * f_next;

  Mat3 fv = sn.Fv;
  Mat3 fvp = sn.Fvp;
  residual = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const StressResult sr = eval_stress(f_next, fv, fvp, phi, sn.theta, orient, p);

    const Mat3 s_neq = dev(sr.sigma_neq);
    const double tau_neq = s_neq.norm();
    Mat3 fv_new = sn.Fv;
    if (tau_neq > 1e-14) {
      const Mat3 fe = fbar * fvp.inverse() * fv.inverse();
      const Mat3 re = polar_decompose(fe).rotation;
      const double rate_v = viscous_rate(tau_neq, sn.theta, p);
      const Mat3 dv = (rate_v / tau_neq) * (re.transpose() * s_neq * re);
      if (!(dt * rate_v < 5.0)) { residual = dt * rate_v; return false; }  // exp blow-up imminent
      fv_new = matrix_exp(dt * dev(dv)) * sn.Fv;
    }

    const Mat3 s_dev = dev(sr.sigma);
    const double tau_tot = s_dev.norm();
    Mat3 fvp_new = sn.Fvp;
    if (tau_tot >= p.sigma0_vp) {
      const double rate_vp = viscoplastic_rate(tau_tot, eps_new, eps_dot, p);
      if (rate_vp > 0.0) {
        if (!(dt * rate_vp < 5.0)) { residual = dt * rate_vp; return false; }
        const Mat3 dvp = (rate_vp / tau_tot) * s_dev;
        fvp_new = matrix_exp(dt * dev(dvp)) * sn.Fvp;
      }
    }

    residual = (fv_new - fv).norm() + (fvp_new - fvp).norm();
    fv = fv_new;
    fvp = fvp_new;
    if (residual < tol) {
      out = sn;
      out.F = f_next;
      out.Fv = fv;
      out.Fvp = fvp;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Exponential-map update over n_sub equal substeps with F interpolated
/// linearly, each solved by the fixed-point iteration. The substep count is
/// an explicit argument so callers (the FE assembly in particular) can keep
/// the integration path fixed across Newton iterations; a path that adapts
/// to the iterate makes the residual discontinuous.
inline MaterialState integrate_substeps(const Mat3& f_next, const MaterialState& sn,
                                        double dt, int n_sub, double phi,
                                        const OrientationSpec& orient,
                                        const MaterialParams& p,
                                        double tol = 1e-8, int max_iter = 50) {
  if (!(dt > 0.0)) throw std::domain_error("integrate_substeps: dt must be positive");
  if (n_sub < 1) throw std::domain_error("integrate_substeps: need at least one substep");
  MaterialState cur = sn;
  const Mat3 f0 = sn.F;
  for (int k = 1; k <= n_sub; ++k) {
    const double a = static_cast<double>(k) / n_sub;
    const Mat3 fk = (1.0 - a) * f0 + a * f_next;
    MaterialState out;
    double residual = 0.0;
    if (!detail::integrate_fixed_point(fk, cur, dt / n_sub, phi, orient, p, tol, max_iter,
                                       out, residual)) {
      throw IntegrationError("integrate_substeps: fixed-point iteration did not converge",
                             residual);
    }
    cur = out;
  }
  return cur;
}

/// Implicit exponential-map update of the internal gradients over one step.
/// Both determinants stay at unity to machine precision. Steps too stiff
/// for the fixed point are retried on deterministically doubled substep
/// counts before an IntegrationError is raised.
inline MaterialState integrate_internal(const Mat3& f_next, const MaterialState& sn,
                                        double dt, double phi,
                                        const OrientationSpec& orient,
                                        const MaterialParams& p,
                                        double tol = 1e-8, int max_iter = 50,
                                        int max_bisect = 18) {
  if (!(dt > 0.0)) throw std::domain_error("integrate_internal: dt must be positive");
  int n_sub = 1;
  for (int level = 0;; ++level, n_sub *= 2) {
    try {
      return integrate_substeps(f_next, sn, dt, n_sub, phi, orient, p, tol, max_iter);
    } catch (const IntegrationError&) {
      if (level >= max_bisect) throw;
    }
  }
}

/// In-plane fourth-order tangent, stored with both Jaumann and
/// Truesdell-corrected (spatial) coefficients.
struct TangentResult {
  double jaumann[2][2][2][2] = {};
  double spatial[2][2][2][2] = {};
};

namespace detail {

inline void finalize_tangent(TangentResult& t, const Mat3& sigma) {
  // Jaumann-to-Truesdell correction and major symmetrization.
  for (int i = 0; i < 2; ++i)
    for (int jj = 0; jj < 2; ++jj)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          const double corr =
              0.5 * ((i == k) * sigma(jj, l) + (i == l) * sigma(jj, k) +
                     sigma(i, k) * (jj == l) + sigma(i, l) * (jj == k));
          t.spatial[i][jj][k][l] = t.jaumann[i][jj][k][l] - corr + sigma(i, jj) * (k == l);
        }
  for (int i = 0; i < 2; ++i)
    for (int jj = 0; jj < 2; ++jj)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          if (4 * i + 2 * jj <= 4 * k + 2 * l) {
            const double s = 0.5 * (t.spatial[i][jj][k][l] + t.spatial[k][l][i][jj]);
            t.spatial[i][jj][k][l] = s;
            t.spatial[k][l][i][jj] = s;
          }
        }
}

inline Mat3 perturbed_f(const Mat3& f, int k, int l, double eps) {
  Mat3 d = Mat3::Zero();
  d(k, l) += 0.5 * eps;
  d(l, k) += 0.5 * eps;
  return (Mat3::Identity() + d) * f;
}

}  // namespace detail

/// Forward-difference Jaumann tangent at frozen internal variables,
/// with the Truesdell correction applied for the FE weak form. Minor
/// symmetries hold by construction; the major symmetry is enforced by
/// symmetrization.
inline TangentResult spatial_tangent(const MaterialState& st, double phi,
                                     const OrientationSpec& orient,
                                     const MaterialParams& p,
                                     double eps_pert = 1e-5) {
  if (!(eps_pert > 0.0)) throw std::domain_error("spatial_tangent: perturbation must be positive");
  const StressResult base = eval_stress(st.F, st.Fv, st.Fvp, phi, st.theta, orient, p);
  TangentResult t;
  const int pairs[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  for (const auto& kl : pairs) {
    const int k = kl[0], l = kl[1];
    const Mat3 fp = detail::perturbed_f(st.F, k, l, eps_pert);
    const StressResult pert = eval_stress(fp, st.Fv, st.Fvp, phi, st.theta, orient, p);
    const Mat3 dsig = (pert.sigma - base.sigma) / eps_pert;
    for (int i = 0; i < 2; ++i)
      for (int jj = 0; jj < 2; ++jj) {
        t.jaumann[i][jj][k][l] = dsig(i, jj);
        t.jaumann[i][jj][l][k] = dsig(i, jj);
      }
  }
  detail::finalize_tangent(t, base.sigma);
  return t;
}

/// Consistent variant used inside Newton loops: base and perturbed stresses
/// are taken after re-integrating the internal variables from the previous
/// converged state, so the tangent linearizes the incremental update.
/// Returns the integrated state and base stress alongside the tangent.
struct ConsistentTangent {
  TangentResult tangent;
  MaterialState state;
  StressResult stress;
};

inline ConsistentTangent consistent_tangent(const Mat3& f_next, const MaterialState& sn,
                                            double dt, double phi,
                                            const OrientationSpec& orient,
                                            const MaterialParams& p,
                                            double tol = 1e-8, int max_iter = 50,
                                            double eps_pert = 1e-5, int n_sub = 1) {
  ConsistentTangent out;
  out.state = integrate_substeps(f_next, sn, dt, n_sub, phi, orient, p, tol, max_iter);
  out.stress = eval_stress(out.state.F, out.state.Fv, out.state.Fvp, phi, sn.theta, orient, p);
  const int pairs[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  for (const auto& kl : pairs) {
    const int k = kl[0], l = kl[1];
    const Mat3 fp = detail::perturbed_f(f_next, k, l, eps_pert);
    const MaterialState sp = integrate_substeps(fp, sn, dt, n_sub, phi, orient, p, tol, max_iter);
    const StressResult pert = eval_stress(sp.F, sp.Fv, sp.Fvp, phi, sn.theta, orient, p);
    const Mat3 dsig = (pert.sigma - out.stress.sigma) / eps_pert;
    for (int i = 0; i < 2; ++i)
      for (int jj = 0; jj < 2; ++jj) {
        out.tangent.jaumann[i][jj][k][l] = dsig(i, jj);
        out.tangent.jaumann[i][jj][l][k] = dsig(i, jj);
      }
  }
  detail::finalize_tangent(out.tangent, out.stress.sigma);
  return out;
}

/// One row of the crack-driving-force relaxation table.
struct PolarRow {
  double direction = 0.0;  // loading angle, rad
  double time = 0.0;       // s
  double y_total = 0.0;
  double y_eq = 0.0;
  double y_neq = 0.0;
  double y_vol = 0.0;
};

/// Applies an instantaneous isochoric uniaxial stretch along each loading
/// direction (in-plane transverse contraction 1/lambda, F33 = 1), then holds
/// the deformation fixed and integrates the relaxation. The first reported
/// row per direction is the elastic state at t = 0, before any flow.
inline std::vector<PolarRow> polar_sweep(double strain_magnitude,
                                         const std::vector<double>& directions,
                                         const std::vector<double>& times,
                                         const OrientationSpec& orient,
                                         const MaterialParams& p,
                                         double theta = 296.0) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw std::domain_error("polar_sweep: times must ascend");
  }
  std::vector<PolarRow> rows;
  const double lam = 1.0 + strain_magnitude;
  for (double dir : directions) {
    Mat3 rot = Mat3::Identity();
    rot(0, 0) = std::cos(dir); rot(0, 1) = -std::sin(dir);
    rot(1, 0) = std::sin(dir); rot(1, 1) = std::cos(dir);
    Mat3 stretch = Mat3::Identity();
    stretch(0, 0) = lam;
    stretch(1, 1) = 1.0 / lam;
    const Mat3 f = rot * stretch * rot.transpose();

    MaterialState st;
    st.F = f;
    st.theta = theta;
    const StressResult s0 = eval_stress(f, st.Fv, st.Fvp, 0.0, theta, orient, p);
    auto record = [&](double t, const EnergyBreakdown& bd) {
      PolarRow r;
      r.direction = dir;
      r.time = t;
      r.y_eq = bd.psi_eq;
      r.y_neq = bd.psi_neq;
      r.y_vol = bd.psi_vol_plus;
      r.y_total = crack_driving_energy(bd);
      rows.push_back(r);
    };
    record(0.0, s0.breakdown);

    double t = 0.0;
    std::size_t next_report = 0;
    while (next_report < times.size() && times[next_report] <= 0.0) ++next_report;
    // geometric hold grid, capped by each report time; the first step is
    // scaled to the initial flow rate so the near-instantaneous relaxation
    // right after the stretch stays integrable
    double dt = 1e-12;
    const double tau0 = dev(s0.sigma_neq).norm();
    if (tau0 > 0.0) {
      dt = std::clamp(0.1 / viscous_rate(tau0, theta, p), 1e-25, 1e-12);
    }
    while (next_report < times.size()) {
      double step = std::min(dt, times[next_report] - t);
      st = integrate_internal(f, st, step, 0.0, orient, p);
      t += step;
      if (t >= times[next_report] - 1e-15) {
        const StressResult s = eval_stress(f, st.Fv, st.Fvp, 0.0, theta, orient, p);
        record(times[next_report], s.breakdown);
        ++next_report;
      }
      dt *= 1.3;
    }
  }
  return rows;
}

}  // namespace scfrp

#endif  // SCFRP_MATERIAL_HPP
