/**
 * @file simulate.hpp
 * @brief Displacement-controlled tension driver: staggered stepping with
 *        adaptive load reduction, electric sweeps per converged step, and
 *        the per-step records consumed by the dataset pipeline.
 */

#ifndef SCFRP_SIMULATE_HPP
#define SCFRP_SIMULATE_HPP

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "scfrp/fem.hpp"
#include "scfrp/fracture.hpp"
#include "scfrp/sensing.hpp"

namespace scfrp {

struct LoadingConfig {
  double rate_mm_per_min = 1.0;
  double max_disp = 0.03;     // mm
  double initial_du = 1e-3;   // mm
};

/// Everything a run needs, resolved and validated.
struct SimSetup {
  Mesh mesh;
  OrientationSpec orientation;
  MaterialParams material;
  PhaseFieldParams pf;
  ElectricalParams electrical;
  SolverConfig solver;
  LoadingConfig loading;
  double theta = 298.0;
  std::vector<double> snapshot_disps;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;      // s
  double disp = 0.0;      // mm
  double force = 0.0;     // N (unit thickness)
  double a_tilde = 0.0;
  double c_tilde = 1.0;
  std::array<double, 28> ratios{};
  // diagnostics (not part of the steps.csv schema)
  double x_tip = 0.0;
  double force_bottom = 0.0;
  int newton_iters = 0;
  int stagger_passes = 0;
  int reductions = 0;
  std::vector<double> newton_residuals;
  std::string failure_note;
};

struct FieldSnapshot {
  double disp = 0.0;
  int step = 0;
  Eigen::VectorXd u;
  Eigen::VectorXd phi;
  Eigen::VectorXd phi_e_15;  // potential of the E1->E5 injection
  Eigen::VectorXd phi_e_37;  // potential of the E3->E7 injection
};

struct RunResult {
  std::vector<StepRecord> records;
  std::vector<FieldSnapshot> snapshots;
  bool terminated_early = false;
};

/// Owns the evolving fields of one simulation and advances them step by
/// step following the staggered scheme: displacement Newton solve,
/// internal-variable update, phase-field solve, history update, then the
/// electric sweep once the pass increments fall below the joint tolerance.
class Simulation {
 public:
  explicit Simulation(const SimSetup& setup)
      : s_(setup),
        a_hat_(gradient_anisotropy(setup.orientation.A, setup.pf.alpha_hat)),
        fields_(make_field_state(setup.mesh, setup.theta)) {
    s_.material.Gc = s_.pf.Gc;
    s_.material.l0 = s_.pf.l0;
    s_.material.k_res = s_.pf.k_res;
    s_.material.validate();
    s_.electrical.validate();
    s_.pf.validate();
    reference_ = eit_sweep(s_.mesh, conductivity_field(s_.mesh, fields_.gp, fields_.phi,
                                                       s_.orientation, s_.electrical),
                           s_.electrical, nullptr, s_.solver.threads);
  }

  const FieldState& fields() const { return fields_; }
  const ConductanceVector& reference_conductances() const { return reference_; }
  const SimSetup& setup() const { return s_; }

  /// Reference record at zero load (step 0).
  StepRecord reference_record() const {
    StepRecord rec;
    rec.step = 0;
    rec.c_tilde = 1.0;
    rec.a_tilde = 0.0;
    rec.x_tip = s_.mesh.notch_tip_x;
    rec.ratios.fill(1.0);
    return rec;
  }

  /// Advance one load step of size `delta_u_bar` over `dt`. On staggered or
  /// Newton failure the increment (and dt) is divided by k_red and the step
  /// retried, up to n_red times; exhaustion throws RunTerminated with the
  /// previous converged state intact.
  StepRecord staggered_step(double& delta_u_bar, double& dt) {
    const FieldState saved = fields_;
    int reductions = 0;
    std::string first_failure;
    while (true) {
      try {
        StepRecord rec = attempt_step(delta_u_bar, dt);
        rec.reductions = reductions;
        rec.failure_note = first_failure;
        return rec;
      } catch (const SolveError& ex) {
        fields_ = saved;
        if (first_failure.empty()) first_failure = ex.what();
        if (reductions >= s_.solver.n_red) {
          throw RunTerminated("staggered step failed after " + std::to_string(reductions) +
                              " load reductions (" + first_failure + ")");
        }
        delta_u_bar /= s_.solver.k_red;
        dt /= s_.solver.k_red;
        ++reductions;
      }
    }
  }

  /// Potential field for one electrode pair at the current state.
  Eigen::VectorXd potential(int anode, int cathode) const {
    const auto sig = conductivity_field(s_.mesh, fields_.gp, fields_.phi, s_.orientation,
                                        s_.electrical);
    const double scale = (s_.electrical.sigma_par0 > 0.0) ? s_.electrical.sigma_par0 : 1.0;
    const SpMat k = assemble_electric(s_.mesh, sig, scale);
    return solve_electric(k, s_.mesh.electrodes[anode], s_.mesh.electrodes[cathode],
                          s_.electrical.v_app);
  }

 private:
  StepRecord attempt_step(double delta_u_bar, double dt) {
    StepRecord rec;
    if (nsub_.size() != fields_.gp.size()) nsub_.assign(fields_.gp.size(), 1);
    for (int& n : nsub_) n = std::max(1, n / 2);  // decay after transients
    const double u_bar = fields_.u.size() ? current_u_bar() + delta_u_bar : delta_u_bar;
    const MechBC bc = make_tension_bc(s_.mesh, u_bar);

    std::vector<MaterialState> gp_trial = fields_.gp;
    std::vector<double> y_trial(fields_.gp.size(), 0.0);
    std::vector<double> h_trial(fields_.gp.size(), 0.0);

    bool joint = false;
    int passes = 0;
    for (; passes < s_.solver.max_stagger; ++passes) {
      const Eigen::VectorXd u_prev = fields_.u;
      const Eigen::VectorXd phi_prev = fields_.phi;

      const NewtonReport mech = solve_displacement(s_.mesh, fields_.u, fields_.phi, fields_.gp,
                                                   dt, s_.orientation, s_.material, s_.solver,
                                                   bc, gp_trial, y_trial, fields_.reaction_top,
                                                   fields_.reaction_bottom, &nsub_);
      if (!mech.converged) {
        std::string trace;
        for (std::size_t i = std::max<std::size_t>(mech.residuals.size(), 6) - 6;
             i < mech.residuals.size(); ++i)
          trace += " " + std::to_string(mech.residuals[i]);
        throw SolveError("displacement Newton did not converge; residual tail:" + trace);
      }
      rec.newton_iters += mech.iterations;
      rec.newton_residuals = mech.residuals;

      for (std::size_t i = 0; i < h_trial.size(); ++i)
        h_trial[i] = update_history(fields_.gp[i].history, y_trial[i]);
      const NewtonReport pf = solve_phasefield(s_.mesh, fields_.u, fields_.phi, h_trial, a_hat_,
                                               s_.material, s_.solver, &fields_.phi_min_raw,
                                               &fields_.phi_max_raw);
      if (!pf.converged) throw SolveError("phase-field solve did not converge");

      const double du_rel = (fields_.u - u_prev).norm() / std::max(fields_.u.norm(), 1e-12);
      const double dphi_rel = (fields_.phi - phi_prev).norm() / std::max(fields_.phi.norm(), 1.0);
      if (du_rel <= s_.solver.stagger_tol && dphi_rel <= s_.solver.stagger_tol) {
        joint = true;
        ++passes;
        break;
      }
    }
    if (!joint) throw SolveError("staggered passes exhausted");

    // commit: history is monotone per Gauss point
    for (std::size_t i = 0; i < gp_trial.size(); ++i)
      gp_trial[i].history = h_trial[i];
    fields_.gp = std::move(gp_trial);
    fields_.step += 1;
    fields_.time += dt;

    rec.step = fields_.step;
    rec.time = fields_.time;
    rec.disp = u_bar;
    rec.force = fields_.reaction_top;
    rec.force_bottom = fields_.reaction_bottom;
    rec.stagger_passes = passes;
    rec.a_tilde = normalized_crack_length(fields_.phi, s_.mesh, s_.pf.l0, s_.mesh.W);
    rec.x_tip = crack_tip_x(fields_.phi, s_.mesh, 0.95);

    if (!c0_.has_value() && rec.force > 1e-9) c0_ = rec.disp / rec.force;
    rec.c_tilde = (c0_.has_value() && rec.force > 1e-9)
                      ? (rec.disp / rec.force) / *c0_
                      : 1.0;

    const auto sweep = eit_sweep(s_.mesh, conductivity_field(s_.mesh, fields_.gp, fields_.phi,
                                                             s_.orientation, s_.electrical),
                                 s_.electrical, &reference_, s_.solver.threads);
    rec.ratios = sweep.ratios;
    return rec;
  }

  double current_u_bar() const {
    // prescribed displacement of the previous converged step
    double ub = 0.0;
    for (int n : s_.mesh.top) ub = fields_.u(2 * n + 1);
    return ub;
  }

  SimSetup s_;
  Mat2 a_hat_;
  FieldState fields_;
  ConductanceVector reference_;
  std::optional<double> c0_;
  std::vector<int> nsub_;
};

/// Full displacement-controlled run. Snapshots are captured the first time
/// the prescribed displacement crosses each configured mark.
inline RunResult run_simulation(const SimSetup& setup,
                                const std::function<void(const StepRecord&)>& on_step = {}) {
  Simulation sim(setup);
  RunResult out;
  out.records.push_back(sim.reference_record());

  const double rate = setup.loading.rate_mm_per_min / 60.0;  // mm/s
  double du = setup.loading.initial_du;
  std::vector<bool> snapped(setup.snapshot_disps.size(), false);

  double u_bar = 0.0;
  while (u_bar < setup.loading.max_disp - 1e-12) {
    double step_du = std::min(du, setup.loading.max_disp - u_bar);
    double dt = step_du / rate;
    try {
      const StepRecord rec = sim.staggered_step(step_du, dt);
      du = step_du;  // reductions persist for subsequent steps
      u_bar = rec.disp;
      out.records.push_back(rec);
      if (on_step) on_step(rec);
      for (std::size_t i = 0; i < snapped.size(); ++i) {
        if (!snapped[i] && u_bar >= setup.snapshot_disps[i] - 1e-12) {
          snapped[i] = true;
          FieldSnapshot snap;
          snap.disp = u_bar;
          snap.step = rec.step;
          snap.u = sim.fields().u;
          snap.phi = sim.fields().phi;
          snap.phi_e_15 = sim.potential(0, 4);
          snap.phi_e_37 = sim.potential(2, 6);
          out.snapshots.push_back(std::move(snap));
        }
      }
    } catch (const RunTerminated&) {
      out.terminated_early = true;
      break;
    }
  }
  return out;
}

}  // namespace scfrp

#endif  // SCFRP_SIMULATE_HPP
