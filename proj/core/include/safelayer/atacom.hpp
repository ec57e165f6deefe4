#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "safelayer/constraints.hpp"
#include "safelayer/kinematics.hpp"
#include "safelayer/types.hpp"

namespace safelayer {

// Tuning of the constraint-manifold safety layer.
//
// The slack function is sigma(mu) = exp(beta * mu). Slack values are
// recomputed from g at every call, so the filter is a pure function of the
// configuration and the requested action.
struct FilterConfig {
  double slack_beta = 10.0;
  double slack_tolerance = 1e-3;
  double error_gain = 10.0;           // 1/s
  std::optional<double> drift_clip;   // rad/s, Euclidean norm clip
  double substep_dt = 1.0 / 60.0;     // s
  double null_rank_tol = 1e-10;       // relative to the largest singular value

  void validate() const;

  // Pick-and-place defaults: beta 10, tolerance 1e-3, 60 Hz.
  static FilterConfig manipulation();
  // Air hockey defaults: beta 2, tolerance 1e-6, 50 Hz.
  static FilterConfig air_hockey();
};

// mu_i = ln(max(-g_i, tolerance)) / beta.
Vector slack_from_constraint(const Vector& g, const FilterConfig& cfg);
// sigma(mu) = exp(beta mu).
Vector slack_value(const Vector& mu, const FilterConfig& cfg);
// sigma'(mu) = beta exp(beta mu).
Vector slack_derivative(const Vector& mu, const FilterConfig& cfg);
// c = g + sigma(mu).
Vector augmented_constraint(const Vector& g, const Vector& mu, const FilterConfig& cfg);
// J_c = [J | diag(sigma'(mu))], K x (n + K).
Matrix augmented_jacobian(const Matrix& jacobian, const Vector& mu, const FilterConfig& cfg);

struct TangentBasis {
  Matrix full;   // (n + K) x n, orthonormal columns spanning ker(J_c)
  Matrix joint;  // n x n, the joint rows of `full`
};

// Orthonormal basis of the null space of J_c, rotated so that its joint
// rows are as close as possible to the identity (orthogonal Procrustes).
// Throws BasisError when J_c has numerical row rank below K.
TangentBasis tangent_basis(const Matrix& augmented_jac, const FilterConfig& cfg);

// Velocity of the augmented state (q, mu).
struct AugmentedVelocity {
  Vector joint;
  Vector slack;
};

// Cancels J_g f with the minimum-norm augmented velocity; the joint part is
// norm-clipped when drift_clip is set (the slack part is scaled alike).
AugmentedVelocity drift_term(const Vector& drift, const Matrix& constraint_jac,
                             const Matrix& augmented_jac, const FilterConfig& cfg);

// -pinv(J_c) * error_gain * max(c, 0).
AugmentedVelocity error_correction(const Vector& c, const Matrix& augmented_jac,
                                   const FilterConfig& cfg);

struct FilterDiagnostics {
  double null_residual = 0.0;   // ||J_c B_full||_F
  double orth_residual = 0.0;   // ||B_full^T B_full - I||_F
  double max_g = 0.0;
  double min_singular = 0.0;    // smallest singular value of J_c
  double max_singular = 0.0;
};

struct SafeActionBreakdown {
  Vector a_drift;
  Vector a_err;
  Vector a_tangent;  // B * a_rfm
  Vector a_safe;     // a_drift + a_err + a_tangent
  Matrix basis;      // B, n x n
  FilterDiagnostics diagnostics;
};

struct FilterState {
  ConstraintEvaluation evaluation;
  Vector slack;
  FilterDiagnostics diagnostics;
};

// Evaluates the constraints at q and composes the safe action.
SafeActionBreakdown filter_action(const Vector& q, const Vector& a_rfm,
                                  const ConstraintSet& constraints, const FilterConfig& cfg,
                                  FilterState* state = nullptr);

// Same, from an existing evaluation at the current configuration. `drift`
// is the uncontrolled joint velocity f(s) of the plant (zero if empty).
SafeActionBreakdown filter_action(const ConstraintEvaluation& evaluation, const Vector& a_rfm,
                                  const FilterConfig& cfg, const Vector& drift = Vector(),
                                  FilterState* state = nullptr);

// Control-affine plant s' = f(s) + a. An empty drift function is the
// velocity-controlled kinematic robot (f = 0).
struct Plant {
  std::function<Vector(const JointState&)> drift;

  Vector drift_at(const JointState& s) const;
  JointState step(const JointState& s, const Vector& action, double dt) const;
};

struct SubstepRecord {
  double t = 0.0;
  Vector q;            // after the substep
  Vector g;            // constraint values at q
  Vector a_rfm;
  Vector a_drift;
  Vector a_err;
  Vector a_tangent;
  Vector a_safe;
  FilterDiagnostics diagnostics;  // of the filter call that produced a_safe
};

struct MultirateResult {
  JointState final_state;
  std::vector<SubstepRecord> log;
};

// Holds each chunk action for `substeps_per_action` substeps of
// cfg.substep_dt, recomputing every filter term on each substep. With
// apply_filter = false the action is applied unmodified (same logging).
MultirateResult multirate_execute(const Plant& plant, const JointState& start,
                                  std::span<const Vector> chunk, const ConstraintSet& constraints,
                                  const FilterConfig& cfg, int substeps_per_action,
                                  bool apply_filter = true);

}  // namespace safelayer
