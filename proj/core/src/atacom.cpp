#include "safelayer/atacom.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>
#include <fmt/format.h>

namespace safelayer {

void FilterConfig::validate() const {
  if (!(slack_beta > 0.0)) throw DomainError("slack_beta must be > 0");
  if (!(slack_tolerance > 0.0)) throw DomainError("slack_tolerance must be > 0");
  if (!(error_gain > 0.0)) throw DomainError("error_gain must be > 0");
  if (drift_clip && !(*drift_clip > 0.0)) throw DomainError("drift_clip must be > 0 when set");
  if (!(substep_dt > 0.0)) throw DomainError("substep_dt must be > 0");
  if (!(null_rank_tol > 0.0 && null_rank_tol < 1.0)) {
    throw DomainError("null_rank_tol must be in (0, 1)");
  }
}

FilterConfig FilterConfig::manipulation() {
  FilterConfig c;
  c.slack_beta = 10.0;
  c.slack_tolerance = 1e-3;
  c.error_gain = 10.0;
  c.drift_clip = 2.0;
  c.substep_dt = 1.0 / 60.0;
  return c;
}

FilterConfig FilterConfig::air_hockey() {
  FilterConfig c;
  c.slack_beta = 2.0;
  c.slack_tolerance = 1e-6;
  // K dt = 0.9 at 50 Hz: recovery from a 5 cm violation down to the 1e-6
  // tolerance fits in ceil(5 / (K dt)) substeps.
  c.error_gain = 45.0;
  c.drift_clip = 2.0;
  c.substep_dt = 1.0 / 50.0;
  return c;
}

Vector slack_from_constraint(const Vector& g, const FilterConfig& cfg) {
  return (-g).cwiseMax(cfg.slack_tolerance).array().log() / cfg.slack_beta;
}

Vector slack_value(const Vector& mu, const FilterConfig& cfg) {
  return (cfg.slack_beta * mu).array().exp();
}

Vector slack_derivative(const Vector& mu, const FilterConfig& cfg) {
  return cfg.slack_beta * slack_value(mu, cfg);
}

Vector augmented_constraint(const Vector& g, const Vector& mu, const FilterConfig& cfg) {
  if (g.size() != mu.size()) throw DomainError("constraint and slack sizes differ");
  return g + slack_value(mu, cfg);
}

Matrix augmented_jacobian(const Matrix& jacobian, const Vector& mu, const FilterConfig& cfg) {
  const auto k = jacobian.rows();
  const auto n = jacobian.cols();
  if (mu.size() != k) throw DomainError("slack vector does not match constraint rows");
  Matrix jc = Matrix::Zero(k, n + k);
  jc.leftCols(n) = jacobian;
  jc.rightCols(k).diagonal() = slack_derivative(mu, cfg);
  return jc;
}

namespace {

// SVD-based factorization of J_c shared by the basis and the pseudoinverse.
class AugmentedFactor {
 public:
  AugmentedFactor(const Matrix& jc, const FilterConfig& cfg)
      : k_(jc.rows()), n_(jc.cols() - jc.rows()) {
    if (n_ < 0) throw DomainError("augmented Jacobian must have at least as many columns as rows");
    if (k_ == 0) return;
    svd_.compute(jc, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& s = svd_.singularValues();
    smax_ = s[0];
    smin_ = s[k_ - 1];
    if (!(smax_ > 0.0) || !(smin_ > cfg.null_rank_tol * smax_) || !jc.allFinite()) {
      throw BasisError(fmt::format("augmented Jacobian lost row rank: sigma_min {:.3e}, "
                                   "sigma_max {:.3e}, tolerance {:.1e}",
                                   smin_, smax_, cfg.null_rank_tol),
                       smin_, smax_);
    }
  }

  TangentBasis basis() const {
    TangentBasis b;
    if (k_ == 0) {
      b.full = Matrix::Identity(n_, n_);
      b.joint = b.full;
      return b;
    }
    const Matrix null = svd_.matrixV().rightCols(n_);
    // Procrustes: rotate the null basis by Q maximizing trace(N_q Q).
    Eigen::JacobiSVD<Matrix> top(null.topRows(n_), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix rotation = top.matrixV() * top.matrixU().transpose();
    b.full = null * rotation;
    b.joint = b.full.topRows(n_);
    return b;
  }

  // Minimum-norm solution of J_c x = rhs.
  Vector solve(const Vector& rhs) const {
    if (k_ == 0) return Vector::Zero(n_);
    const Vector coeffs = (svd_.matrixU().transpose() * rhs).cwiseQuotient(svd_.singularValues());
    return svd_.matrixV().leftCols(k_) * coeffs;
  }

  double smin() const { return smin_; }
  double smax() const { return smax_; }

 private:
  Eigen::Index k_;
  Eigen::Index n_;
  Eigen::JacobiSVD<Matrix> svd_;
  double smin_ = 0.0;
  double smax_ = 0.0;
};

AugmentedVelocity split(const Vector& x, Eigen::Index n) {
  return AugmentedVelocity{x.head(n), x.tail(x.size() - n)};
}

AugmentedVelocity drift_from_factor(const Vector& drift, const Matrix& constraint_jac,
                                    const AugmentedFactor& factor, Eigen::Index n,
                                    const FilterConfig& cfg) {
  if (drift.size() == 0 || drift.isZero(0.0)) {
    return AugmentedVelocity{Vector::Zero(n), Vector::Zero(constraint_jac.rows())};
  }
  AugmentedVelocity v = split(-factor.solve(constraint_jac * drift), n);
  if (cfg.drift_clip) {
    const double norm = v.joint.norm();
    if (norm > *cfg.drift_clip) {
      const double scale = *cfg.drift_clip / norm;
      v.joint *= scale;
      v.slack *= scale;
    }
  }
  return v;
}

AugmentedVelocity error_from_factor(const Vector& c, const AugmentedFactor& factor,
                                    Eigen::Index n, const FilterConfig& cfg) {
  const Vector active = c.cwiseMax(0.0);
  if (active.isZero(0.0)) return AugmentedVelocity{Vector::Zero(n), Vector::Zero(c.size())};
  return split(-factor.solve(cfg.error_gain * active), n);
}

}  // namespace

TangentBasis tangent_basis(const Matrix& augmented_jac, const FilterConfig& cfg) {
  return AugmentedFactor(augmented_jac, cfg).basis();
}

AugmentedVelocity drift_term(const Vector& drift, const Matrix& constraint_jac,
                             const Matrix& augmented_jac, const FilterConfig& cfg) {
  const Eigen::Index n = augmented_jac.cols() - augmented_jac.rows();
  if (constraint_jac.rows() != augmented_jac.rows() || constraint_jac.cols() != n ||
      drift.size() != n) {
    throw DomainError("drift term dimensions do not match");
  }
  return drift_from_factor(drift, constraint_jac, AugmentedFactor(augmented_jac, cfg), n, cfg);
}

AugmentedVelocity error_correction(const Vector& c, const Matrix& augmented_jac,
                                   const FilterConfig& cfg) {
  if (c.size() != augmented_jac.rows()) throw DomainError("error vector does not match J_c rows");
  const Eigen::Index n = augmented_jac.cols() - augmented_jac.rows();
  return error_from_factor(c, AugmentedFactor(augmented_jac, cfg), n, cfg);
}

SafeActionBreakdown filter_action(const Vector& q, const Vector& a_rfm,
                                  const ConstraintSet& constraints, const FilterConfig& cfg,
                                  FilterState* state) {
  if (!q.allFinite()) throw DomainError("configuration is not finite");
  return filter_action(constraints.evaluate(q), a_rfm, cfg, Vector(), state);
}

SafeActionBreakdown filter_action(const ConstraintEvaluation& evaluation, const Vector& a_rfm,
                                  const FilterConfig& cfg, const Vector& drift,
                                  FilterState* state) {
  const Eigen::Index n = evaluation.jacobian.cols();
  const Eigen::Index k = evaluation.g.size();
  if (a_rfm.size() != n) {
    throw DomainError(fmt::format("action has {} entries, expected {}", a_rfm.size(), n));
  }
  if (!a_rfm.allFinite()) throw DomainError("action is not finite");
  if (drift.size() != 0 && drift.size() != n) throw DomainError("drift size mismatch");
  if (!evaluation.g.allFinite() || !evaluation.jacobian.allFinite()) {
    throw DomainError("constraint evaluation is not finite");
  }

  const Vector mu = slack_from_constraint(evaluation.g, cfg);
  const Vector c = augmented_constraint(evaluation.g, mu, cfg);
  const Matrix jc = augmented_jacobian(evaluation.jacobian, mu, cfg);
  const AugmentedFactor factor(jc, cfg);
  const TangentBasis basis = factor.basis();

  SafeActionBreakdown out;
  out.a_drift = drift_from_factor(drift, evaluation.jacobian, factor, n, cfg).joint;
  out.a_err = error_from_factor(c, factor, n, cfg).joint;
  out.a_tangent = basis.joint * a_rfm;
  out.a_safe = out.a_drift + out.a_err + out.a_tangent;
  out.basis = basis.joint;

  auto& d = out.diagnostics;
  d.null_residual = k > 0 ? (jc * basis.full).norm() : 0.0;
  d.orth_residual = (basis.full.transpose() * basis.full - Matrix::Identity(n, n)).norm();
  d.max_g = k > 0 ? evaluation.g.maxCoeff() : -std::numeric_limits<double>::infinity();
  d.min_singular = factor.smin();
  d.max_singular = factor.smax();

  if (state) {
    state->evaluation = evaluation;
    state->slack = mu;
    state->diagnostics = d;
  }
  return out;
}

Vector Plant::drift_at(const JointState& s) const {
  if (!drift) return Vector::Zero(s.q.size());
  return drift(s);
}

JointState Plant::step(const JointState& s, const Vector& action, double dt) const {
  if (!drift) return integrate(s, action, dt);
  return integrate(s, drift(s) + action, dt);
}

MultirateResult multirate_execute(const Plant& plant, const JointState& start,
                                  std::span<const Vector> chunk, const ConstraintSet& constraints,
                                  const FilterConfig& cfg, int substeps_per_action,
                                  bool apply_filter) {
  if (substeps_per_action < 1) throw DomainError("substeps_per_action must be >= 1");
  cfg.validate();
  MultirateResult result{start, {}};
  result.log.reserve(chunk.size() * static_cast<std::size_t>(substeps_per_action));
  ConstraintEvaluation eval = constraints.evaluate(start.q);
  const Eigen::Index n = start.q.size();
  for (const Vector& action : chunk) {
    for (int s = 0; s < substeps_per_action; ++s) {
      SubstepRecord rec;
      rec.a_rfm = action;
      if (apply_filter) {
        const Vector f = plant.drift ? plant.drift_at(result.final_state) : Vector();
        SafeActionBreakdown b = filter_action(eval, action, cfg, f);
        rec.a_drift = std::move(b.a_drift);
        rec.a_err = std::move(b.a_err);
        rec.a_tangent = std::move(b.a_tangent);
        rec.a_safe = std::move(b.a_safe);
        rec.diagnostics = b.diagnostics;
      } else {
        rec.a_drift = Vector::Zero(n);
        rec.a_err = Vector::Zero(n);
        rec.a_tangent = action;
        rec.a_safe = action;
      }
      result.final_state = plant.step(result.final_state, rec.a_safe, cfg.substep_dt);
      eval = constraints.evaluate(result.final_state.q);
      rec.t = result.final_state.t;
      rec.q = result.final_state.q;
      rec.g = eval.g;
      result.log.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace safelayer
