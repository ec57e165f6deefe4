#include "safelayer/harness.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace safelayer {

namespace {

using Vector2 = Eigen::Vector2d;

Vector2 uniform_in(std::mt19937_64& rng, const Vector2& lo, const Vector2& hi) {
  Vector2 p;
  for (int i = 0; i < 2; ++i) {
    p[i] = lo[i] == hi[i] ? lo[i] : std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
  }
  return p;
}

Attachment observed_point(const Scenario& sc) {
  for (const auto& p : sc.points) {
    if (p.name == sc.ik_point) return p.attachment;
  }
  // Fall back to the flange origin.
  return Attachment{sc.chain.dof(), Vector3::Zero()};
}

// Online accumulation of the violation metrics.
class ViolationTracker {
 public:
  ViolationTracker(const std::vector<BlockInfo>& blocks, double tolerance)
      : blocks_(blocks), tolerance_(tolerance) {
    per_block_.reserve(blocks.size());
    for (const auto& b : blocks) {
      per_block_.push_back({b.label, b.kind, -std::numeric_limits<double>::infinity()});
    }
  }

  void add(const TrajectoryRecord& r) {
    bool violated = false;
    bool contact = false;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& info = blocks_[b];
      if (info.rows == 0) continue;
      const double m = r.g.segment(info.offset, info.rows).maxCoeff();
      per_block_[b].max_g = std::max(per_block_[b].max_g, m);
      max_ = std::max(max_, m);
      violated = violated || m > tolerance_;
      contact = contact || (info.kind == "obb" && m >= 0.0);
    }
    violation_steps_ += violated ? 1 : 0;
    contact_steps_ += contact ? 1 : 0;
    null_ = std::max(null_, r.null_residual);
    orth_ = std::max(orth_, r.orth_residual);
  }

  void fill(EpisodeMetrics& m) const {
    m.max_violation = max_;
    m.per_block = per_block_;
    m.violation_steps = violation_steps_;
    m.contact_steps = contact_steps_;
    m.max_null_residual = null_;
    m.max_orth_residual = orth_;
  }

 private:
  const std::vector<BlockInfo>& blocks_;
  double tolerance_;
  std::vector<BlockViolation> per_block_;
  double max_ = -std::numeric_limits<double>::infinity();
  long violation_steps_ = 0;
  long contact_steps_ = 0;
  double null_ = 0.0;
  double orth_ = 0.0;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const Scenario& sc, std::uint64_t episode_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(sc.policy.seed),
                    static_cast<std::uint32_t>(sc.policy.seed >> 32),
                    static_cast<std::uint32_t>(episode_seed),
                    static_cast<std::uint32_t>(episode_seed >> 32)};
  std::mt19937_64 rng(seq);
  return std::visit(
      [&](const auto& p) -> std::unique_ptr<Policy> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZeroPolicySpec>) {
          const int dim = p.space == ActionSpace::joint ? sc.chain.dof() : 2;
          return std::make_unique<RandomPolicy>(Vector::Zero(dim), Vector::Zero(dim), rng(),
                                                p.space);
        } else if constexpr (std::is_same_v<T, RandomPolicySpec>) {
          return std::make_unique<RandomPolicy>(p.lower, p.upper, rng(), p.space);
        } else if constexpr (std::is_same_v<T, ScriptedHitSpec>) {
          const Vector2 puck = uniform_in(rng, p.puck_min, p.puck_max);
          return std::make_unique<ScriptedHitPolicy>(puck, p.params,
                                                     p.noise_fraction * p.params.hit_speed, rng());
        } else if constexpr (std::is_same_v<T, ScriptedReachSpec>) {
          ScriptedReachParams params = p.params;
          params.target = uniform_in(rng, p.target_min, p.target_max);
          return std::make_unique<ScriptedReachPolicy>(params, p.noise_mps, rng());
        } else {
          return policy_replay(p.path);
        }
      },
      sc.policy.params);
}

EpisodeResult run_episode(const Scenario& sc, bool with_filter, std::uint64_t seed) {
  const ConstraintSet constraints = sc.build_constraints();
  const auto policy = make_policy(sc, seed);
  return run_episode(sc, with_filter, seed, *policy, constraints);
}

EpisodeResult run_episode(const Scenario& sc, bool with_filter, std::uint64_t seed, Policy& policy,
                          const ConstraintSet& constraints) {
  const int substeps = sc.substeps();
  const double dt = sc.filter.substep_dt;
  const long total = sc.total_substeps();
  const Attachment ee_point = observed_point(sc);
  const bool task = policy.space() == ActionSpace::task;
  if (task) sc.point(sc.ik_point);
  if (constraints.dof() != sc.chain.dof() && !constraints.empty()) {
    throw DomainError("constraint set does not match the chain");
  }

  EpisodeResult out;
  Trajectory& traj = out.trajectory;
  traj.scenario = sc.name;
  traj.seed = seed;
  traj.filtered = with_filter;
  traj.substep_dt = dt;
  for (std::size_t b = 0; b < constraints.blocks().size(); ++b) {
    const auto& blk = constraints.blocks()[b];
    traj.blocks.push_back({blk.kind(), blk.label(), constraints.row_offset(b), blk.rows()});
  }
  out.actions.space = policy.space();
  out.actions.dim = policy.action_dim();

  EpisodeMetrics& m = out.metrics;
  m.seed = seed;
  m.filtered = with_filter;
  ViolationTracker tracker(traj.blocks, sc.filter.slack_tolerance);
  traj.records.reserve(static_cast<std::size_t>(total) + 1);

  JointState state = JointState::at_rest(sc.initial_q);
  ConstraintEvaluation eval = constraints.evaluate(state.q);
  const auto log = [&](const JointState& s, const Vector* a_rfm, const SafeActionBreakdown* b) {
    TrajectoryRecord r;
    r.t = s.t;
    r.q = s.q;
    r.g = eval.g;
    r.ee = sc.chain.pose(s.q).point(ee_point);
    if (a_rfm) r.a_rfm_norm = a_rfm->norm();
    if (b) {
      r.a_drift_norm = b->a_drift.norm();
      r.a_err_norm = b->a_err.norm();
      r.a_tangent_norm = b->a_tangent.norm();
      r.a_safe_norm = b->a_safe.norm();
      r.null_residual = b->diagnostics.null_residual;
      r.orth_residual = b->diagnostics.orth_residual;
    } else if (a_rfm) {
      r.a_tangent_norm = r.a_rfm_norm;
      r.a_safe_norm = r.a_rfm_norm;
    }
    tracker.add(r);
    traj.records.push_back(std::move(r));
  };
  log(state, nullptr, nullptr);

  const Plant plant;  // velocity-controlled kinematic robot
  long step = 0;
  try {
    while (step < total) {
      const Observation obs{state.t, state.q, traj.records.back().ee};
      const std::vector<Vector> chunk = policy.next_chunk(obs, sc.chunk_size);
      if (chunk.empty()) break;
      for (const Vector& action : chunk) {
        if (step >= total) break;
        if (action.size() != policy.action_dim()) {
          throw DomainError(fmt::format("policy emitted {} entries, expected {}", action.size(),
                                        policy.action_dim()));
        }
        out.actions.actions.push_back({state.t, action});
        const Vector a_rfm =
            task ? damped_pinv_ik(sc.chain, state.q, action, ee_point, sc.ik_damping) : action;
        if (a_rfm.size() != sc.chain.dof()) throw DomainError("joint action has the wrong size");
        for (int s = 0; s < substeps && step < total; ++s, ++step) {
          if (with_filter) {
            const SafeActionBreakdown b = filter_action(eval, a_rfm, sc.filter);
            state = plant.step(state, b.a_safe, dt);
            if (!state.q.allFinite()) throw DomainError("state became non-finite");
            eval = constraints.evaluate(state.q);
            log(state, &a_rfm, &b);
          } else {
            state = plant.step(state, a_rfm, dt);
            if (!state.q.allFinite()) throw DomainError("state became non-finite");
            eval = constraints.evaluate(state.q);
            log(state, &a_rfm, nullptr);
          }
        }
      }
    }
  } catch (const BasisError& e) {
    m.aborted = true;
    m.abort_reason = e.what();
  } catch (const DomainError& e) {
    m.aborted = true;
    m.abort_reason = e.what();
  }
  if (m.aborted) spdlog::warn("episode {} aborted: {}", seed, m.abort_reason);

  out.actions.goal = policy.goal();
  tracker.fill(m);
  m.substeps = static_cast<long>(traj.records.size()) - 1;
  const SuccessResult s =
      success_check(traj, sc.success, out.actions.goal, sc.filter.slack_tolerance);
  m.task_success = !m.aborted && s.task_success;
  m.success = !m.aborted && s.success;
  m.duration_to_success = m.success ? s.time : std::nullopt;
  return out;
}

EpisodeMetrics metrics_from_trajectory(const Trajectory& traj, const SuccessSpec& criterion,
                                       const std::optional<TaskGoal>& goal, double tolerance) {
  EpisodeMetrics m;
  m.seed = traj.seed;
  m.filtered = traj.filtered;
  ViolationTracker tracker(traj.blocks, tolerance);
  for (const auto& r : traj.records) tracker.add(r);
  tracker.fill(m);
  m.substeps = static_cast<long>(traj.records.size()) - 1;
  const SuccessResult s = success_check(traj, criterion, goal, tolerance);
  m.task_success = s.task_success;
  m.success = s.success;
  m.duration_to_success = s.success ? s.time : std::nullopt;
  return m;
}

SuccessResult success_check(const Trajectory& traj, const SuccessSpec& criterion,
                            const std::optional<TaskGoal>& goal, double tolerance) {
  SuccessResult res;
  if (criterion.kind == SuccessSpec::Kind::none || !goal || traj.records.empty()) return res;

  if (criterion.kind == SuccessSpec::Kind::reach) {
    const auto within = [&](const TrajectoryRecord& r) {
      return (r.ee - goal->target).norm() <= criterion.tolerance_m;
    };
    res.task_success = within(traj.records.back());
    if (res.task_success) {
      for (const auto& r : traj.records) {
        if (within(r)) {
          res.time = r.t;
          break;
        }
      }
    }
  } else {
    const Vector3 u = goal->direction;
    for (std::size_t i = 1; i < traj.records.size() && !res.task_success; ++i) {
      const auto& a = traj.records[i - 1];
      const auto& b = traj.records[i];
      const Vector3 p0 = a.ee - goal->target;
      const Vector3 p1 = b.ee - goal->target;
      const double s0 = p0.dot(u);
      const double s1 = p1.dot(u);
      if (!(s0 < 0.0 && s1 >= 0.0) || !(b.t > a.t)) continue;
      const double speed = (s1 - s0) / (b.t - a.t);
      const Vector3 crossing = p0 + (-s0 / (s1 - s0)) * (p1 - p0);
      const Vector3 lateral = crossing - crossing.dot(u) * u;
      if (speed >= criterion.speed_fraction * goal->speed &&
          lateral.head<2>().norm() <= criterion.lateral_tolerance_m) {
        res.task_success = true;
        res.time = b.t;
      }
    }
  }

  bool safe = true;
  for (const auto& r : traj.records) {
    if (r.g.size() > 0 && r.g.maxCoeff() > tolerance) {
      safe = false;
      break;
    }
  }
  res.success = res.task_success && (!criterion.require_safe || safe);
  if (!res.success) res.time.reset();
  return res;
}

}  // namespace safelayer
