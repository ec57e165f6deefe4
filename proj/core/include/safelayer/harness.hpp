#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safelayer/atacom.hpp"
#include "safelayer/policy.hpp"
#include "safelayer/scenario.hpp"

namespace safelayer {

// One logged substep. The first record of a trajectory is the initial state
// with zero actions.
struct TrajectoryRecord {
  double t = 0.0;
  Vector q;
  Vector g;
  Vector3 ee = Vector3::Zero();
  double a_rfm_norm = 0.0;
  double a_drift_norm = 0.0;
  double a_err_norm = 0.0;
  double a_tangent_norm = 0.0;
  double a_safe_norm = 0.0;
  double null_residual = 0.0;
  double orth_residual = 0.0;
};

struct BlockInfo {
  std::string kind;
  std::string label;
  int offset = 0;
  int rows = 0;
};

struct Trajectory {
  std::string scenario;
  std::uint64_t seed = 0;
  bool filtered = false;
  double substep_dt = 0.0;
  std::vector<BlockInfo> blocks;
  std::vector<TrajectoryRecord> records;
};

struct BlockViolation {
  std::string label;
  std::string kind;
  double max_g = 0.0;
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  bool filtered = false;
  double max_violation = 0.0;             // max over time and rows of g
  std::vector<BlockViolation> per_block;  // same, per block
  long violation_steps = 0;               // substeps with any g > tolerance
  long contact_steps = 0;                 // substeps with an OBB row at g >= 0
  long substeps = 0;
  bool task_success = false;              // success criterion ignoring safety
  bool success = false;                   // with the scenario's safety requirement
  std::optional<double> duration_to_success;
  double max_null_residual = 0.0;
  double max_orth_residual = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  Trajectory trajectory;
  ActionStream actions;  // what the policy emitted, for replay
};

// Builds the scenario's policy for one episode. Per-episode randomness (puck
// or target position, noise) comes from the episode seed only.
std::unique_ptr<Policy> make_policy(const Scenario& sc, std::uint64_t episode_seed);

// Steps the plant at the filter rate. Filtered and unfiltered runs with the
// same seed see the same policy randomness.
EpisodeResult run_episode(const Scenario& sc, bool with_filter, std::uint64_t seed);
EpisodeResult run_episode(const Scenario& sc, bool with_filter, std::uint64_t seed, Policy& policy,
                          const ConstraintSet& constraints);

// Recomputes every trajectory-derived metric from a log.
EpisodeMetrics metrics_from_trajectory(const Trajectory& traj, const SuccessSpec& criterion,
                                       const std::optional<TaskGoal>& goal, double tolerance);

struct SuccessResult {
  bool task_success = false;
  bool success = false;
  std::optional<double> time = std::nullopt;
};

// Reach: final end effector within tolerance_m of the target. Strike: the end
// effector crosses the plane through the strike point (normal = strike
// direction) with speed along the direction >= speed_fraction * hit speed,
// within lateral_tolerance_m of the strike line. `success` additionally
// requires g <= tolerance on every record when require_safe is set.
SuccessResult success_check(const Trajectory& traj, const SuccessSpec& criterion,
                            const std::optional<TaskGoal>& goal, double tolerance);

// Line-delimited JSON, first line a versioned header with the block layout.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace safelayer
