#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "safelayer/types.hpp"

namespace safelayer {

// Joint-space actions are joint velocities (rad/s); task-space actions are
// end-effector velocities (m/s) in the base frame, converted by IK.
enum class ActionSpace { joint, task };

std::string to_string(ActionSpace s);
ActionSpace action_space_from_string(const std::string& s);

struct Observation {
  double t = 0.0;
  Vector q;
  Vector3 ee = Vector3::Zero();
};

// What the episode is trying to achieve, for success checks.
struct TaskGoal {
  enum class Kind { reach, strike };
  Kind kind = Kind::reach;
  Vector3 target = Vector3::Zero();     // reach target or strike point
  Vector3 direction = Vector3::Zero();  // unit strike direction
  double speed = 0.0;                   // commanded hit speed (m/s)

  bool operator==(const TaskGoal&) const = default;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionSpace space() const = 0;
  virtual int action_dim() const = 0;
  // The next `chunk_size` actions, planned from `obs`. Fewer (or none) when
  // the stream ends.
  virtual std::vector<Vector> next_chunk(const Observation& obs, int chunk_size) = 0;
  virtual std::optional<TaskGoal> goal() const { return std::nullopt; }
};

struct TimedAction {
  double t = 0.0;
  Vector action;
};

struct ActionStream {
  ActionSpace space = ActionSpace::joint;
  int dim = 0;
  std::optional<TaskGoal> goal;
  std::vector<TimedAction> actions;
};

// Line-delimited JSON, first line a versioned header.
void write_action_stream(const ActionStream& stream, const std::filesystem::path& path);
ActionStream read_action_stream(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scripted air-hockey hit in the table x-y plane.

struct ScriptedHitParams {
  Eigen::Vector2d goal{2.4, 0.0};  // target the puck is driven toward
  double hit_speed = 1.0;          // m/s when crossing the strike point
  double approach_speed = 0.5;     // m/s while moving to the run-up point
  double strike_offset = 0.06;     // strike point distance behind the puck (m)
  double run_up = 0.10;            // acceleration distance before the strike point (m)
  double follow_through = 0.06;    // cruise distance past the puck (m)
  double action_period = 0.08;     // s between actions
  Eigen::Vector2d reach_min{0.3, -0.4};  // plan must stay inside this rectangle
  Eigen::Vector2d reach_max{0.9, 0.4};
};

// Open-loop plan: approach the run-up point, ramp up to hit speed along the
// puck-to-goal line so that hit speed is reached at the strike point, cruise
// through the puck, then stop. A pure function of the action index.
class ScriptedHitPlan {
 public:
  ScriptedHitPlan(const Eigen::Vector2d& start, const Eigen::Vector2d& puck,
                  const ScriptedHitParams& params);

  Eigen::Vector2d action(long index) const;
  std::vector<Eigen::Vector2d> stream(long count) const;

  const Eigen::Vector2d& strike_point() const { return strike_; }
  const Eigen::Vector2d& direction() const { return dir_; }
  bool fallback() const { return fallback_; }
  long active_actions() const { return n_approach_ + n_ramp_ + n_cruise_; }

 private:
  ScriptedHitParams params_;
  Eigen::Vector2d dir_;
  Eigen::Vector2d strike_;
  Eigen::Vector2d approach_velocity_;
  long n_approach_ = 0;
  long n_ramp_ = 0;
  long n_cruise_ = 0;
  bool fallback_ = false;
};

// policy_scripted_hit: the stream of `count` actions for a puck position.
std::vector<Eigen::Vector2d> policy_scripted_hit(const Eigen::Vector2d& start,
                                                 const Eigen::Vector2d& puck,
                                                 const ScriptedHitParams& params, long count);

class ScriptedHitPolicy : public Policy {
 public:
  // `noise` is the half-width of uniform per-component action noise (m/s).
  ScriptedHitPolicy(Eigen::Vector2d puck, ScriptedHitParams params, double noise,
                    std::uint64_t seed);

  ActionSpace space() const override { return ActionSpace::task; }
  int action_dim() const override { return 2; }
  std::vector<Vector> next_chunk(const Observation& obs, int chunk_size) override;
  std::optional<TaskGoal> goal() const override;

  const std::optional<ScriptedHitPlan>& plan() const { return plan_; }

 private:
  Eigen::Vector2d puck_;
  ScriptedHitParams params_;
  double noise_;
  std::mt19937_64 rng_;
  std::optional<ScriptedHitPlan> plan_;
  double start_z_ = 0.0;
  long index_ = 0;
};

// ---------------------------------------------------------------------------
// Chunked reach: each chunk is a proportional Cartesian plan toward the
// target, rolled out open loop from the end-effector position at chunk start.

struct ScriptedReachParams {
  Eigen::Vector2d target{0.0, 0.0};
  double gain = 2.0;        // 1/s
  double max_speed = 0.4;   // m/s
  double action_period = 1.0 / 15.0;
};

class ScriptedReachPolicy : public Policy {
 public:
  ScriptedReachPolicy(ScriptedReachParams params, double noise, std::uint64_t seed);

  ActionSpace space() const override { return ActionSpace::task; }
  int action_dim() const override { return 2; }
  std::vector<Vector> next_chunk(const Observation& obs, int chunk_size) override;
  std::optional<TaskGoal> goal() const override;

 private:
  ScriptedReachParams params_;
  double noise_;
  std::mt19937_64 rng_;
  double target_z_ = 0.0;
  bool have_z_ = false;
};

// ---------------------------------------------------------------------------
// I.i.d. uniform actions in [lower, upper].

class RandomPolicy : public Policy {
 public:
  RandomPolicy(Vector lower, Vector upper, std::uint64_t seed,
               ActionSpace space = ActionSpace::joint);

  ActionSpace space() const override { return space_; }
  int action_dim() const override { return static_cast<int>(lower_.size()); }
  std::vector<Vector> next_chunk(const Observation& obs, int chunk_size) override;

  Vector sample();

 private:
  Vector lower_;
  Vector upper_;
  std::mt19937_64 rng_;
  ActionSpace space_;
};

// policy_random: `count` draws from a freshly seeded generator.
std::vector<Vector> policy_random(const Vector& lower, const Vector& upper, std::uint64_t seed,
                                  long count);

// ---------------------------------------------------------------------------
// Replays a recorded stream chunk by chunk; the episode ends with the stream.

class ReplayPolicy : public Policy {
 public:
  explicit ReplayPolicy(ActionStream stream);

  ActionSpace space() const override { return stream_.space; }
  int action_dim() const override { return stream_.dim; }
  std::vector<Vector> next_chunk(const Observation& obs, int chunk_size) override;
  std::optional<TaskGoal> goal() const override { return stream_.goal; }

 private:
  ActionStream stream_;
  std::size_t next_ = 0;
};

std::unique_ptr<ReplayPolicy> policy_replay(const std::filesystem::path& path);

}  // namespace safelayer
