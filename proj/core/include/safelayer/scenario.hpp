#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "safelayer/atacom.hpp"
#include "safelayer/constraints.hpp"
#include "safelayer/kinematics.hpp"
#include "safelayer/policy.hpp"

namespace safelayer {

struct NamedPoint {
  std::string name;
  Attachment attachment;
};

// Constraint declarations, expanded into blocks by build_constraints().
struct JointLimitDecl {
  std::string label = "joint_limits";
};
struct WorkspaceDecl {
  Vector3 min = Vector3::Zero();
  Vector3 max = Vector3::Zero();
  std::string label = "workspace";
};
struct ObbDecl {
  OrientedBBox box;
  std::string label = "obb";
};
struct AirHockeyDecl {
  AirHockeyTable table;
  std::string ee = "ee";
  std::string wrist = "wrist";
  std::string elbow = "elbow";
};
using ConstraintDecl = std::variant<JointLimitDecl, WorkspaceDecl, ObbDecl, AirHockeyDecl>;

struct ZeroPolicySpec {
  ActionSpace space = ActionSpace::joint;
};
struct RandomPolicySpec {
  ActionSpace space = ActionSpace::joint;
  Vector lower;  // per second (rad or m, depending on the space)
  Vector upper;
};
// Puck drawn uniformly in [puck_min, puck_max] per episode; noise is a
// fraction of the hit speed.
struct ScriptedHitSpec {
  ScriptedHitParams params;
  Eigen::Vector2d puck_min{0.6, -0.2};
  Eigen::Vector2d puck_max{0.7, 0.2};
  double noise_fraction = 0.0;
};
// Target drawn uniformly in [target_min, target_max] per episode.
struct ScriptedReachSpec {
  ScriptedReachParams params;
  Eigen::Vector2d target_min = Eigen::Vector2d::Zero();
  Eigen::Vector2d target_max = Eigen::Vector2d::Zero();
  double noise_mps = 0.0;
};
struct ReplaySpec {
  std::filesystem::path path;
};

struct PolicySpec {
  std::variant<ZeroPolicySpec, RandomPolicySpec, ScriptedHitSpec, ScriptedReachSpec, ReplaySpec>
      params;
  std::uint64_t seed = 0;  // mixed with the episode seed
};

std::string policy_kind(const PolicySpec& spec);

struct SuccessSpec {
  enum class Kind { none, reach, strike };
  Kind kind = Kind::none;
  double tolerance_m = 0.02;          // reach: final end-effector distance
  double speed_fraction = 0.95;       // strike: required fraction of the hit speed
  double lateral_tolerance_m = 0.02;  // strike: offset from the strike line at crossing
  bool require_safe = true;           // success also needs g <= tolerance throughout
};

struct Scenario {
  std::string name;
  SerialChain chain;
  std::vector<NamedPoint> points;
  SphereCover cover;
  std::vector<ConstraintDecl> constraints;
  Vector initial_q;
  PolicySpec policy;
  std::string ik_point = "ee";
  double ik_damping = 0.05;
  double policy_rate_hz = 15.0;
  double filter_rate_hz = 60.0;
  int chunk_size = 32;
  double duration_s = 5.0;
  FilterConfig filter;
  SuccessSpec success;

  // filter_rate / policy_rate; throws DomainError unless an integer >= 1.
  int substeps() const;
  long total_substeps() const;
  void validate() const;
  const Attachment& point(std::string_view name) const;
  ConstraintSet build_constraints() const;
};

// YAML. Relative paths inside (OBB files, replay streams) resolve against
// the directory of the config file. Errors carry path and line.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text, const std::string& origin,
                        const std::filesystem::path& base_dir);

// Effective config with every default spelled out and OBB files expanded.
std::string dump_scenario(const Scenario& sc);
void save_scenario(const Scenario& sc, const std::filesystem::path& path);

Matrix3 rotation_from_rpy(double roll, double pitch, double yaw);

}  // namespace safelayer
