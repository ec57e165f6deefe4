#pragma once

#include <functional>
#include <string>
#include <vector>

#include "safelayer/kinematics.hpp"
#include "safelayer/types.hpp"

namespace safelayer {

// Oriented bounding box: center and rotation in the base frame, full side
// lengths in the box frame.
struct OrientedBBox {
  Vector3 center = Vector3::Zero();
  Matrix3 rotation = Matrix3::Identity();
  Vector3 extents = Vector3::Ones();

  double volume() const { return extents.prod(); }
  void validate() const;
  bool operator==(const OrientedBBox&) const = default;
};

// Sphere-to-box proximity. `closest` is expressed in the box frame,
// `gradient` is d(distance)/d(center) in the base frame.
struct ObbDistance {
  double distance = 0.0;
  Vector3 closest = Vector3::Zero();
  Vector3 gradient = Vector3::Zero();
};

// Sphere centers closer than this to the box center are degenerate.
inline constexpr double kObbCenterEpsilon = 1e-6;

ObbDistance obb_distance(const Vector3& center_base, double radius, const OrientedBBox& box);

struct ConstraintEvaluation {
  Vector g;
  Matrix jacobian;
};

// A block of k differentiable inequality constraints g(q) <= 0 with an
// analytic k x n Jacobian.
class ConstraintBlock {
 public:
  using Evaluator = std::function<void(const Vector& q, Eigen::Ref<Vector> g,
                                       Eigen::Ref<Matrix> jacobian)>;

  ConstraintBlock(std::string kind, std::string label, int rows, int dof, Evaluator evaluator);

  const std::string& kind() const { return kind_; }
  const std::string& label() const { return label_; }
  int rows() const { return rows_; }
  int dof() const { return dof_; }

  ConstraintEvaluation evaluate(const Vector& q) const;
  // Writes into caller-owned storage of shape (rows, 1) and (rows, dof).
  void evaluate_into(const Vector& q, Eigen::Ref<Vector> g, Eigen::Ref<Matrix> jacobian) const;

 private:
  std::string kind_;
  std::string label_;
  int rows_;
  int dof_;
  Evaluator evaluator_;
};

// Ordered stack of blocks. Row ordering is fixed at construction.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<ConstraintBlock> blocks, int dof = -1);

  int rows() const { return rows_; }
  int dof() const { return dof_; }
  std::span<const ConstraintBlock> blocks() const { return blocks_; }
  int row_offset(std::size_t block) const { return offsets_[block]; }
  bool empty() const { return blocks_.empty(); }

  ConstraintEvaluation evaluate(const Vector& q) const;
  // One task per block; bitwise identical to evaluate().
  ConstraintEvaluation evaluate_parallel(const Vector& q) const;

 private:
  std::vector<ConstraintBlock> blocks_;
  std::vector<int> offsets_;
  int rows_ = 0;
  int dof_ = 0;
};

// g_i = ((q_i - center_i) / half_range_i)^2 - 1.
ConstraintBlock joint_limit_block(const Vector& q_min, const Vector& q_max,
                                  std::string label = "joint_limits");

// Six rows per sphere: (x_min - x + r) for x, y, z, then (x - x_max + r).
ConstraintBlock workspace_block(const SerialChain& chain, const SphereCover& cover,
                                const Vector3& x_min, const Vector3& x_max,
                                std::string label = "workspace");

// One row per sphere: g = -d_bb. Degenerate sphere centers saturate at g = 0
// with a zero Jacobian row.
ConstraintBlock obb_block(const SerialChain& chain, const SphereCover& cover,
                          const OrientedBBox& box, std::string label = "obb");

struct AirHockeyTable {
  double z_low = 0.0;
  double z_high = 0.0;
  double x_low = 0.0;
  double y_low = 0.0;
  double y_high = 0.0;
  double z_wrist_low = 0.0;
  double z_elbow_low = 0.0;
};

struct AirHockeyAttachments {
  Attachment ee;
  Attachment wrist;
  Attachment elbow;
};

// Table surface (2 rows), link constraints (5 rows) and joint limits (n rows).
ConstraintSet airhockey_blocks(const SerialChain& chain, const AirHockeyAttachments& points,
                               const AirHockeyTable& table);

ConstraintSet stack(std::vector<ConstraintBlock> blocks);

}  // namespace safelayer
