#pragma once

#include <span>
#include <vector>

#include "safelayer/types.hpp"

namespace safelayer {

// Revolute joint: a fixed parent-to-joint transform followed by a rotation
// about `axis` (unit vector in the joint frame).
struct RevoluteJoint {
  Transform origin = Transform::Identity();
  Vector3 axis = Vector3::UnitZ();
  double lower = -M_PI;
  double upper = M_PI;
};

// Point rigidly attached to a link. Link 0 is the base, link i (1..n) is the
// frame after joint i.
struct Attachment {
  int link_index = 0;
  Vector3 local_offset = Vector3::Zero();
};

struct Sphere {
  Attachment attachment;
  double radius = 0.0;
};

struct SphereCover {
  std::vector<Sphere> spheres;

  std::size_t size() const { return spheres.size(); }
  bool empty() const { return spheres.empty(); }
};

struct PlacedSphere {
  Vector3 center;
  double radius;
};

struct JointState {
  Vector q;
  Vector qdot;
  double t = 0.0;

  static JointState at_rest(const Vector& q, double t = 0.0) {
    return JointState{q, Vector::Zero(q.size()), t};
  }
};

class ChainPose;

// Serial chain of revolute joints. Immutable after construction; the
// constructor enforces unit axes, rigid transforms and q_min < q_max.
class SerialChain {
 public:
  SerialChain() = default;  // empty chain at the identity base pose
  SerialChain(Transform base_pose, std::vector<RevoluteJoint> joints);

  int dof() const { return static_cast<int>(joints_.size()); }
  const Transform& base_pose() const { return base_pose_; }
  std::span<const RevoluteJoint> joints() const { return joints_; }
  Vector lower_limits() const;
  Vector upper_limits() const;

  // Throws DomainError for an attachment outside [0, dof].
  void check_attachment(const Attachment& a) const;
  void check_configuration(const Vector& q) const;

  // All link frames at `q`, computed once for repeated point queries.
  ChainPose pose(const Vector& q) const;

 private:
  Transform base_pose_ = Transform::Identity();
  std::vector<RevoluteJoint> joints_;
};

// Link frames of a chain evaluated at one configuration.
class ChainPose {
 public:
  const Transform& frame(int link_index) const { return frames_[link_index]; }
  int dof() const { return static_cast<int>(frames_.size()) - 1; }

  Vector3 point(const Attachment& a) const;
  // 3 x dof; columns of joints distal to the attachment link are zero.
  Matrix jacobian(const Attachment& a) const;

 private:
  friend class SerialChain;
  std::vector<Transform> frames_;        // n + 1 link frames
  std::vector<Vector3> joint_axes_;      // world axis of joint i (0-based)
  std::vector<Vector3> joint_origins_;   // world origin of joint i (0-based)
};

Vector3 forward_point(const SerialChain& chain, const Vector& q, const Attachment& a);

Matrix point_jacobian(const SerialChain& chain, const Vector& q, const Attachment& a);

std::vector<PlacedSphere> sphere_positions(const SerialChain& chain, const Vector& q,
                                           const SphereCover& cover);

// qdot = J^T (J J^T + damping^2 I)^-1 v. With zero damping the rows of J
// must be linearly independent, otherwise RankDeficiencyError.
Vector damped_pinv(const Matrix& jacobian, const Vector& v, double damping);

// Task velocity of dimension 2 uses the x-y rows of the point Jacobian,
// dimension 3 the full point Jacobian.
Vector damped_pinv_ik(const SerialChain& chain, const Vector& q, const Vector& v_task,
                      const Attachment& a, double damping);

// Explicit Euler step of the velocity-controlled plant. No joint-limit
// clamping.
JointState integrate(const JointState& state, const Vector& qdot_cmd, double dt);

}  // namespace safelayer
