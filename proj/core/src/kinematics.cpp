#include "safelayer/kinematics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <fmt/format.h>

namespace safelayer {

bool is_rotation(const Matrix3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

SerialChain::SerialChain(Transform base_pose, std::vector<RevoluteJoint> joints)
    : base_pose_(base_pose), joints_(std::move(joints)) {
  if (!is_rotation(base_pose_.linear()) || !base_pose_.translation().allFinite()) {
    throw DomainError("base pose is not a rigid transform");
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const auto& j = joints_[i];
    if (std::abs(j.axis.norm() - 1.0) > 1e-12) {
      throw DomainError(fmt::format("joint {} axis is not unit length (norm {})", i, j.axis.norm()));
    }
    if (!is_rotation(j.origin.linear()) || !j.origin.translation().allFinite()) {
      throw DomainError(fmt::format("joint {} origin is not a rigid transform", i));
    }
    if (!(j.lower < j.upper)) {
      throw DomainError(fmt::format("joint {} limits must satisfy lower < upper", i));
    }
  }
}

Vector SerialChain::lower_limits() const {
  Vector v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = joints_[i].lower;
  return v;
}

Vector SerialChain::upper_limits() const {
  Vector v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = joints_[i].upper;
  return v;
}

void SerialChain::check_attachment(const Attachment& a) const {
  if (a.link_index < 0 || a.link_index > dof()) {
    throw DomainError(fmt::format("attachment link index {} outside [0, {}]", a.link_index, dof()));
  }
  if (!a.local_offset.allFinite()) throw DomainError("attachment offset is not finite");
}

void SerialChain::check_configuration(const Vector& q) const {
  if (q.size() != dof()) {
    throw DomainError(fmt::format("configuration has {} entries, chain has {} joints", q.size(), dof()));
  }
  if (!q.allFinite()) throw DomainError("configuration is not finite");
}

ChainPose SerialChain::pose(const Vector& q) const {
  check_configuration(q);
  ChainPose p;
  const int n = dof();
  p.frames_.reserve(n + 1);
  p.joint_axes_.reserve(n);
  p.joint_origins_.reserve(n);
  p.frames_.push_back(base_pose_);
  for (int i = 0; i < n; ++i) {
    const auto& j = joints_[i];
    Transform joint_frame = p.frames_.back() * j.origin;
    p.joint_axes_.push_back(joint_frame.linear() * j.axis);
    p.joint_origins_.push_back(joint_frame.translation());
    Transform link = joint_frame;
    link.linear() = joint_frame.linear() * Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    p.frames_.push_back(link);
  }
  return p;
}

Vector3 ChainPose::point(const Attachment& a) const {
  return frames_[a.link_index] * a.local_offset;
}

Matrix ChainPose::jacobian(const Attachment& a) const {
  const int n = dof();
  Matrix jac = Matrix::Zero(3, n);
  const Vector3 p = point(a);
  for (int i = 0; i < a.link_index; ++i) {
    jac.col(i) = joint_axes_[i].cross(p - joint_origins_[i]);
  }
  return jac;
}

Vector3 forward_point(const SerialChain& chain, const Vector& q, const Attachment& a) {
  chain.check_attachment(a);
  return chain.pose(q).point(a);
}

Matrix point_jacobian(const SerialChain& chain, const Vector& q, const Attachment& a) {
  chain.check_attachment(a);
  return chain.pose(q).jacobian(a);
}

std::vector<PlacedSphere> sphere_positions(const SerialChain& chain, const Vector& q,
                                           const SphereCover& cover) {
  for (const auto& s : cover.spheres) chain.check_attachment(s.attachment);
  const ChainPose pose = chain.pose(q);
  std::vector<PlacedSphere> out;
  out.reserve(cover.size());
  for (const auto& s : cover.spheres) out.push_back({pose.point(s.attachment), s.radius});
  return out;
}

Vector damped_pinv(const Matrix& jacobian, const Vector& v, double damping) {
  if (jacobian.rows() != v.size()) {
    throw DomainError(fmt::format("task velocity has {} entries, Jacobian has {} rows", v.size(),
                                  jacobian.rows()));
  }
  if (!(damping >= 0.0) || !std::isfinite(damping)) throw DomainError("damping must be >= 0");
  const int m = static_cast<int>(jacobian.rows());
  if (damping == 0.0) {
    Eigen::JacobiSVD<Matrix> svd(jacobian);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const bool full_rank =
        sv.size() == m && smax > 0.0 && sv[sv.size() - 1] > 1e-12 * smax;
    if (!full_rank) {
      throw RankDeficiencyError(
          "task Jacobian is rank deficient; use a positive damping for the pseudoinverse");
    }
  }
  Matrix jjt = jacobian * jacobian.transpose();
  jjt.diagonal().array() += damping * damping;
  return jacobian.transpose() * jjt.ldlt().solve(v);
}

Vector damped_pinv_ik(const SerialChain& chain, const Vector& q, const Vector& v_task,
                      const Attachment& a, double damping) {
  if (v_task.size() != 2 && v_task.size() != 3) {
    throw DomainError("task velocity must have 2 (planar) or 3 entries");
  }
  const Matrix jac = point_jacobian(chain, q, a);
  return damped_pinv(jac.topRows(v_task.size()), v_task, damping);
}

JointState integrate(const JointState& state, const Vector& qdot_cmd, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("integration step must be > 0");
  if (qdot_cmd.size() != state.q.size()) throw DomainError("velocity command size mismatch");
  if (!qdot_cmd.allFinite() || !state.q.allFinite()) {
    throw DomainError("non-finite state or command");
  }
  return JointState{state.q + qdot_cmd * dt, qdot_cmd, state.t + dt};
}

}  // namespace safelayer
