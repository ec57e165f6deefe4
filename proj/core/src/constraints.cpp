#include "safelayer/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <fmt/format.h>

#include "logging.hpp"

namespace safelayer {

void OrientedBBox::validate() const {
  if (!center.allFinite()) throw DomainError("box center is not finite");
  if (!(extents.array() > 0.0).all() || !extents.allFinite()) {
    throw DomainError("box extents must be positive");
  }
  if (!is_rotation(rotation)) throw DomainError("box rotation is not a proper rotation");
}

ObbDistance obb_distance(const Vector3& center_base, double radius, const OrientedBBox& box) {
  const Vector3 x = box.rotation.transpose() * (center_base - box.center);
  const double norm = x.norm();
  if (norm < kObbCenterEpsilon) {
    throw DegenerateCenterError("sphere center coincides with the box center");
  }
  const double alpha = 1.0 - radius / norm;
  if (alpha <= 0.0) {
    throw DegenerateCenterError(
        fmt::format("sphere center {:.3g} m from box center is within its radius {:.3g} m", norm,
                    radius));
  }
  const Vector3 half = 0.5 * box.extents;
  const Vector3 shrunk = alpha * x;
  const Vector3 closest = shrunk.cwiseMax(-half).cwiseMin(half);
  const Vector3 diff = shrunk - closest;

  ObbDistance out;
  out.distance = diff.norm();
  out.closest = closest;
  if (out.distance > 0.0) {
    const Vector3 u = diff / out.distance;
    // d(alpha x)/dx = alpha I + r x x^T / |x|^3 (symmetric).
    const Vector3 grad_bb = alpha * u + (radius / (norm * norm * norm)) * x * x.dot(u);
    out.gradient = box.rotation * grad_bb;
  }
  return out;
}

ConstraintBlock::ConstraintBlock(std::string kind, std::string label, int rows, int dof,
                                 Evaluator evaluator)
    : kind_(std::move(kind)), label_(std::move(label)), rows_(rows), dof_(dof),
      evaluator_(std::move(evaluator)) {
  if (rows_ < 0 || dof_ < 0) throw DomainError("constraint block dimensions must be >= 0");
  if (!evaluator_) throw DomainError("constraint block needs an evaluator");
}

ConstraintEvaluation ConstraintBlock::evaluate(const Vector& q) const {
  ConstraintEvaluation e{Vector::Zero(rows_), Matrix::Zero(rows_, dof_)};
  evaluate_into(q, e.g, e.jacobian);
  return e;
}

void ConstraintBlock::evaluate_into(const Vector& q, Eigen::Ref<Vector> g,
                                    Eigen::Ref<Matrix> jacobian) const {
  if (q.size() != dof_) {
    throw DomainError(fmt::format("block '{}' expects {} joints, got {}", label_, dof_, q.size()));
  }
  evaluator_(q, g, jacobian);
}

ConstraintSet::ConstraintSet(std::vector<ConstraintBlock> blocks, int dof)
    : blocks_(std::move(blocks)) {
  dof_ = dof;
  for (const auto& b : blocks_) {
    if (dof_ < 0) dof_ = b.dof();
    if (b.dof() != dof_) {
      throw DomainError(fmt::format("block '{}' has {} joints, expected {}", b.label(), b.dof(), dof_));
    }
    offsets_.push_back(rows_);
    rows_ += b.rows();
  }
  if (dof_ < 0) dof_ = 0;
}

ConstraintEvaluation ConstraintSet::evaluate(const Vector& q) const {
  ConstraintEvaluation e{Vector::Zero(rows_), Matrix::Zero(rows_, dof_)};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    b.evaluate_into(q, e.g.segment(offsets_[i], b.rows()),
                    e.jacobian.middleRows(offsets_[i], b.rows()));
  }
  return e;
}

ConstraintEvaluation ConstraintSet::evaluate_parallel(const Vector& q) const {
  ConstraintEvaluation e{Vector::Zero(rows_), Matrix::Zero(rows_, dof_)};
  std::vector<std::future<void>> tasks;
  tasks.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    tasks.push_back(std::async(std::launch::async, [&, i] {
      const auto& b = blocks_[i];
      b.evaluate_into(q, e.g.segment(offsets_[i], b.rows()),
                      e.jacobian.middleRows(offsets_[i], b.rows()));
    }));
  }
  for (auto& t : tasks) t.get();
  return e;
}

ConstraintBlock joint_limit_block(const Vector& q_min, const Vector& q_max, std::string label) {
  if (q_min.size() != q_max.size()) throw DomainError("joint limit vectors differ in size");
  if (!((q_max - q_min).array() > 0.0).all()) throw DomainError("joint limits need q_min < q_max");
  const Vector center = 0.5 * (q_max + q_min);
  const Vector half = 0.5 * (q_max - q_min);
  const int n = static_cast<int>(q_min.size());
  return ConstraintBlock(
      "joint_limits", std::move(label), n, n,
      [center, half](const Vector& q, Eigen::Ref<Vector> g, Eigen::Ref<Matrix> jac) {
        const Vector u = (q - center).cwiseQuotient(half);
        g = u.cwiseProduct(u).array() - 1.0;
        jac.setZero();
        jac.diagonal() = 2.0 * u.cwiseQuotient(half);
      });
}

ConstraintBlock workspace_block(const SerialChain& chain, const SphereCover& cover,
                                const Vector3& x_min, const Vector3& x_max, std::string label) {
  if (!((x_max - x_min).array() > 0.0).all()) throw DomainError("workspace needs x_min < x_max");
  for (const auto& s : cover.spheres) {
    chain.check_attachment(s.attachment);
    if (!(s.radius > 0.0)) throw DomainError("sphere radii must be positive");
  }
  const int k = 6 * static_cast<int>(cover.size());
  return ConstraintBlock(
      "workspace", std::move(label), k, chain.dof(),
      [chain, cover, x_min, x_max](const Vector& q, Eigen::Ref<Vector> g, Eigen::Ref<Matrix> jac) {
        const ChainPose pose = chain.pose(q);
        for (std::size_t i = 0; i < cover.size(); ++i) {
          const auto& s = cover.spheres[i];
          const Vector3 x = pose.point(s.attachment);
          const Matrix jp = pose.jacobian(s.attachment);
          const int row = 6 * static_cast<int>(i);
          g.segment<3>(row) = x_min - x + Vector3::Constant(s.radius);
          g.segment<3>(row + 3) = x - x_max + Vector3::Constant(s.radius);
          jac.middleRows(row, 3) = -jp;
          jac.middleRows(row + 3, 3) = jp;
        }
      });
}

ConstraintBlock obb_block(const SerialChain& chain, const SphereCover& cover,
                          const OrientedBBox& box, std::string label) {
  box.validate();
  for (const auto& s : cover.spheres) {
    chain.check_attachment(s.attachment);
    if (!(s.radius > 0.0)) throw DomainError("sphere radii must be positive");
  }
  const int k = static_cast<int>(cover.size());
  return ConstraintBlock(
      "obb", label, k, chain.dof(),
      [chain, cover, box, label](const Vector& q, Eigen::Ref<Vector> g, Eigen::Ref<Matrix> jac) {
        const ChainPose pose = chain.pose(q);
        for (int i = 0; i < static_cast<int>(cover.size()); ++i) {
          const auto& s = cover.spheres[i];
          const Vector3 x = pose.point(s.attachment);
          try {
            const ObbDistance d = obb_distance(x, s.radius, box);
            g[i] = -d.distance;
            jac.row(i) = -d.gradient.transpose() * pose.jacobian(s.attachment);
          } catch (const DegenerateCenterError& e) {
            g[i] = 0.0;
            jac.row(i).setZero();
            detail::warn_throttled("obb_degenerate:" + label,
                                   fmt::format("box '{}', sphere {}: {}; row saturated at g = 0",
                                               label, i, e.what()));
          }
        }
      });
}

namespace {

ConstraintBlock height_rows(const SerialChain& chain, std::string kind, std::string label,
                            std::vector<Attachment> points, std::vector<int> axes,
                            std::vector<double> signs, std::vector<double> bounds) {
  for (const auto& a : points) chain.check_attachment(a);
  const int k = static_cast<int>(points.size());
  // Row i: sign_i * (x_{axis_i} - bound_i) <= 0.
  return ConstraintBlock(
      std::move(kind), std::move(label), k, chain.dof(),
      [chain, points, axes, signs, bounds](const Vector& q, Eigen::Ref<Vector> g,
                                           Eigen::Ref<Matrix> jac) {
        const ChainPose pose = chain.pose(q);
        for (std::size_t i = 0; i < points.size(); ++i) {
          const Vector3 x = pose.point(points[i]);
          g[i] = signs[i] * (x[axes[i]] - bounds[i]);
          jac.row(i) = signs[i] * pose.jacobian(points[i]).row(axes[i]);
        }
      });
}

}  // namespace

ConstraintSet airhockey_blocks(const SerialChain& chain, const AirHockeyAttachments& p,
                               const AirHockeyTable& t) {
  const double values[] = {t.z_low, t.z_high, t.x_low, t.y_low, t.y_high, t.z_wrist_low,
                           t.z_elbow_low};
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("table parameters must be finite");
  }
  if (!(t.z_low < t.z_high)) throw DomainError("table needs z_low < z_high");
  if (!(t.y_low < t.y_high)) throw DomainError("table needs y_low < y_high");

  std::vector<ConstraintBlock> blocks;
  // g1 = -z_ee + z_low, g2 = z_ee - z_high
  blocks.push_back(height_rows(chain, "table_surface", "table_surface", {p.ee, p.ee}, {2, 2},
                               {-1.0, 1.0}, {t.z_low, t.z_high}));
  // g3 = -x_ee + x_low, g4 = -y_ee + y_low, g5 = y_ee - y_high,
  // g6 = -z_wrist + z_wrist_low, g7 = -z_elbow + z_elbow_low
  blocks.push_back(height_rows(chain, "link", "link", {p.ee, p.ee, p.ee, p.wrist, p.elbow},
                               {0, 1, 1, 2, 2}, {-1.0, -1.0, 1.0, -1.0, -1.0},
                               {t.x_low, t.y_low, t.y_high, t.z_wrist_low, t.z_elbow_low}));
  blocks.push_back(joint_limit_block(chain.lower_limits(), chain.upper_limits()));
  return ConstraintSet(std::move(blocks), chain.dof());
}

ConstraintSet stack(std::vector<ConstraintBlock> blocks) {
  return ConstraintSet(std::move(blocks));
}

}  // namespace safelayer
