#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "logging.hpp"
#include "safelayer/geometry.hpp"

namespace safelayer {

namespace {

using Vector2 = Eigen::Vector2d;

constexpr std::size_t kMaxExtremePoints = 16;

struct Candidate {
  Matrix3 axes = Matrix3::Identity();  // columns are the box axes
  Vector3 lo = Vector3::Zero();
  Vector3 hi = Vector3::Zero();
  double volume = std::numeric_limits<double>::infinity();
};

Candidate box_for_axes(const std::vector<Vector3>& pts, const Matrix3& axes) {
  Candidate c;
  c.axes = axes;
  c.lo.setConstant(std::numeric_limits<double>::infinity());
  c.hi.setConstant(-std::numeric_limits<double>::infinity());
  for (const auto& p : pts) {
    const Vector3 y = axes.transpose() * p;
    c.lo = c.lo.cwiseMin(y);
    c.hi = c.hi.cwiseMax(y);
  }
  c.volume = (c.hi - c.lo).cwiseMax(kMinBoxExtent).prod();
  return c;
}

double cross2(const Vector2& o, const Vector2& a, const Vector2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; collinear points are dropped.
std::vector<Vector2> convex_hull(std::vector<Vector2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vector2& a, const Vector2& b) {
    return std::tie(a.x(), a.y()) < std::tie(b.x(), b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vector2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Direction of the first side of the minimum-area enclosing rectangle. One
// side of that rectangle is collinear with a hull edge.
Vector2 min_area_direction(const std::vector<Vector2>& hull) {
  if (hull.size() < 2) return Vector2::UnitX();
  Vector2 best_dir = (hull[1] - hull[0]).normalized();
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vector2 edge = hull[(i + 1) % hull.size()] - hull[i];
    if (edge.norm() == 0.0) continue;
    const Vector2 e = edge.normalized();
    const Vector2 n(-e.y(), e.x());
    double lo_e = std::numeric_limits<double>::infinity(), hi_e = -lo_e;
    double lo_n = lo_e, hi_n = -lo_e;
    for (const auto& p : hull) {
      lo_e = std::min(lo_e, p.dot(e));
      hi_e = std::max(hi_e, p.dot(e));
      lo_n = std::min(lo_n, p.dot(n));
      hi_n = std::max(hi_n, p.dot(n));
    }
    const double area = (hi_e - lo_e) * (hi_n - lo_n);
    if (area < best_area) {
      best_area = area;
      best_dir = e;
    }
  }
  return best_dir;
}

Candidate box_for_up(const std::vector<Vector3>& pts, const Vector3& up_in) {
  const Vector3 up = up_in.normalized();
  Eigen::Index largest;
  up.cwiseAbs().maxCoeff(&largest);
  const Vector3 helper = largest == 0 ? Vector3::UnitY() : Vector3::UnitX();
  const Vector3 b1 = up.cross(helper).normalized();
  const Vector3 b2 = up.cross(b1);
  std::vector<Vector2> planar;
  planar.reserve(pts.size());
  for (const auto& p : pts) planar.emplace_back(p.dot(b1), p.dot(b2));
  const Vector2 e = min_area_direction(convex_hull(std::move(planar)));
  Matrix3 axes;
  axes.col(0) = (e.x() * b1 + e.y() * b2).normalized();
  axes.col(2) = up;
  axes.col(1) = up.cross(axes.col(0));
  return box_for_axes(pts, axes);
}

// Points inside the convex hull of the extreme set cannot be hull vertices of
// the whole cloud, so every projected hull is unchanged without them. Facets
// of that small hull come from brute force over triples.
std::vector<Vector3> prune_interior(const std::vector<Vector3>& pts, const std::vector<std::size_t>& extreme,
                                    double scale) {
  struct Plane {
    Vector3 n;
    double d;
  };
  const double tol = 1e-12 * scale;
  std::vector<Plane> facets;
  bool solid = false;
  for (std::size_t a = 0; a < extreme.size(); ++a) {
    for (std::size_t b = a + 1; b < extreme.size(); ++b) {
      for (std::size_t c = b + 1; c < extreme.size(); ++c) {
        const Vector3& pa = pts[extreme[a]];
        Vector3 n = (pts[extreme[b]] - pa).cross(pts[extreme[c]] - pa);
        if (n.norm() < 1e-9 * scale * scale) continue;
        n.normalize();
        const double d = n.dot(pa);
        double lo = 0.0, hi = 0.0;
        for (std::size_t e : extreme) {
          lo = std::min(lo, n.dot(pts[e]) - d);
          hi = std::max(hi, n.dot(pts[e]) - d);
        }
        if (hi - lo > 1e-9 * scale) solid = true;
        if (hi <= tol && lo < -tol) facets.push_back({n, d});
        if (lo >= -tol && hi > tol) facets.push_back({-n, -d});
      }
    }
  }
  if (!solid || facets.empty()) return pts;
  std::vector<Vector3> kept;
  for (std::size_t e : extreme) kept.push_back(pts[e]);
  for (const auto& p : pts) {
    const bool inside = std::all_of(facets.begin(), facets.end(),
                                    [&](const Plane& f) { return f.n.dot(p) - f.d <= tol; });
    if (!inside) kept.push_back(p);
  }
  return kept;
}

bool lexicographic_less(const Vector3& a, const Vector3& b) {
  return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
}

}  // namespace

OrientedBBox fit_obb(const std::vector<Vector3>& input) {
  if (input.size() < 4) {
    throw DomainError(fmt::format("fit_obb needs at least 4 points, got {}", input.size()));
  }
  std::vector<Vector3> pts = input;
  for (const auto& p : pts) {
    if (!p.allFinite()) throw DomainError("fit_obb: non-finite point");
  }
  std::sort(pts.begin(), pts.end(), lexicographic_less);

  Vector3 centroid = Vector3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Matrix3 cov = Matrix3::Zero();
  for (const auto& p : pts) cov += (p - centroid) * (p - centroid).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov);
  Matrix3 pca = eig.eigenvectors();
  if (pca.determinant() < 0.0) pca.col(2) *= -1.0;

  Candidate best = box_for_axes(pts, pca);
  auto consider = [&](const Candidate& c) {
    if (c.volume < best.volume) best = c;
  };

  std::vector<Vector3> ups = {Vector3::UnitZ(), pca.col(0), pca.col(1), pca.col(2)};

  // Extreme points along directions fixed in the principal frame.
  std::vector<std::size_t> extreme;
  for (int dx = -1; dx <= 1 && extreme.size() < kMaxExtremePoints; ++dx) {
    for (int dy = -1; dy <= 1 && extreme.size() < kMaxExtremePoints; ++dy) {
      for (int dz = -1; dz <= 1 && extreme.size() < kMaxExtremePoints; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Vector3 dir = pca * Vector3(dx, dy, dz).normalized();
        std::size_t arg = 0;
        double best_proj = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double proj = pts[i].dot(dir);
          if (proj > best_proj) {
            best_proj = proj;
            arg = i;
          }
        }
        if (std::find(extreme.begin(), extreme.end(), arg) == extreme.end()) extreme.push_back(arg);
      }
    }
  }
  const double scale = std::max(1e-12, std::sqrt(cov.trace()));
  for (std::size_t a = 0; a < extreme.size(); ++a) {
    for (std::size_t b = a + 1; b < extreme.size(); ++b) {
      for (std::size_t c = b + 1; c < extreme.size(); ++c) {
        const Vector3& pa = pts[extreme[a]];
        Vector3 n = (pts[extreme[b]] - pa).cross(pts[extreme[c]] - pa);
        if (n.norm() < 1e-9 * scale * scale) continue;
        n.normalize();
        const bool duplicate = std::any_of(ups.begin(), ups.end(), [&](const Vector3& u) {
          return std::abs(std::abs(u.dot(n)) - 1.0) < 1e-12;
        });
        if (!duplicate) ups.push_back(n);
      }
    }
  }
  const std::vector<Vector3> hull = prune_interior(pts, extreme, scale);
  for (const auto& up : ups) consider(box_for_up(hull, up));
  // Re-seed from the winner's own axes.
  for (int round = 0; round < 2; ++round) {
    const Matrix3 axes = best.axes;
    for (int i = 0; i < 3; ++i) consider(box_for_up(hull, axes.col(i)));
  }

  Vector3 extents = best.hi - best.lo;
  if ((extents.array() < kMinBoxExtent).any()) {
    detail::warn_throttled("fit_obb_degenerate",
                           fmt::format("fit_obb: degenerate point set (extents {:.3g} {:.3g} {:.3g} m); "
                                       "flooring to {} m",
                                       extents.x(), extents.y(), extents.z(), kMinBoxExtent));
    extents = extents.cwiseMax(kMinBoxExtent);
  }
  OrientedBBox box;
  box.rotation = best.axes;
  if (box.rotation.determinant() < 0.0) box.rotation.col(2) *= -1.0;
  box.center = best.axes * (0.5 * (best.lo + best.hi));
  box.extents = extents;
  return box;
}

}  // namespace safelayer
