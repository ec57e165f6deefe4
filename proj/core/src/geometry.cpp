#include "safelayer/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace safelayer {

namespace {

bool lexicographic_less(const Vector3& a, const Vector3& b) {
  return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
}

}  // namespace

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("camera focal lengths must be > 0");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw DomainError("principal point not finite");
  if (!is_rotation(pose.linear()) || !pose.translation().allFinite()) {
    throw DomainError("camera pose is not a rigid transform");
  }
}

void MaskedDepth::validate() const {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width < 0 || height < 0 || mask.size() != n || depth.size() != n) {
    throw DomainError("mask and depth rasters must both be width x height");
  }
  for (double z : depth) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw DomainError("depth values must be finite and >= 0");
  }
}

void LabeledView::validate() const {
  camera.validate();
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width < 0 || height < 0 || depth.size() != n || labels.size() != n) {
    throw DomainError("depth and label rasters must both be width x height");
  }
}

MaskedDepth LabeledView::mask_for(int label) const {
  MaskedDepth md{width, height, {}, depth};
  md.mask.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) md.mask[i] = labels[i] == label ? 1 : 0;
  return md;
}

std::vector<int> LabeledView::instance_labels() const {
  std::set<int> s;
  for (int l : labels) {
    if (l != 0) s.insert(l);
  }
  return {s.begin(), s.end()};
}

std::vector<Vector3> lift_mask(const CameraModel& cam, const MaskedDepth& md) {
  cam.validate();
  md.validate();
  std::vector<Vector3> out;
  for (int v = 0; v < md.height; ++v) {
    for (int u = 0; u < md.width; ++u) {
      const auto idx = static_cast<std::size_t>(v) * md.width + u;
      const double z = md.depth[idx];
      if (!md.mask[idx] || z <= 0.0) continue;
      const Vector3 x_cam((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
      out.push_back(cam.pose * x_cam);
    }
  }
  return out;
}

std::optional<PixelDepth> project_point(const CameraModel& cam, const Vector3& point_base) {
  const Vector3 x = cam.pose.inverse(Eigen::Isometry) * point_base;
  if (!(x.z() > 0.0)) return std::nullopt;
  return PixelDepth{cam.fx * x.x() / x.z() + cam.cx, cam.fy * x.y() / x.z() + cam.cy, x.z()};
}

std::vector<Vector3> merge_views(const std::vector<std::vector<Vector3>>& point_sets,
                                 std::optional<double> voxel_size) {
  std::vector<Vector3> all;
  for (const auto& s : point_sets) all.insert(all.end(), s.begin(), s.end());
  std::stable_sort(all.begin(), all.end(), lexicographic_less);
  if (!voxel_size) return all;
  if (!(*voxel_size > 0.0)) throw DomainError("voxel size must be > 0");
  std::set<std::tuple<long long, long long, long long>> seen;
  std::vector<Vector3> out;
  for (const auto& p : all) {
    const auto key = std::make_tuple(static_cast<long long>(std::floor(p.x() / *voxel_size)),
                                     static_cast<long long>(std::floor(p.y() / *voxel_size)),
                                     static_cast<long long>(std::floor(p.z() / *voxel_size)));
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

void export_constraints(const std::vector<OrientedBBox>& boxes,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << "# safelayer-obb v1\n";
  out << "# center_x_m center_y_m center_z_m r00 r01 r02 r10 r11 r12 r20 r21 r22 "
         "extent_x_m extent_y_m extent_z_m\n";
  for (const auto& b : boxes) {
    std::string line = fmt::format("{:.17g} {:.17g} {:.17g}", b.center.x(), b.center.y(), b.center.z());
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) line += fmt::format(" {:.17g}", b.rotation(r, c));
    }
    line += fmt::format(" {:.17g} {:.17g} {:.17g}\n", b.extents.x(), b.extents.y(), b.extents.z());
    out << line;
  }
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

std::vector<OrientedBBox> import_constraints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line != "# safelayer-obb v1") {
    throw ParseError(path.string(), 1, "missing '# safelayer-obb v1' header");
  }
  ++line_no;
  std::vector<OrientedBBox> boxes;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double v[15];
    for (double& x : v) {
      if (!(ss >> x)) throw ParseError(path.string(), line_no, "expected 15 numbers per box");
    }
    std::string rest;
    if (ss >> rest) throw ParseError(path.string(), line_no, "trailing data after 15 numbers");
    OrientedBBox b;
    b.center = Vector3(v[0], v[1], v[2]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) b.rotation(r, c) = v[3 + 3 * r + c];
    }
    b.extents = Vector3(v[12], v[13], v[14]);
    try {
      b.validate();
    } catch (const DomainError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    boxes.push_back(b);
  }
  return boxes;
}

namespace {

// Entry distance of a ray into a box, nullopt on a miss.
std::optional<double> ray_box(const Vector3& origin, const Vector3& dir, const OrientedBBox& box) {
  const Vector3 o = box.rotation.transpose() * (origin - box.center);
  const Vector3 d = box.rotation.transpose() * dir;
  const Vector3 half = 0.5 * box.extents;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < -half[i] || o[i] > half[i]) return std::nullopt;
      continue;
    }
    double t0 = (-half[i] - o[i]) / d[i];
    double t1 = (half[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= 0.0) return std::nullopt;
  return t_near;
}

}  // namespace

LabeledView render_boxes(const CameraModel& cam, int width, int height,
                         const std::vector<OrientedBBox>& boxes) {
  cam.validate();
  LabeledView view{cam, width, height, {}, {}};
  view.depth.assign(static_cast<std::size_t>(width) * height, 0.0);
  view.labels.assign(view.depth.size(), 0);
  const Vector3 origin = cam.pose.translation();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      // Camera-frame ray with unit z, so the hit parameter is the depth.
      const Vector3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const Vector3 dir = cam.pose.linear() * ray;
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        if (auto t = ray_box(origin, dir, boxes[b]); t && *t < best) {
          best = *t;
          label = static_cast<int>(b) + 1;
        }
      }
      if (label != 0) {
        const auto idx = static_cast<std::size_t>(v) * width + u;
        view.depth[idx] = best;
        view.labels[idx] = label;
      }
    }
  }
  return view;
}

Transform look_at(const Vector3& eye, const Vector3& target, const Vector3& up) {
  const Vector3 forward = (target - eye).normalized();
  Vector3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw DomainError("look_at: viewing direction parallel to up");
  right.normalize();
  const Vector3 down = forward.cross(right);
  Transform t = Transform::Identity();
  t.linear().col(0) = right;
  t.linear().col(1) = down;
  t.linear().col(2) = forward;
  t.translation() = eye;
  return t;
}

void write_view(const LabeledView& view, const std::filesystem::path& path) {
  view.validate();
  nlohmann::json j;
  j["format"] = "safelayer-view";
  j["version"] = 1;
  const auto& c = view.camera;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) rot.push_back(c.pose.linear()(r, col));
  }
  j["camera"] = {{"fx_px", c.fx},
                 {"fy_px", c.fy},
                 {"cx_px", c.cx},
                 {"cy_px", c.cy},
                 {"translation_m", {c.pose.translation().x(), c.pose.translation().y(),
                                    c.pose.translation().z()}},
                 {"rotation_rowmajor", rot}};
  j["width"] = view.width;
  j["height"] = view.height;
  j["depth_m"] = view.depth;
  j["labels"] = view.labels;
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << j.dump() << '\n';
}

LabeledView read_view(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  try {
    if (j.at("format") != "safelayer-view" || j.at("version") != 1) {
      throw ParseError(path.string(), 0, "not a safelayer-view v1 file");
    }
    LabeledView v;
    const auto& c = j.at("camera");
    v.camera.fx = c.at("fx_px");
    v.camera.fy = c.at("fy_px");
    v.camera.cx = c.at("cx_px");
    v.camera.cy = c.at("cy_px");
    const auto t = c.at("translation_m").get<std::vector<double>>();
    const auto r = c.at("rotation_rowmajor").get<std::vector<double>>();
    if (t.size() != 3 || r.size() != 9) throw ParseError(path.string(), 0, "bad camera pose");
    v.camera.pose = Transform::Identity();
    v.camera.pose.translation() = Vector3(t[0], t[1], t[2]);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) v.camera.pose.linear()(i, k) = r[3 * i + k];
    }
    v.width = j.at("width");
    v.height = j.at("height");
    v.depth = j.at("depth_m").get<std::vector<double>>();
    v.labels = j.at("labels").get<std::vector<int>>();
    v.validate();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  } catch (const DomainError& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace safelayer
