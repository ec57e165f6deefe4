#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "safelayer/constraints.hpp"
#include "safelayer/types.hpp"

namespace safelayer {

// Pinhole intrinsics (pixels) and the camera-to-base transform.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Transform pose = Transform::Identity();

  void validate() const;
};

// Row-major rasters of equal size. Depth 0 marks an invalid pixel.
struct MaskedDepth {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> depth;

  void validate() const;
};

// Depth raster plus an instance-label raster (0 = background).
struct LabeledView {
  CameraModel camera;
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<int> labels;

  void validate() const;
  MaskedDepth mask_for(int label) const;
  std::vector<int> instance_labels() const;  // sorted, background excluded
};

struct PixelDepth {
  double u;
  double v;
  double z;
};

// Lifts every masked pixel with positive depth into the base frame. An empty
// vector means no valid pixel was found.
std::vector<Vector3> lift_mask(const CameraModel& cam, const MaskedDepth& md);

// Base-frame point to (u, v, z); nullopt behind the camera.
std::optional<PixelDepth> project_point(const CameraModel& cam, const Vector3& point_base);

// Concatenates point sets and sorts them lexicographically. With a voxel
// size, keeps the first point of each occupied voxel.
std::vector<Vector3> merge_views(const std::vector<std::vector<Vector3>>& point_sets,
                                 std::optional<double> voxel_size = std::nullopt);

// Smallest-volume box among candidate orientations: principal axes, the
// gravity axis and facet normals of extreme points, each completed by an
// exact minimum-area rectangle in the orthogonal plane. Needs >= 4 points.
// Extents below 1 mm are floored with a warning.
OrientedBBox fit_obb(const std::vector<Vector3>& points);

inline constexpr double kMinBoxExtent = 1e-3;

// Text format, one box per line, 15 numbers: center (3), rotation row-major
// (9), extents (3). First line "# safelayer-obb v1".
void export_constraints(const std::vector<OrientedBBox>& boxes, const std::filesystem::path& path);
std::vector<OrientedBBox> import_constraints(const std::filesystem::path& path);

// Ray-casts boxes into a labeled depth view (label i + 1 for boxes[i]).
LabeledView render_boxes(const CameraModel& cam, int width, int height,
                         const std::vector<OrientedBBox>& boxes);

// Camera at `eye` looking at `target` with the image y axis pointing away
// from `up`.
Transform look_at(const Vector3& eye, const Vector3& target, const Vector3& up = Vector3::UnitZ());

void write_view(const LabeledView& view, const std::filesystem::path& path);
LabeledView read_view(const std::filesystem::path& path);

}  // namespace safelayer
