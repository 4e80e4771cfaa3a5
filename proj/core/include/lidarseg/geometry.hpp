#pragma once

// Rigid transforms, pinhole intrinsics and lidar-to-image projection.
//
// Frame conventions: camera frames are +z forward, +x right, +y down.
// A RigidTransform maps coordinates expressed in `source_frame` into
// `target_frame`:  p_target = rotation * p_source + translation.

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lidarseg/plane.hpp"

namespace lidarseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] Vec3 vec() const { return {x, y, z}; }
  static Point3 from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  friend bool operator==(const Point3&, const Point3&) = default;
};

// Tolerance applied to rotation orthonormality when loading calibration.
inline constexpr double kRotationTolerance = 1e-6;
// Points at or closer than this depth (meters, camera frame) are culled.
inline constexpr double kNearPlane = 0.1;

class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(Mat3 rotation, Vec3 translation, std::string source_frame, std::string target_frame);

  static RigidTransform identity(std::string frame);
  static RigidTransform identity(std::string source_frame, std::string target_frame);

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }
  [[nodiscard]] const std::string& source_frame() const { return source_; }
  [[nodiscard]] const std::string& target_frame() const { return target_; }

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  [[nodiscard]] RigidTransform inverse() const;
  // Position of the source frame's origin expressed in the target frame.
  [[nodiscard]] Vec3 origin_in_target() const { return translation_; }

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  std::string source_;
  std::string target_;
};

// Throws std::invalid_argument unless `r` is orthonormal with det +1 within `tol`.
void check_rotation(const Mat3& r, double tol = kRotationTolerance);

// a ∘ b: first b, then a. Requires a.source_frame() == b.target_frame().
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

Mat3 rot_x(double radians);
Mat3 rot_y(double radians);
Mat3 rot_z(double radians);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  [[nodiscard]] ImageSize size() const { return {width, height}; }
  [[nodiscard]] Mat3 matrix() const;
  void validate() const;
};

struct PixelCoord {
  int u = 0;  // column
  int v = 0;  // row
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

enum class PointLabel : std::uint8_t { NonRoad = 0, Road = 1 };

struct LabeledPointCloud {
  std::vector<Point3> points;
  std::vector<PointLabel> labels;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  void push_back(const Point3& p, PointLabel l) {
    points.push_back(p);
    labels.push_back(l);
  }
  void validate() const;
};

struct ProjectedPoint {
  PixelCoord pixel;
  PointLabel label = PointLabel::NonRoad;
  friend bool operator==(const ProjectedPoint&, const ProjectedPoint&) = default;
};

// Continuous image coordinates (before rounding); absent when behind the near plane.
struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
};
std::optional<ImagePoint> project_continuous(const Point3& p_lidar, const CameraIntrinsics& cam,
                                             const RigidTransform& camera_from_lidar);

// Rounded, bounds-checked projection of a single lidar point.
std::optional<PixelCoord> project_point(const Point3& p_lidar, const CameraIntrinsics& cam,
                                        const RigidTransform& camera_from_lidar);

// Projects every point; keeps in-bounds results in input order.
std::vector<ProjectedPoint> project_cloud(const LabeledPointCloud& cloud, const CameraIntrinsics& cam,
                                          const RigidTransform& camera_from_lidar);

}  // namespace lidarseg
