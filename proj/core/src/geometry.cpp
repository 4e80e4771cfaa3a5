#include "lidarseg/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace lidarseg {

void check_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) throw std::invalid_argument("rotation contains non-finite entries");
  const double ortho_err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > tol)
    throw std::invalid_argument("rotation is not orthonormal (max |R^T R - I| = " + std::to_string(ortho_err) + ")");
  const double det = r.determinant();
  if (std::abs(det - 1.0) > tol)
    throw std::invalid_argument("rotation determinant is " + std::to_string(det) + ", expected +1");
}

RigidTransform::RigidTransform(Mat3 rotation, Vec3 translation, std::string source_frame,
                               std::string target_frame)
    : rotation_(std::move(rotation)),
      translation_(std::move(translation)),
      source_(std::move(source_frame)),
      target_(std::move(target_frame)) {
  check_rotation(rotation_);
  if (!translation_.allFinite()) throw std::invalid_argument("translation contains non-finite entries");
}

RigidTransform RigidTransform::identity(std::string frame) {
  std::string target = frame;
  return {Mat3::Identity(), Vec3::Zero(), std::move(frame), std::move(target)};
}

RigidTransform RigidTransform::identity(std::string source_frame, std::string target_frame) {
  return {Mat3::Identity(), Vec3::Zero(), std::move(source_frame), std::move(target_frame)};
}

RigidTransform RigidTransform::inverse() const {
  Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), target_, source_};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (a.source_frame() != b.target_frame())
    throw std::invalid_argument("cannot compose: outer transform expects frame '" + a.source_frame() +
                                "' but inner transform produces frame '" + b.target_frame() + "'");
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation(), b.source_frame(),
          a.target_frame()};
}

RigidTransform inverse(const RigidTransform& t) { return t.inverse(); }

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("principal point lies outside the image");
}

void LabeledPointCloud::validate() const {
  if (points.size() != labels.size())
    throw std::invalid_argument("point cloud has " + std::to_string(points.size()) + " points but " +
                                std::to_string(labels.size()) + " labels");
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("point cloud contains a non-finite coordinate");
}

std::optional<ImagePoint> project_continuous(const Point3& p_lidar, const CameraIntrinsics& cam,
                                             const RigidTransform& camera_from_lidar) {
  const Vec3 pc = camera_from_lidar.apply(p_lidar.vec());
  if (!(pc.z() > kNearPlane)) return std::nullopt;
  return ImagePoint{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
}

std::optional<PixelCoord> project_point(const Point3& p_lidar, const CameraIntrinsics& cam,
                                        const RigidTransform& camera_from_lidar) {
  const auto ip = project_continuous(p_lidar, cam, camera_from_lidar);
  if (!ip) return std::nullopt;
  // std::round rounds halfway cases away from zero.
  const double u = std::round(ip->u);
  const double v = std::round(ip->v);
  if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return std::nullopt;
  return PixelCoord{static_cast<int>(u), static_cast<int>(v)};
}

std::vector<ProjectedPoint> project_cloud(const LabeledPointCloud& cloud, const CameraIntrinsics& cam,
                                          const RigidTransform& camera_from_lidar) {
  cloud.validate();
  std::vector<ProjectedPoint> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (auto px = project_point(cloud.points[i], cam, camera_from_lidar)) out.push_back({*px, cloud.labels[i]});
  }
  return out;
}

}  // namespace lidarseg
