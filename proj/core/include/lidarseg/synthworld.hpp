#pragma once

// Procedural driving scenes with exactly known dense road masks.
//
// World frame: x forward, y left, z up; the ground is the plane z = 0.
// Lidar frame: same axis convention as the world, spinning about its z axis.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lidarseg/calibration.hpp"
#include "lidarseg/datastore.hpp"
#include "lidarseg/geometry.hpp"
#include "lidarseg/maskgen.hpp"
#include "lidarseg/plane.hpp"
#include "lidarseg/seed.hpp"

namespace lidarseg {

using Vec2 = Eigen::Vector2d;

struct Box {
  Vec3 min_corner;
  Vec3 max_corner;
  Vec3 color;  // RGB in [0,1]

  [[nodiscard]] bool contains(const Vec3& p) const;
};

struct SceneSpec {
  std::array<Vec2, 4> road;  // convex quad on z = 0, counter-clockwise
  std::vector<Box> obstacles;
  Vec3 road_color{0.45, 0.45, 0.45};
  Vec3 ground_color{0.3, 0.5, 0.2};
  Vec3 sky_color{0.6, 0.75, 0.95};
  double noise_amplitude = 0.0;
  RigidTransform camera_from_world = RigidTransform::identity("world", "camera");
  RigidTransform lidar_from_world = RigidTransform::identity("world", "lidar");
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when the road is degenerate or non-convex, a
  // sensor sits at or below the ground, or an obstacle contains a sensor.
  void validate() const;
  [[nodiscard]] RigidTransform camera_from_lidar() const;
  [[nodiscard]] bool on_road(double x, double y) const;
};

// World -> camera for a camera at `position` with heading `yaw` (about +z, radians)
// and downward `pitch` (radians).
RigidTransform make_camera_pose(const Vec3& position, double yaw, double pitch);
// World -> lidar for a level sensor at `position` with heading `yaw`.
RigidTransform make_lidar_pose(const Vec3& position, double yaw);
// Sensor origin in world coordinates.
Vec3 sensor_position(const RigidTransform& sensor_from_world);

struct LidarSpec {
  std::vector<double> elevations;      // radians, strictly increasing
  double azimuth_step = 0.5 * 3.14159265358979323846 / 180.0;
  double max_range = 60.0;

  void validate() const;
  [[nodiscard]] std::size_t azimuth_count() const;

  static LidarSpec dense16();  // 16 beams, -15 to -1 degrees
  static LidarSpec dense64();  // 64 beams, -24.8 to +2 degrees (HDL-64E-like)
  static LidarSpec dual32();   // two interleaved 32-beam fans, -16 to +15.5 degrees
  static std::optional<LidarSpec> preset(const std::string& name);
};

struct RenderResult {
  RgbImage image;
  MaskPlane dense_gt;
};

enum class Surface { None, Ground, Obstacle };

struct RayHit {
  Surface surface = Surface::None;
  double t = 0.0;
  int obstacle = -1;
  int face_axis = -1;  // 0/1/2 for the obstacle face normal axis
  Vec3 point = Vec3::Zero();
};

// Nearest hit along origin + t * dir for t in (0, t_max].
RayHit cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir, double t_max);

RenderResult render(const SceneSpec& scene, const CameraIntrinsics& cam);

LabeledPointCloud scan(const SceneSpec& scene, const LidarSpec& lidar);

template <typename T>
struct Range {
  T lo;
  T hi;
};

struct VariationConfig {
  Range<double> camera_height{1.4, 1.8};
  Range<double> camera_pitch_deg{0.5, 3.0};
  Range<double> camera_yaw_deg{-10.0, 10.0};
  double lidar_height_above_camera = 0.25;
  Range<double> road_half_width{2.5, 5.0};
  Range<double> road_far_width_scale{0.6, 1.2};
  Range<double> road_lateral_offset{-2.5, 2.5};
  Range<double> road_heading_deg{-15.0, 15.0};
  double road_length = 90.0;
  Range<int> obstacle_count{0, 3};
  Range<double> obstacle_distance{7.0, 35.0};
  Range<double> obstacle_lateral{-9.0, 9.0};
  Range<double> obstacle_size{1.5, 4.0};
  Range<double> obstacle_height{2.5, 4.5};
  Range<double> noise_amplitude{0.02, 0.05};
  double val_fraction = 0.15;
  NoiseConfig mask_noise{};  // seed is overridden per frame
};

SceneSpec sample_scene(const VariationConfig& cfg, std::uint64_t seed);

// Default 64 x 64 camera used by the synthetic dataset.
CameraIntrinsics default_camera();

struct FrameArtifacts {
  std::string id;
  SceneSpec scene;
  RenderResult render;
  LabeledPointCloud cloud;
  CalibratedCamera calibration;
  SparseGroundTruth sparse;
};

// Builds one frame in memory. The sparse mask is computed from the cloud and
// calibration exactly as they are serialized, so re-projecting the written
// files reproduces it.
FrameArtifacts make_frame(const VariationConfig& cfg, const CameraIntrinsics& cam, const LidarSpec& lidar,
                          std::uint64_t frame_seed, std::string id);

// Writes every frame plus `dataset.jsonl` to out_dir and returns the manifest.
std::vector<ManifestRecord> generate_dataset(int n_scenes, const VariationConfig& cfg, const CameraIntrinsics& cam,
                                             const LidarSpec& lidar, const std::filesystem::path& out_dir,
                                             std::uint64_t seed);

}  // namespace lidarseg
