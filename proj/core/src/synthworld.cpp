#include "lidarseg/synthworld.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "lidarseg/errors.hpp"
#include "lidarseg/ply_io.hpp"
#include "lidarseg/png_io.hpp"

namespace lidarseg {
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

bool Box::contains(const Vec3& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

void SceneSpec::validate() const {
  double area2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = road[i];
    const Vec2& b = road[(i + 1) % 4];
    const Vec2& c = road[(i + 2) % 4];
    if (!a.allFinite()) throw std::invalid_argument("road polygon has a non-finite vertex");
    if (cross2(b - a, c - b) <= 0.0) throw std::invalid_argument("road polygon must be convex and counter-clockwise");
    area2 += cross2(a, b);
  }
  if (!(area2 > 0.0)) throw std::invalid_argument("road polygon has zero area");
  if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("noise amplitude must be >= 0");
  const Vec3 cam = sensor_position(camera_from_world);
  const Vec3 lid = sensor_position(lidar_from_world);
  if (!(cam.z() > 0.0)) throw std::invalid_argument("camera must be above the ground plane");
  if (!(lid.z() > 0.0)) throw std::invalid_argument("lidar must be above the ground plane");
  for (const auto& b : obstacles) {
    if (!((b.max_corner.array() > b.min_corner.array()).all()))
      throw std::invalid_argument("obstacle box has non-positive extent");
    if (b.contains(cam)) throw std::invalid_argument("obstacle contains the camera origin");
    if (b.contains(lid)) throw std::invalid_argument("obstacle contains the lidar origin");
  }
  if (camera_from_world.source_frame() != "world" || lidar_from_world.source_frame() != "world")
    throw std::invalid_argument("sensor poses must map from the 'world' frame");
}

RigidTransform SceneSpec::camera_from_lidar() const {
  return compose(camera_from_world, lidar_from_world.inverse());
}

bool SceneSpec::on_road(double x, double y) const {
  const Vec2 p(x, y);
  for (int i = 0; i < 4; ++i)
    if (cross2(road[(i + 1) % 4] - road[i], p - road[i]) < 0.0) return false;
  return true;
}

RigidTransform make_camera_pose(const Vec3& position, double yaw, double pitch) {
  // Columns: camera x (right), y (down), z (forward) expressed in the world frame.
  Mat3 axes;
  axes << 0, 0, 1,  //
      -1, 0, 0,     //
      0, -1, 0;
  const Mat3 world_from_camera = rot_z(yaw) * rot_y(pitch) * axes;
  const Mat3 r = world_from_camera.transpose();
  return {r, -(r * position), "world", "camera"};
}

RigidTransform make_lidar_pose(const Vec3& position, double yaw) {
  const Mat3 r = rot_z(yaw).transpose();
  return {r, -(r * position), "world", "lidar"};
}

Vec3 sensor_position(const RigidTransform& sensor_from_world) {
  return -(sensor_from_world.rotation().transpose() * sensor_from_world.translation());
}

void LidarSpec::validate() const {
  for (std::size_t i = 1; i < elevations.size(); ++i)
    if (!(elevations[i] > elevations[i - 1])) throw std::invalid_argument("lidar elevations must be strictly increasing");
  if (!(azimuth_step > 0.0)) throw std::invalid_argument("lidar azimuth step must be positive");
  if (!(max_range > 0.0)) throw std::invalid_argument("lidar max range must be positive");
}

std::size_t LidarSpec::azimuth_count() const {
  return static_cast<std::size_t>(std::round(2.0 * std::numbers::pi / azimuth_step));
}

namespace {
LidarSpec uniform_fan(int beams, double lo_deg, double hi_deg) {
  LidarSpec s;
  for (int i = 0; i < beams; ++i) s.elevations.push_back((lo_deg + (hi_deg - lo_deg) * i / (beams - 1)) * kDeg);
  return s;
}
}  // namespace

LidarSpec LidarSpec::dense16() { return uniform_fan(16, -15.0, -1.0); }

LidarSpec LidarSpec::dense64() { return uniform_fan(64, -24.8, 2.0); }

LidarSpec LidarSpec::dual32() {
  // Two 32-beam sensors (-16..+15 deg, 1 deg pitch) mounted together, the second
  // offset by half a beam spacing; merged into one sorted elevation list.
  LidarSpec s;
  for (int i = 0; i < 32; ++i) {
    s.elevations.push_back((-16.0 + i) * kDeg);
    s.elevations.push_back((-15.5 + i) * kDeg);
  }
  return s;
}

std::optional<LidarSpec> LidarSpec::preset(const std::string& name) {
  if (name == "dense16") return dense16();
  if (name == "dense64") return dense64();
  if (name == "dual32") return dual32();
  return std::nullopt;
}

RayHit cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir, double t_max) {
  RayHit best;
  best.t = t_max;
  if (dir.z() < 0.0 && origin.z() > 0.0) {
    const double t = -origin.z() / dir.z();
    if (t > 0.0 && t <= best.t) {
      best.surface = Surface::Ground;
      best.t = t;
    }
  }
  for (int b = 0; b < static_cast<int>(scene.obstacles.size()); ++b) {
    const Box& box = scene.obstacles[b];
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    int axis = -1;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (dir(a) == 0.0) {
        if (origin(a) < box.min_corner(a) || origin(a) > box.max_corner(a)) miss = true;
        continue;
      }
      double ta = (box.min_corner(a) - origin(a)) / dir(a);
      double tb = (box.max_corner(a) - origin(a)) / dir(a);
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        axis = a;
      }
      t1 = std::min(t1, tb);
      if (t0 > t1) miss = true;
    }
    if (miss || axis < 0 || !(t0 > 0.0) || t0 > best.t) continue;
    if (best.surface != Surface::None && t0 == best.t && best.surface == Surface::Ground) continue;
    best.surface = Surface::Obstacle;
    best.t = t0;
    best.obstacle = b;
    best.face_axis = axis;
  }
  if (best.surface != Surface::None) best.point = origin + best.t * dir;
  return best;
}

RenderResult render(const SceneSpec& scene, const CameraIntrinsics& cam) {
  scene.validate();
  cam.validate();
  RenderResult out{RgbImage(cam.size()), MaskPlane(cam.size(), 0)};
  const Mat3 world_from_camera = scene.camera_from_world.rotation().transpose();
  const Vec3 origin = sensor_position(scene.camera_from_world);
  std::mt19937_64 rng(scene.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  constexpr double kFar = std::numeric_limits<double>::infinity();

  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 d_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const Vec3 dir = (world_from_camera * d_cam).normalized();
      const RayHit hit = cast_ray(scene, origin, dir, kFar);
      Vec3 color;
      switch (hit.surface) {
        case Surface::Ground: {
          const bool road = scene.on_road(hit.point.x(), hit.point.y());
          out.dense_gt(v, u) = road ? 1 : 0;
          color = road ? scene.road_color : scene.ground_color;
          break;
        }
        case Surface::Obstacle: {
          static constexpr double kShade[3] = {0.8, 0.65, 1.0};
          color = scene.obstacles[hit.obstacle].color * kShade[hit.face_axis];
          break;
        }
        case Surface::None:
          color = scene.sky_color;
          break;
      }
      for (int c = 0; c < 3; ++c) {
        const double val = color(c) + scene.noise_amplitude * jitter(rng);
        out.image.at(c, v, u) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return out;
}

LabeledPointCloud scan(const SceneSpec& scene, const LidarSpec& lidar) {
  scene.validate();
  lidar.validate();
  LabeledPointCloud cloud;
  const Mat3 world_from_lidar = scene.lidar_from_world.rotation().transpose();
  const Vec3 origin = sensor_position(scene.lidar_from_world);
  const std::size_t n_az = lidar.azimuth_count();
  for (double elev : lidar.elevations) {
    const double ce = std::cos(elev), se = std::sin(elev);
    for (std::size_t k = 0; k < n_az; ++k) {
      const double az = static_cast<double>(k) * lidar.azimuth_step;
      const Vec3 d_lidar(ce * std::cos(az), ce * std::sin(az), se);
      const RayHit hit = cast_ray(scene, origin, world_from_lidar * d_lidar, lidar.max_range);
      if (hit.surface == Surface::None) continue;
      const bool road = hit.surface == Surface::Ground && scene.on_road(hit.point.x(), hit.point.y());
      cloud.push_back(Point3::from(hit.t * d_lidar), road ? PointLabel::Road : PointLabel::NonRoad);
    }
  }
  return cloud;
}

CameraIntrinsics default_camera() { return {48.0, 48.0, 32.0, 32.0, 64, 64}; }

SceneSpec sample_scene(const VariationConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto in = [&uni](Range<double> r) { return uni(r.lo, r.hi); };
  auto jitter3 = [&uni](const Vec3& base, double amount) {
    Vec3 c;
    for (int i = 0; i < 3; ++i) c(i) = std::clamp(base(i) + uni(-amount, amount), 0.0, 1.0);
    return c;
  };

  SceneSpec s;
  s.seed = derive_seed(seed, 0xC0108);

  const double cam_h = in(cfg.camera_height);
  const double yaw = in(cfg.camera_yaw_deg) * kDeg;
  const double pitch = in(cfg.camera_pitch_deg) * kDeg;
  s.camera_from_world = make_camera_pose(Vec3(0, 0, cam_h), yaw, pitch);
  s.lidar_from_world = make_lidar_pose(Vec3(0, 0, cam_h + cfg.lidar_height_above_camera), yaw);

  // Road: a tapered strip starting just behind the sensors, in a frame rotated by the road heading.
  const double heading = yaw + in(cfg.road_heading_deg) * kDeg;
  const double half_w = in(cfg.road_half_width);
  const double far_half_w = half_w * in(cfg.road_far_width_scale);
  const double offset = in(cfg.road_lateral_offset);
  const Eigen::Rotation2Dd rot(heading);
  const Vec2 base(0.0, offset);
  const Vec2 local[4] = {{-3.0, -half_w}, {cfg.road_length, -far_half_w}, {cfg.road_length, far_half_w}, {-3.0, half_w}};
  for (int i = 0; i < 4; ++i) s.road[i] = rot * (base + local[i]);

  s.road_color = jitter3(Vec3::Constant(uni(0.35, 0.55)), 0.03);
  static const Vec3 kGrounds[] = {{0.25, 0.45, 0.18}, {0.55, 0.45, 0.30}, {0.35, 0.30, 0.22}, {0.40, 0.55, 0.25}};
  s.ground_color = jitter3(kGrounds[std::uniform_int_distribution<int>(0, 3)(rng)], 0.05);
  s.sky_color = Vec3(uni(0.55, 0.75), uni(0.70, 0.85), uni(0.88, 1.0));
  s.noise_amplitude = in(cfg.noise_amplitude);

  static const Vec3 kPalette[] = {{0.75, 0.15, 0.12}, {0.15, 0.25, 0.70}, {0.85, 0.75, 0.15},
                                  {0.90, 0.90, 0.92}, {0.10, 0.10, 0.12}, {0.20, 0.60, 0.65}};
  const int n_obs = std::uniform_int_distribution<int>(cfg.obstacle_count.lo, cfg.obstacle_count.hi)(rng);
  for (int i = 0; i < n_obs; ++i) {
    const double dist = in(cfg.obstacle_distance);
    const double lat = in(cfg.obstacle_lateral);
    const double sx = in(cfg.obstacle_size), sy = in(cfg.obstacle_size), sz = in(cfg.obstacle_height);
    const Vec2 c = Eigen::Rotation2Dd(yaw) * Vec2(dist, lat);
    Box b{Vec3(c.x() - sx / 2, c.y() - sy / 2, 0.0), Vec3(c.x() + sx / 2, c.y() + sy / 2, sz),
          jitter3(kPalette[std::uniform_int_distribution<int>(0, 5)(rng)], 0.05)};
    s.obstacles.push_back(b);
  }
  s.validate();
  return s;
}

FrameArtifacts make_frame(const VariationConfig& cfg, const CameraIntrinsics& cam, const LidarSpec& lidar,
                          std::uint64_t frame_seed, std::string id) {
  FrameArtifacts f;
  f.id = std::move(id);
  f.scene = sample_scene(cfg, frame_seed);
  f.render = render(f.scene, cam);

  // Round-trip through the on-disk encodings so that projecting the written
  // files reproduces the sparse mask bit for bit.
  f.cloud = ply::parse(ply::to_string(scan(f.scene, lidar)));
  f.calibration = parse_calibration(calibration_to_json(CalibratedCamera{cam, f.scene.camera_from_lidar()}));

  NoiseConfig noise = cfg.mask_noise;
  noise.seed = derive_seed(frame_seed, 0x5EED);
  const auto projected = project_cloud(f.cloud, f.calibration.intrinsics, f.calibration.camera_from_lidar);
  f.sparse = build_sparse_gt(projected, cam.size(), noise);
  return f;
}

std::vector<ManifestRecord> generate_dataset(int n_scenes, const VariationConfig& cfg, const CameraIntrinsics& cam,
                                             const LidarSpec& lidar, const fs::path& out_dir, std::uint64_t seed) {
  if (n_scenes < 0) throw std::invalid_argument("scene count must be non-negative");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  // Seeded train/val assignment with an exact validation count.
  const auto n = static_cast<std::size_t>(n_scenes);
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 split_rng(derive_seed(seed, 0x5B1));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  std::vector<Split> split(n, Split::Train);
  for (std::size_t i = 0; i < n_val; ++i) split[perm[i]] = Split::Val;

  std::vector<ManifestRecord> records;
  records.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu", i);
    const std::string stem = name;
    FrameArtifacts f = make_frame(cfg, cam, lidar, derive_seed(seed, i), stem);

    const fs::path image = out_dir / (stem + ".png");
    png::write_rgb(image, f.render.image);
    ply::write(out_dir / (stem + ".ply"), f.cloud);
    save_calibration(out_dir / (stem + "_calib.json"), f.calibration);
    const fs::path dense_stem = out_dir / (stem + "_dense");
    const fs::path sparse_stem = out_dir / (stem + "_sparse");
    save_masks(dense_stem, densify(f.render.dense_gt));
    save_masks(sparse_stem, f.sparse);

    records.push_back({image, gt_path(dense_stem), valid_path(dense_stem), SupervisionKind::Dense, split[i], stem});
    records.push_back({image, gt_path(sparse_stem), valid_path(sparse_stem), SupervisionKind::Sparse, split[i], stem});
  }
  write_manifest(out_dir / "dataset.jsonl", records);
  return records;
}

}  // namespace lidarseg
