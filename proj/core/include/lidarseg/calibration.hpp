#pragma once

#include <filesystem>
#include <string>

#include "lidarseg/geometry.hpp"

namespace lidarseg {

// Camera intrinsics plus the lidar -> camera extrinsic transform.
struct CalibratedCamera {
  CameraIntrinsics intrinsics;
  RigidTransform camera_from_lidar = RigidTransform::identity("lidar", "camera");
};

// JSON document with keys K (9 numbers, row-major), T_camera_lidar (16 numbers,
// row-major 4x4), width and height. Throws DataError naming the defect.
CalibratedCamera parse_calibration(const std::string& json_text);
CalibratedCamera load_calibration(const std::filesystem::path& path);

std::string calibration_to_json(const CalibratedCamera& calib);
void save_calibration(const std::filesystem::path& path, const CalibratedCamera& calib);

}  // namespace lidarseg
