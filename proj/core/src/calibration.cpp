#include "lidarseg/calibration.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "lidarseg/errors.hpp"

namespace lidarseg {
namespace {

using nlohmann::json;

std::vector<double> number_array(const json& doc, const char* key, std::size_t expected) {
  if (!doc.contains(key)) throw DataError(std::string("calibration: missing key '") + key + "'");
  const json& arr = doc.at(key);
  if (!arr.is_array() || arr.size() != expected)
    throw DataError(std::string("calibration: '") + key + "' must be an array of " + std::to_string(expected) +
                    " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number()) throw DataError(std::string("calibration: '") + key + "' contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

int positive_int(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number_integer())
    throw DataError(std::string("calibration: '") + key + "' must be an integer");
  const int v = doc.at(key).get<int>();
  if (v <= 0) throw DataError(std::string("calibration: '") + key + "' must be positive");
  return v;
}

}  // namespace

CalibratedCamera parse_calibration(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("calibration: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("calibration: top-level value must be an object");

  const auto k = number_array(doc, "K", 9);
  const auto t = number_array(doc, "T_camera_lidar", 16);

  CalibratedCamera calib;
  auto& in = calib.intrinsics;
  in.width = positive_int(doc, "width");
  in.height = positive_int(doc, "height");
  if (k[1] != 0.0 || k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0)
    throw DataError("calibration: K must have the form [fx 0 cx; 0 fy cy; 0 0 1]");
  in.fx = k[0];
  in.cx = k[2];
  in.fy = k[4];
  in.cy = k[5];
  try {
    in.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("calibration: ") + e.what());
  }

  if (t[12] != 0.0 || t[13] != 0.0 || t[14] != 0.0 || t[15] != 1.0)
    throw DataError("calibration: last row of T_camera_lidar must be [0 0 0 1]");
  Mat3 r;
  Vec3 tr;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = t[4 * i + j];
    tr(i) = t[4 * i + 3];
  }
  try {
    calib.camera_from_lidar = RigidTransform(r, tr, "lidar", "camera");
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("calibration: T_camera_lidar: ") + e.what());
  }
  return calib;
}

CalibratedCamera load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_calibration(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string calibration_to_json(const CalibratedCamera& calib) {
  const auto& in = calib.intrinsics;
  const auto& r = calib.camera_from_lidar.rotation();
  const auto& t = calib.camera_from_lidar.translation();
  json doc;
  doc["K"] = {in.fx, 0.0, in.cx, 0.0, in.fy, in.cy, 0.0, 0.0, 1.0};
  doc["T_camera_lidar"] = {r(0, 0), r(0, 1), r(0, 2), t(0), r(1, 0), r(1, 1), r(1, 2), t(1),
                           r(2, 0), r(2, 1), r(2, 2), t(2), 0.0,     0.0,     0.0,     1.0};
  doc["width"] = in.width;
  doc["height"] = in.height;
  return doc.dump(2) + "\n";
}

void save_calibration(const std::filesystem::path& path, const CalibratedCamera& calib) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write calibration file: " + path.string());
  out << calibration_to_json(calib);
  if (!out) throw DataError("failed writing calibration file: " + path.string());
}

}  // namespace lidarseg
