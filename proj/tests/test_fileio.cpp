#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "lidarseg/calibration.hpp"
#include "lidarseg/errors.hpp"
#include "lidarseg/maskgen.hpp"
#include "lidarseg/ply_io.hpp"
#include "lidarseg/png_io.hpp"
#include "support.hpp"

using namespace lidarseg;
using lidarseg::testing::ScratchDir;

namespace {

const char* kCalib = R"({
  "K": [48, 0, 32, 0, 48, 32, 0, 0, 1],
  "T_camera_lidar": [0, -1, 0, 0.1, 0, 0, -1, 0.25, 1, 0, 0, 0, 0, 0, 0, 1],
  "width": 64, "height": 64
})";

std::string expect_data_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected DataError";
  return {};
}

}  // namespace

TEST(Calibration, ParsesKAndExtrinsics) {
  const auto c = parse_calibration(kCalib);
  EXPECT_EQ(c.intrinsics.fx, 48);
  EXPECT_EQ(c.intrinsics.cy, 32);
  EXPECT_EQ(c.intrinsics.width, 64);
  EXPECT_EQ(c.camera_from_lidar.rotation()(2, 0), 1.0);
  EXPECT_EQ(c.camera_from_lidar.translation()(1), 0.25);
  EXPECT_EQ(c.camera_from_lidar.source_frame(), "lidar");
  EXPECT_EQ(c.camera_from_lidar.target_frame(), "camera");
}

TEST(Calibration, JsonRoundTripIsExact) {
  std::mt19937_64 rng(5);
  CalibratedCamera c;
  c.intrinsics = {51.3, 47.9, 30.2, 33.7, 64, 64};
  c.camera_from_lidar = lidarseg::testing::random_transform(rng, "lidar", "camera");
  const auto back = parse_calibration(calibration_to_json(c));
  EXPECT_EQ(back.intrinsics.fx, c.intrinsics.fx);
  EXPECT_EQ(back.intrinsics.cx, c.intrinsics.cx);
  EXPECT_EQ(back.camera_from_lidar.rotation(), c.camera_from_lidar.rotation());
  EXPECT_EQ(back.camera_from_lidar.translation(), c.camera_from_lidar.translation());
}

TEST(Calibration, RejectsDefects) {
  EXPECT_NE(expect_data_error([] { parse_calibration("{"); }).find("JSON"), std::string::npos);
  EXPECT_NE(expect_data_error([] { parse_calibration(R"({"K":[1,2,3]})"); }).find("K"), std::string::npos);
  EXPECT_NE(expect_data_error([] {
              parse_calibration(R"({"K":[48,0,32,0,48,32,0,0,1],"T_camera_lidar":[2,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1],
                                   "width":64,"height":64})");
            }).find("orthonormal"),
            std::string::npos);
  EXPECT_NE(expect_data_error([] {
              parse_calibration(R"({"K":[48,0,32,0,48,32,0,0,1],"T_camera_lidar":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,1,1],
                                   "width":64,"height":64})");
            }).find("last row"),
            std::string::npos);
  EXPECT_NE(expect_data_error([] {
              parse_calibration(R"({"K":[48,0,32,0,48,32,0,0,1],"T_camera_lidar":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1],
                                   "width":0,"height":64})");
            }).find("width"),
            std::string::npos);
}

TEST(Calibration, MissingFileNamesPath) {
  EXPECT_NE(expect_data_error([] { load_calibration("/nonexistent/calib.json"); }).find("/nonexistent/calib.json"),
            std::string::npos);
}

TEST(Ply, RoundTripAtFloatPrecision) {
  LabeledPointCloud cloud;
  cloud.push_back({1.5, -2.25, 0.125}, PointLabel::Road);
  cloud.push_back({-10.0, 3.0, -1.75}, PointLabel::NonRoad);
  const auto back = ply::parse(ply::to_string(cloud));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.points, cloud.points);
  EXPECT_EQ(back.labels, cloud.labels);
  EXPECT_EQ(ply::to_string(back), ply::to_string(cloud));
}

TEST(Ply, EmptyCloud) {
  EXPECT_TRUE(ply::parse(ply::to_string(LabeledPointCloud{})).empty());
}

TEST(Ply, AcceptsExtraPropertiesAndComments) {
  const auto c = ply::parse(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 1\nproperty float intensity\n"
      "property float x\nproperty float y\nproperty float z\nproperty uchar label\nend_header\n0.3 1 2 3 1\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.points[0], (Point3{1, 2, 3}));
  EXPECT_EQ(c.labels[0], PointLabel::Road);
}

TEST(Ply, ErrorsNameTheDefect) {
  const std::string head = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                           "property float z\nproperty uchar label\nend_header\n";
  EXPECT_NE(expect_data_error([] { ply::parse("plx\n"); }).find("magic"), std::string::npos);
  EXPECT_NE(expect_data_error([] { ply::parse("ply\nformat binary_little_endian 1.0\n"); }).find("ascii"),
            std::string::npos);
  EXPECT_NE(expect_data_error([&] { ply::parse(head + "0 0 0 1\n"); }).find("expected 2 vertices"),
            std::string::npos);
  EXPECT_NE(expect_data_error([&] { ply::parse(head + "0 0 0 1\n0 0 0 2\n"); }).find("line 10"), std::string::npos);
  EXPECT_NE(expect_data_error([&] { ply::parse(head + "0 0 0 1\n0 zz 0 0\n"); }).find("line 10"),
            std::string::npos);
  EXPECT_NE(expect_data_error([&] { ply::parse(head + "0 0 0 1\n0 0 0 0\n1 1 1 1\n"); }).find("trailing"),
            std::string::npos);
  EXPECT_NE(expect_data_error([] {
              ply::parse("ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
                         "property float z\nend_header\n");
            }).find("label"),
            std::string::npos);
}

TEST(Png, MaskRoundTripUses0And255) {
  ScratchDir dir("png");
  std::mt19937_64 rng(3);
  const MaskPlane m = lidarseg::testing::random_mask(rng, 13, 7);
  png::write_mask(dir / "m.png", m);
  EXPECT_EQ(png::read_mask(dir / "m.png"), m);
  const auto raw = png::read_gray(dir / "m.png");
  for (std::size_t i = 0; i < m.pixel_count(); ++i) EXPECT_EQ(raw[i], m[i] ? 255 : 0);
}

TEST(Png, RejectsNonBinaryMask) {
  ScratchDir dir("png");
  Plane<std::uint8_t> g(2, 2, 255);
  g(1, 1) = 128;
  png::write_gray(dir / "g.png", g);
  EXPECT_THROW(png::read_mask(dir / "g.png"), DataError);
}

TEST(Png, RgbRoundTripAtEightBits) {
  ScratchDir dir("png");
  std::mt19937_64 rng(4);
  const RgbImage img = lidarseg::testing::random_image(rng, 6, 9);
  png::write_rgb(dir / "i.png", img);
  const RgbImage back = png::read_rgb(dir / "i.png");
  ASSERT_EQ(back.size, img.size);
  for (std::size_t i = 0; i < img.chw.size(); ++i) EXPECT_NEAR(back.chw[i], img.chw[i], 0.5 / 255 + 1e-6);
}

TEST(Png, MissingOrCorruptFileIsDataError) {
  ScratchDir dir("png");
  EXPECT_THROW(png::read_gray(dir / "absent.png"), DataError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(png::read_gray(dir / "bad.png"), DataError);
}

TEST(MaskFiles, SaveAndLoadSparseGroundTruth) {
  ScratchDir dir("masks");
  std::mt19937_64 rng(6);
  const auto gt = lidarseg::testing::random_sparse_gt(rng, 16, 16);
  save_masks(dir / "f", gt);
  EXPECT_TRUE(std::filesystem::exists(dir / "f_gt.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "f_valid.png"));
  EXPECT_EQ(load_masks(gt_path(dir / "f"), valid_path(dir / "f")), gt);
}
