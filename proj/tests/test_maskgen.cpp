#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lidarseg/maskgen.hpp"
#include "support.hpp"

using namespace lidarseg;

namespace {

constexpr ImageSize k64{64, 64};

NoiseConfig no_noise() { return NoiseConfig{0.0, 0.5, 0}; }

std::size_t popcount(const MaskPlane& m) {
  std::size_t n = 0;
  for (auto v : m) n += v;
  return n;
}

std::vector<ProjectedPoint> random_points(std::mt19937_64& rng, ImageSize dims, int n, int min_row = 0) {
  std::uniform_int_distribution<int> u(0, dims.width - 1), v(min_row, dims.height - 1);
  std::bernoulli_distribution road(0.5);
  std::vector<ProjectedPoint> pts;
  for (int i = 0; i < n; ++i)
    pts.push_back({{u(rng), v(rng)}, road(rng) ? PointLabel::Road : PointLabel::NonRoad});
  return pts;
}

}  // namespace

TEST(SparseGroundTruth, RejectsInconsistentPlanes) {
  EXPECT_THROW(SparseGroundTruth(MaskPlane(2, 2), MaskPlane(2, 3)), std::invalid_argument);
  MaskPlane labels(2, 2, 0), valid(2, 2, 0);
  labels(0, 0) = 1;
  EXPECT_THROW(SparseGroundTruth(labels, valid), std::invalid_argument);
  valid(0, 0) = 2;
  EXPECT_THROW(SparseGroundTruth(labels, valid), std::invalid_argument);
}

TEST(BuildSparseGt, SingleRoadPoint) {
  const std::vector<ProjectedPoint> pts{{{3, 7}, PointLabel::Road}};
  const auto gt = build_sparse_gt(pts, k64, no_noise());
  EXPECT_EQ(gt.labels()(7, 3), 1);
  EXPECT_EQ(gt.valid()(7, 3), 1);
  EXPECT_EQ(gt.valid_count(), 1u);
  EXPECT_EQ(gt.pixel_count(), 64u * 64u);
}

TEST(BuildSparseGt, TieGoesToNonRoad) {
  const std::vector<ProjectedPoint> pts{{{5, 5}, PointLabel::Road}, {{5, 5}, PointLabel::NonRoad}};
  const auto gt = build_sparse_gt(pts, k64, no_noise());
  EXPECT_EQ(gt.labels()(5, 5), 0);
  EXPECT_EQ(gt.valid()(5, 5), 1);
}

TEST(BuildSparseGt, MajorityRuleMatchesEnumerationOracle) {
  // Every label sequence of length 1..6 dropped on one pixel, in every order.
  for (int n = 1; n <= 6; ++n) {
    for (int bits = 0; bits < (1 << n); ++bits) {
      std::vector<ProjectedPoint> pts;
      int road = 0;
      for (int i = 0; i < n; ++i) {
        const bool r = (bits >> i) & 1;
        road += r;
        pts.push_back({{2, 1}, r ? PointLabel::Road : PointLabel::NonRoad});
      }
      const auto gt = build_sparse_gt(pts, ImageSize{4, 4}, no_noise());
      const int expected = road > n - road ? 1 : 0;
      ASSERT_EQ(gt.labels()(1, 2), expected) << "n=" << n << " bits=" << bits;
      ASSERT_EQ(gt.valid_count(), 1u);
    }
  }
}

TEST(BuildSparseGt, NoiseCountWithoutCollisions) {
  // 100 distinct points in the lower half; 50 noise pixels above.
  std::vector<ProjectedPoint> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({{i % 64, 40 + i / 64}, PointLabel::Road});
  const auto gt = build_sparse_gt(pts, k64, NoiseConfig{0.5, 0.5, 9});
  EXPECT_EQ(gt.valid_count(), 150u);
  EXPECT_EQ(popcount(gt.labels()), 100u);
}

TEST(BuildSparseGt, NoiseCountRoundsUp) {
  const std::vector<ProjectedPoint> pts{{{0, 60}, PointLabel::Road}, {{1, 60}, PointLabel::Road},
                                        {{2, 60}, PointLabel::Road}};
  const auto gt = build_sparse_gt(pts, k64, NoiseConfig{0.5, 0.5, 1});
  EXPECT_EQ(gt.valid_count(), 3u + 2u);  // ceil(1.5)
}

TEST(BuildSparseGt, NoiseClampsToFreeRegion) {
  // 4x4 image, upper half is 8 pixels; two of them already hold points.
  const std::vector<ProjectedPoint> pts{{{0, 0}, PointLabel::Road}, {{1, 1}, PointLabel::NonRoad}};
  const auto gt = build_sparse_gt(pts, ImageSize{4, 4}, NoiseConfig{100.0, 0.5, 3});
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(gt.valid()(r, c), 1);
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(gt.valid()(r, c), 0);
  EXPECT_EQ(gt.labels()(0, 0), 1);
  EXPECT_EQ(gt.valid_count(), 8u);
}

TEST(BuildSparseGt, ZeroPointsGivesEmptyMask) {
  const auto gt = build_sparse_gt({}, k64, NoiseConfig{0.5, 0.5, 1});
  EXPECT_EQ(gt.valid_count(), 0u);
  EXPECT_EQ(gt.size(), k64);
}

TEST(BuildSparseGt, RejectsOutOfBoundsAndBadConfig) {
  const std::vector<ProjectedPoint> pts{{{64, 0}, PointLabel::Road}};
  EXPECT_THROW(build_sparse_gt(pts, k64, no_noise()), std::invalid_argument);
  EXPECT_THROW(build_sparse_gt({}, k64, NoiseConfig{-1.0, 0.5, 0}), std::invalid_argument);
  EXPECT_THROW(build_sparse_gt({}, k64, NoiseConfig{0.5, 1.5, 0}), std::invalid_argument);
}

// Property suite over random inputs.
TEST(BuildSparseGtProperty, NoiseInvariants) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(4, 48), count(0, 300);
  std::uniform_real_distribution<double> ratio(0.0, 2.0), frac(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const ImageSize dims{dim(rng), dim(rng)};
    const NoiseConfig noise{ratio(rng), frac(rng), rng()};
    const auto pts = random_points(rng, dims, count(rng));
    const auto base = build_sparse_gt(pts, dims, NoiseConfig{0.0, noise.region_fraction, 0});
    const auto gt = build_sparse_gt(pts, dims, noise);

    ASSERT_EQ(gt.valid_count(), popcount(gt.valid()));
    const int region_rows = static_cast<int>(std::floor(noise.region_fraction * dims.height));
    std::size_t free = 0;
    for (int r = 0; r < region_rows; ++r)
      for (int c = 0; c < dims.width; ++c) free += base.valid()(r, c) == 0;
    const auto requested = static_cast<std::size_t>(std::ceil(noise.density_ratio * pts.size()));
    ASSERT_EQ(gt.valid_count(), base.valid_count() + std::min(requested, free));

    for (int r = 0; r < dims.height; ++r) {
      for (int c = 0; c < dims.width; ++c) {
        // projected pixels keep their label; noise is label 0 and only in the top region
        if (base.valid()(r, c)) {
          ASSERT_EQ(gt.valid()(r, c), 1);
          ASSERT_EQ(gt.labels()(r, c), base.labels()(r, c));
        } else if (gt.valid()(r, c)) {
          ASSERT_LT(r, region_rows);
          ASSERT_EQ(gt.labels()(r, c), 0);
        }
      }
    }
    ASSERT_EQ(build_sparse_gt(pts, dims, noise), gt);  // bit-reproducible
  }
}

TEST(Densify, Examples) {
  const auto zeros = densify(MaskPlane(5, 3, 0));
  EXPECT_EQ(zeros.valid_count(), 15u);
  EXPECT_EQ(popcount(zeros.labels()), 0u);
  EXPECT_TRUE(zeros.is_dense());

  const auto ones = densify(MaskPlane(5, 3, 1));
  EXPECT_EQ(popcount(ones.labels()), 15u);
  EXPECT_EQ(popcount(ones.valid()), 15u);

  MaskPlane checker(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) checker(r, c) = (r + c) % 2;
  const auto cb = densify(checker);
  EXPECT_EQ(popcount(cb.labels()), 8u);
  EXPECT_EQ(cb.valid_count(), 16u);
}

TEST(HFlip, SinglePixelMirrors) {
  MaskPlane labels(6, 10, 0), valid(6, 10, 0);
  valid(2, 3) = 1;
  labels(2, 3) = 1;
  const auto f = hflip(SparseGroundTruth(labels, valid));
  EXPECT_EQ(f.valid()(2, 10 - 1 - 3), 1);
  EXPECT_EQ(f.labels()(2, 6), 1);
  EXPECT_EQ(f.valid_count(), 1u);
}

TEST(HFlip, InvolutionAndDensePreserved) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto gt = lidarseg::testing::random_sparse_gt(rng, 7 + i % 5, 9 + i % 3);
    const auto f = hflip(gt);
    EXPECT_EQ(f.valid_count(), gt.valid_count());
    EXPECT_EQ(hflip(f), gt);
  }
  const auto dense = densify(lidarseg::testing::random_mask(rng, 8, 8));
  const auto fd = hflip(dense);
  EXPECT_TRUE(fd.is_dense());
  EXPECT_EQ(fd.labels(), hflip(dense.labels()));
}
