#pragma once

// Sparse road supervision built from projected lidar points.
//
// A SparseGroundTruth pairs a label plane (1 = road) with a validity plane
// marking where the loss is evaluated. Dense 2D annotations are the special
// case of an all-ones validity plane.

#include <cstdint>
#include <filesystem>
#include <span>

#include "lidarseg/geometry.hpp"
#include "lidarseg/plane.hpp"

namespace lidarseg {

class SparseGroundTruth {
 public:
  SparseGroundTruth() = default;
  // Throws std::invalid_argument on mismatched dims, non-binary values, or a
  // road label outside the valid region.
  SparseGroundTruth(MaskPlane labels, MaskPlane valid);

  [[nodiscard]] const MaskPlane& labels() const { return labels_; }
  [[nodiscard]] const MaskPlane& valid() const { return valid_; }
  [[nodiscard]] std::size_t valid_count() const { return valid_count_; }
  [[nodiscard]] std::size_t pixel_count() const { return labels_.pixel_count(); }
  [[nodiscard]] ImageSize size() const { return labels_.size(); }
  [[nodiscard]] bool is_dense() const { return valid_count_ == pixel_count(); }

  friend bool operator==(const SparseGroundTruth&, const SparseGroundTruth&) = default;

 private:
  MaskPlane labels_;
  MaskPlane valid_;
  std::size_t valid_count_ = 0;
};

struct NoiseConfig {
  double density_ratio = 0.5;    // noise pixels per projected lidar point
  double region_fraction = 0.5;  // top fraction of rows eligible for noise
  std::uint64_t seed = 0;

  void validate() const;
};

SparseGroundTruth build_sparse_gt(std::span<const ProjectedPoint> projected, ImageSize dims,
                                  const NoiseConfig& noise);

SparseGroundTruth densify(const MaskPlane& dense_labels);

SparseGroundTruth hflip(const SparseGroundTruth& gt);

// Writes <stem>_gt.png and <stem>_valid.png.
void save_masks(const std::filesystem::path& stem, const SparseGroundTruth& gt);
std::filesystem::path gt_path(const std::filesystem::path& stem);
std::filesystem::path valid_path(const std::filesystem::path& stem);
SparseGroundTruth load_masks(const std::filesystem::path& gt_png, const std::filesystem::path& valid_png);

}  // namespace lidarseg
