#include "lidarseg/maskgen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "lidarseg/errors.hpp"
#include "lidarseg/png_io.hpp"

namespace lidarseg {

SparseGroundTruth::SparseGroundTruth(MaskPlane labels, MaskPlane valid)
    : labels_(std::move(labels)), valid_(std::move(valid)) {
  if (labels_.size() != valid_.size())
    throw std::invalid_argument("label plane " + to_string(labels_.size()) + " does not match validity plane " +
                                to_string(valid_.size()));
  for (std::size_t i = 0; i < valid_.pixel_count(); ++i) {
    if (labels_[i] > 1 || valid_[i] > 1) throw std::invalid_argument("mask planes must be binary {0,1}");
    if (labels_[i] && !valid_[i]) throw std::invalid_argument("road label outside the valid region");
    valid_count_ += valid_[i];
  }
}

void NoiseConfig::validate() const {
  if (!(density_ratio >= 0.0) || !std::isfinite(density_ratio))
    throw std::invalid_argument("noise density_ratio must be finite and >= 0");
  if (!(region_fraction >= 0.0 && region_fraction <= 1.0))
    throw std::invalid_argument("noise region_fraction must lie in [0, 1]");
}

SparseGroundTruth build_sparse_gt(std::span<const ProjectedPoint> projected, ImageSize dims,
                                  const NoiseConfig& noise) {
  noise.validate();
  // Per-pixel vote: road count minus non-road count. Strict majority for road.
  Plane<int> votes(dims, 0);
  MaskPlane valid(dims, 0);
  for (const auto& p : projected) {
    if (p.pixel.u < 0 || p.pixel.u >= dims.width || p.pixel.v < 0 || p.pixel.v >= dims.height)
      throw std::invalid_argument("projected pixel (" + std::to_string(p.pixel.u) + ", " +
                                  std::to_string(p.pixel.v) + ") outside " + to_string(dims));
    valid(p.pixel.v, p.pixel.u) = 1;
    votes(p.pixel.v, p.pixel.u) += p.label == PointLabel::Road ? 1 : -1;
  }
  MaskPlane labels(dims, 0);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) labels[i] = votes[i] > 0 ? 1 : 0;

  const auto requested = static_cast<std::size_t>(std::ceil(noise.density_ratio * static_cast<double>(projected.size())));
  const int region_rows = static_cast<int>(std::floor(noise.region_fraction * dims.height));
  if (requested > 0 && region_rows > 0) {
    std::vector<std::size_t> free;
    for (int r = 0; r < region_rows; ++r)
      for (int c = 0; c < dims.width; ++c)
        if (!valid(r, c)) free.push_back(static_cast<std::size_t>(r) * dims.width + c);
    const std::size_t count = std::min(requested, free.size());
    // Partial Fisher-Yates: the first `count` entries are a uniform sample without replacement.
    std::mt19937_64 rng(noise.seed);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, free.size() - 1);
      std::swap(free[i], free[pick(rng)]);
      valid[free[i]] = 1;
    }
  }
  return {std::move(labels), std::move(valid)};
}

SparseGroundTruth densify(const MaskPlane& dense_labels) {
  return {dense_labels, MaskPlane(dense_labels.size(), 1)};
}

SparseGroundTruth hflip(const SparseGroundTruth& gt) {
  return {hflip(gt.labels()), hflip(gt.valid())};
}

std::filesystem::path gt_path(const std::filesystem::path& stem) {
  return stem.parent_path() / (stem.filename().string() + "_gt.png");
}

std::filesystem::path valid_path(const std::filesystem::path& stem) {
  return stem.parent_path() / (stem.filename().string() + "_valid.png");
}

void save_masks(const std::filesystem::path& stem, const SparseGroundTruth& gt) {
  png::write_mask(gt_path(stem), gt.labels());
  png::write_mask(valid_path(stem), gt.valid());
}

SparseGroundTruth load_masks(const std::filesystem::path& gt_png, const std::filesystem::path& valid_png) {
  MaskPlane labels = png::read_mask(gt_png);
  MaskPlane valid = png::read_mask(valid_png);
  try {
    return {std::move(labels), std::move(valid)};
  } catch (const std::invalid_argument& e) {
    throw DataError(gt_png.string() + " / " + valid_png.string() + ": " + e.what());
  }
}

}  // namespace lidarseg
