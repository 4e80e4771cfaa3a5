#pragma once

// Shared helpers for the unit tests: scratch directories and random generators.

#include <filesystem>
#include <random>
#include <string>

#include "lidarseg/geometry.hpp"
#include "lidarseg/maskgen.hpp"
#include "lidarseg/plane.hpp"

namespace lidarseg::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lidarseg_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline MaskPlane random_mask(std::mt19937_64& rng, int h, int w, double p_one = 0.5) {
  std::bernoulli_distribution bit(p_one);
  MaskPlane m(h, w);
  for (auto& v : m) v = bit(rng) ? 1 : 0;
  return m;
}

inline Plane<double> random_plane(std::mt19937_64& rng, int h, int w, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Plane<double> p(h, w);
  for (auto& v : p) v = d(rng);
  return p;
}

// Labels restricted to the valid region so the pair is a legal sparse supervision.
inline SparseGroundTruth random_sparse_gt(std::mt19937_64& rng, int h, int w, double p_valid = 0.3) {
  MaskPlane valid = random_mask(rng, h, w, p_valid);
  MaskPlane labels = random_mask(rng, h, w);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) labels[i] &= valid[i];
  return SparseGroundTruth(std::move(labels), std::move(valid));
}

inline RgbImage random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  RgbImage img(ImageSize{w, h});
  for (auto& v : img.chw) v = d(rng);
  return img;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-3.14159, 3.14159);
  return rot_z(a(rng)) * rot_y(a(rng)) * rot_x(a(rng));
}

inline RigidTransform random_transform(std::mt19937_64& rng, const std::string& from, const std::string& to) {
  std::uniform_real_distribution<double> t(-5.0, 5.0);
  return RigidTransform(random_rotation(rng), Vec3(t(rng), t(rng), t(rng)), from, to);
}

}  // namespace lidarseg::testing
