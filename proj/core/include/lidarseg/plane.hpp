#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lidarseg {

// Numeric buffers start on a 64-byte boundary. Vectorized reductions peel
// according to the address, so a fixed alignment keeps results bitwise
// reproducible from run to run.
inline constexpr std::size_t kBufferAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kBufferAlignment}); }
  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

struct ImageSize {
  int width = 0;
  int height = 0;

  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

inline std::string to_string(ImageSize s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height);
}

// Row-major single-channel H x W grid.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{})
      : size_{width, height}, data_(checked_count(height, width), fill) {}
  explicit Plane(ImageSize size, T fill = T{}) : Plane(size.height, size.width, fill) {}

  [[nodiscard]] int width() const { return size_.width; }
  [[nodiscard]] int height() const { return size_.height; }
  [[nodiscard]] ImageSize size() const { return size_; }
  [[nodiscard]] std::size_t pixel_count() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<T> values() { return data_; }
  [[nodiscard]] std::span<const T> values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  static std::size_t checked_count(int height, int width) {
    if (height < 0 || width < 0) throw std::invalid_argument("plane dimensions must be non-negative");
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(size_.width) +
           static_cast<std::size_t>(col);
  }

  ImageSize size_{};
  AlignedVector<T> data_;
};

using MaskPlane = Plane<std::uint8_t>;

// Planar RGB image with channel values in [0, 1]; storage is channel-major (C, H, W).
struct RgbImage {
  ImageSize size{};
  AlignedVector<float> chw;

  RgbImage() = default;
  explicit RgbImage(ImageSize s) : size(s), chw(3 * s.pixel_count(), 0.0f) {}

  float& at(int channel, int row, int col) {
    return chw[(static_cast<std::size_t>(channel) * size.height + row) * size.width + col];
  }
  [[nodiscard]] float at(int channel, int row, int col) const {
    return chw[(static_cast<std::size_t>(channel) * size.height + row) * size.width + col];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline RgbImage hflip(const RgbImage& img) {
  RgbImage out(img.size);
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < img.size.height; ++r)
      for (int x = 0; x < img.size.width; ++x) out.at(c, r, img.size.width - 1 - x) = img.at(c, r, x);
  return out;
}

template <typename T>
Plane<T> hflip(const Plane<T>& p) {
  Plane<T> out(p.size());
  for (int r = 0; r < p.height(); ++r)
    for (int x = 0; x < p.width(); ++x) out(r, p.width() - 1 - x) = p(r, x);
  return out;
}

}  // namespace lidarseg
