#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lidarseg/plane.hpp"

namespace lidarseg::png {

// 8-bit single-channel PNG; pixel values written verbatim.
void write_gray(const std::filesystem::path& path, const Plane<std::uint8_t>& plane);
Plane<std::uint8_t> read_gray(const std::filesystem::path& path);

// 8-bit RGB PNG; channel values in [0,1] are quantized with round-to-nearest.
void write_rgb(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_rgb(const std::filesystem::path& path);

// Binary {0,1} mask stored as {0,255}. Reading treats any nonzero pixel as 1.
void write_mask(const std::filesystem::path& path, const MaskPlane& binary);
MaskPlane read_mask(const std::filesystem::path& path);

std::uint8_t quantize(float v);

}  // namespace lidarseg::png
