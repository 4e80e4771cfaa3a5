#pragma once

#include <filesystem>
#include <string>

#include "lidarseg/geometry.hpp"

namespace lidarseg::ply {

// ASCII PLY with vertex properties x, y, z (float) and label (uchar: 0 non-road, 1 road).
std::string to_string(const LabeledPointCloud& cloud);
LabeledPointCloud parse(const std::string& text);

void write(const std::filesystem::path& path, const LabeledPointCloud& cloud);
LabeledPointCloud read(const std::filesystem::path& path);

}  // namespace lidarseg::ply
