#include "lidarseg/ply_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "lidarseg/errors.hpp"

namespace lidarseg::ply {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> tok;
  for (std::string t; ss >> t;) tok.push_back(t);
  return tok;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("PLY line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string to_string(const LabeledPointCloud& cloud) {
  cloud.validate();
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\nproperty uchar label\nend_header\n";
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const int n = std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %d\n", static_cast<float>(p.x),
                                static_cast<float>(p.y), static_cast<float>(p.z), static_cast<int>(cloud.labels[i]));
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

LabeledPointCloud parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || line != "ply") throw DataError("PLY: missing 'ply' magic on line 1");
  if (!next() || split_ws(line) != std::vector<std::string>{"format", "ascii", "1.0"})
    throw DataError("PLY: only 'format ascii 1.0' is supported");

  long long vertex_count = -1;
  std::vector<std::string> props;
  bool in_vertex = false;
  for (;;) {
    if (!next()) throw DataError("PLY: header not terminated by end_header");
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "element") {
      if (tok.size() != 3) throw DataError("PLY line " + std::to_string(line_no) + ": malformed element");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        try {
          vertex_count = std::stoll(tok[2]);
        } catch (const std::exception&) {
          throw DataError("PLY line " + std::to_string(line_no) + ": bad vertex count");
        }
        if (vertex_count < 0) throw DataError("PLY: negative vertex count");
      } else {
        throw DataError("PLY: unsupported element '" + tok[1] + "'");
      }
    } else if (tok[0] == "property") {
      if (!in_vertex || tok.size() != 3)
        throw DataError("PLY line " + std::to_string(line_no) + ": malformed property");
      props.push_back(tok[2]);
    } else {
      throw DataError("PLY line " + std::to_string(line_no) + ": unexpected header keyword '" + tok[0] + "'");
    }
  }
  if (vertex_count < 0) throw DataError("PLY: missing vertex element");

  int ix = -1, iy = -1, iz = -1, il = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    if (props[i] == "x") ix = i;
    else if (props[i] == "y") iy = i;
    else if (props[i] == "z") iz = i;
    else if (props[i] == "label") il = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw DataError("PLY: vertex element lacks x/y/z properties");
  if (il < 0) throw DataError("PLY: vertex element lacks a label property");

  LabeledPointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  cloud.labels.reserve(static_cast<std::size_t>(vertex_count));
  for (long long i = 0; i < vertex_count; ++i) {
    if (!next()) throw DataError("PLY: expected " + std::to_string(vertex_count) + " vertices, got " + std::to_string(i));
    auto tok = split_ws(line);
    if (tok.size() != props.size())
      throw DataError("PLY line " + std::to_string(line_no) + ": expected " + std::to_string(props.size()) +
                      " values, got " + std::to_string(tok.size()));
    const double label = parse_double(tok[il], line_no);
    if (label != 0.0 && label != 1.0)
      throw DataError("PLY line " + std::to_string(line_no) + ": label must be 0 or 1, got '" + tok[il] + "'");
    cloud.push_back({parse_double(tok[ix], line_no), parse_double(tok[iy], line_no), parse_double(tok[iz], line_no)},
                    label == 1.0 ? PointLabel::Road : PointLabel::NonRoad);
  }
  while (next())
    if (!split_ws(line).empty()) throw DataError("PLY line " + std::to_string(line_no) + ": trailing data after vertices");
  return cloud;
}

void write(const std::filesystem::path& path, const LabeledPointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write point cloud: " + path.string());
  out << to_string(cloud);
  if (!out) throw DataError("failed writing point cloud: " + path.string());
}

LabeledPointCloud read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open point cloud: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace lidarseg::ply
