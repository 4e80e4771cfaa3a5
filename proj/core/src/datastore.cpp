#include "lidarseg/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <stdexcept>

#include "lidarseg/errors.hpp"
#include "lidarseg/png_io.hpp"

namespace lidarseg {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SupervisionKind k) { return k == SupervisionKind::Dense ? "dense" : "sparse"; }
std::string to_string(Split s) { return s == Split::Train ? "train" : "val"; }

namespace {

std::string required_string(const json& obj, const char* key) {
  if (!obj.contains(key)) throw DataError(std::string("missing key '") + key + "'");
  if (!obj.at(key).is_string()) throw DataError(std::string("key '") + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

fs::path resolve(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  const fs::path rel = p.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

}  // namespace

ManifestRecord parse_manifest_line(const std::string& line, const fs::path& base_dir) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("record must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    static const std::set<std::string> known{"image", "gt", "valid", "kind", "split", "id"};
    if (!known.count(key)) throw DataError("unknown key '" + key + "'");
  }
  ManifestRecord r;
  r.image = resolve(required_string(obj, "image"), base_dir);
  r.gt = resolve(required_string(obj, "gt"), base_dir);
  r.valid = resolve(required_string(obj, "valid"), base_dir);
  const std::string kind = required_string(obj, "kind");
  if (kind == "dense") r.kind = SupervisionKind::Dense;
  else if (kind == "sparse") r.kind = SupervisionKind::Sparse;
  else throw DataError("unknown kind '" + kind + "' (expected \"dense\" or \"sparse\")");
  const std::string split = required_string(obj, "split");
  if (split == "train") r.split = Split::Train;
  else if (split == "val") r.split = Split::Val;
  else throw DataError("unknown split '" + split + "' (expected \"train\" or \"val\")");
  r.id = required_string(obj, "id");
  if (r.id.empty()) throw DataError("empty frame id");
  return r;
}

std::vector<ManifestRecord> load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestRecord> out;
  std::set<std::pair<std::string, SupervisionKind>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ManifestRecord r;
    try {
      r = parse_manifest_line(line, base);
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert({r.id, r.kind}).second)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate " + to_string(r.kind) +
                      " record for frame '" + r.id + "'");
    if (check_files)
      for (const auto* p : {&r.image, &r.gt, &r.valid})
        if (!fs::exists(*p))
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": missing file " + p->string());
    out.push_back(std::move(r));
  }
  return out;
}

std::string manifest_line(const ManifestRecord& r, const fs::path& base_dir) {
  // Keys are emitted in a fixed order so manifests are byte-reproducible.
  std::string s = "{";
  auto field = [&](const char* key, const std::string& value, bool last = false) {
    s += json(key).dump() + ":" + json(value).dump() + (last ? "" : ",");
  };
  field("image", relative_to(r.image, base_dir));
  field("gt", relative_to(r.gt, base_dir));
  field("valid", relative_to(r.valid, base_dir));
  field("kind", to_string(r.kind));
  field("split", to_string(r.split));
  field("id", r.id, true);
  return s + "}";
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  const fs::path base = path.parent_path();
  for (const auto& r : records) out << manifest_line(r, base) << '\n';
  if (!out) throw DataError("failed writing manifest: " + path.string());
}

namespace {

struct FrameVariants {
  std::string id;
  Split split;
  const ManifestRecord* dense = nullptr;
  const ManifestRecord* sparse = nullptr;
};

std::vector<FrameVariants> group_frames(const std::vector<ManifestRecord>& records) {
  std::vector<FrameVariants> frames;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.id, frames.size());
    if (inserted) frames.push_back({r.id, r.split});
    auto& f = frames[it->second];
    if (f.split != r.split) throw DataError("frame '" + r.id + "' appears in both train and val splits");
    (r.kind == SupervisionKind::Dense ? f.dense : f.sparse) = &r;
  }
  return frames;
}

void append_val(const std::vector<FrameVariants>& frames, std::vector<ManifestRecord>& out) {
  for (const auto& f : frames) {
    if (f.split != Split::Val) continue;
    if (!f.dense) throw DataError("validation frame '" + f.id + "' lacks a dense variant");
    out.push_back(*f.dense);
  }
}

}  // namespace

std::vector<ManifestRecord> apply_mix(const std::vector<ManifestRecord>& records, const MixPlan& plan) {
  if (!(plan.ratio_dense >= 0.0 && plan.ratio_dense <= 1.0))
    throw std::invalid_argument("ratio_dense must lie in [0, 1]");
  const auto frames = group_frames(records);
  std::vector<const FrameVariants*> train;
  for (const auto& f : frames) {
    if (f.split != Split::Train) continue;
    if (!f.dense || !f.sparse)
      throw DataError("train frame '" + f.id + "' lacks a " + std::string(f.dense ? "sparse" : "dense") + " variant");
    train.push_back(&f);
  }
  const std::size_t n = train.size();
  const auto n_dense = static_cast<std::size_t>(std::floor(plan.ratio_dense * static_cast<double>(n)));

  // The first n_dense entries of a seeded permutation receive dense supervision.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(plan.seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<bool> dense(n, false);
  for (std::size_t i = 0; i < n_dense; ++i) dense[perm[i]] = true;

  std::vector<ManifestRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(dense[i] ? *train[i]->dense : *train[i]->sparse);
  append_val(frames, out);
  return out;
}

std::vector<ManifestRecord> apply_union(const std::vector<ManifestRecord>& records) {
  const auto frames = group_frames(records);
  std::vector<ManifestRecord> out;
  for (const auto& f : frames) {
    if (f.split != Split::Train) continue;
    if (!f.dense || !f.sparse)
      throw DataError("train frame '" + f.id + "' lacks a " + std::string(f.dense ? "sparse" : "dense") + " variant");
    out.push_back(*f.dense);
    out.push_back(*f.sparse);
  }
  append_val(frames, out);
  return out;
}

std::vector<ManifestRecord> filter_split(const std::vector<ManifestRecord>& records, Split split) {
  std::vector<ManifestRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const ManifestRecord& r) { return r.split == split; });
  return out;
}

const SparseGroundTruth& LoadedFrame::supervision(SupervisionKind k) const {
  const auto& gt = k == SupervisionKind::Dense ? dense : sparse;
  if (!gt) throw DataError("frame '" + id + "' has no " + to_string(k) + " supervision");
  return *gt;
}

LoadedDataset LoadedDataset::load(const std::vector<ManifestRecord>& records) {
  LoadedDataset ds;
  ds.records_ = records;
  std::map<fs::path, RgbImage> images;
  for (const auto& r : records) {
    auto [it, inserted] = ds.index_.try_emplace(r.id, ds.frames_.size());
    if (inserted) {
      LoadedFrame f;
      f.id = r.id;
      f.split = r.split;
      auto img = images.find(r.image);
      if (img == images.end()) img = images.emplace(r.image, png::read_rgb(r.image)).first;
      f.image = img->second;
      ds.frames_.push_back(std::move(f));
    }
    LoadedFrame& f = ds.frames_[it->second];
    if (f.split != r.split) throw DataError("frame '" + r.id + "' appears in both train and val splits");
    SparseGroundTruth gt = load_masks(r.gt, r.valid);
    if (gt.size() != f.image.size)
      throw DataError(r.gt.string() + ": mask size " + to_string(gt.size()) + " does not match image " +
                      to_string(f.image.size));
    if (r.kind == SupervisionKind::Dense && !gt.is_dense())
      throw DataError(r.valid.string() + ": dense record must have an all-ones valid plane");
    (r.kind == SupervisionKind::Dense ? f.dense : f.sparse) = std::move(gt);
  }
  return ds;
}

const LoadedFrame& LoadedDataset::frame(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown frame id '" + id + "'");
  return frames_[it->second];
}

std::vector<const LoadedFrame*> LoadedDataset::split(Split s) const {
  std::vector<const LoadedFrame*> out;
  for (const auto& f : frames_)
    if (f.split == s) out.push_back(&f);
  return out;
}

}  // namespace lidarseg
