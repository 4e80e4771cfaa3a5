#pragma once

// Line-delimited JSON dataset manifests and dense/sparse supervision mixing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lidarseg/maskgen.hpp"
#include "lidarseg/plane.hpp"

namespace lidarseg {

enum class SupervisionKind { Dense, Sparse };
enum class Split { Train, Val };

std::string to_string(SupervisionKind k);
std::string to_string(Split s);

struct ManifestRecord {
  std::filesystem::path image;
  std::filesystem::path gt;
  std::filesystem::path valid;
  SupervisionKind kind = SupervisionKind::Dense;
  Split split = Split::Train;
  std::string id;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

// Parses one manifest line. Relative paths are resolved against `base_dir`.
ManifestRecord parse_manifest_line(const std::string& line, const std::filesystem::path& base_dir);

// Blank lines are skipped. Errors carry the 1-based line number or the missing path.
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path, bool check_files = true);

// Paths are written relative to the manifest's directory when they live below it.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::string manifest_line(const ManifestRecord& record, const std::filesystem::path& base_dir);

struct MixPlan {
  double ratio_dense = 1.0;
  std::uint64_t seed = 0;
};

// One record per train frame: floor(ratio_dense * n) frames keep their dense
// variant and the rest use their sparse variant. Validation frames always use
// their dense variant. Output: train records in first-appearance order, then val.
std::vector<ManifestRecord> apply_mix(const std::vector<ManifestRecord>& records, const MixPlan& plan);

// Every train frame contributes both its dense and its sparse variant.
std::vector<ManifestRecord> apply_union(const std::vector<ManifestRecord>& records);

std::vector<ManifestRecord> filter_split(const std::vector<ManifestRecord>& records, Split split);

// Images and masks of a manifest, decoded once and shared by several trainings.
struct LoadedFrame {
  std::string id;
  Split split = Split::Train;
  RgbImage image;
  std::optional<SparseGroundTruth> dense;
  std::optional<SparseGroundTruth> sparse;

  [[nodiscard]] const SparseGroundTruth& supervision(SupervisionKind k) const;
};

class LoadedDataset {
 public:
  LoadedDataset() = default;
  // Throws DataError naming the offending path; Dense records must carry an all-ones valid plane.
  static LoadedDataset load(const std::vector<ManifestRecord>& records);

  [[nodiscard]] const std::vector<ManifestRecord>& records() const { return records_; }
  [[nodiscard]] const LoadedFrame& frame(const std::string& id) const;
  [[nodiscard]] const std::vector<LoadedFrame>& frames() const { return frames_; }
  [[nodiscard]] std::vector<const LoadedFrame*> split(Split s) const;

 private:
  std::vector<ManifestRecord> records_;
  std::vector<LoadedFrame> frames_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace lidarseg
