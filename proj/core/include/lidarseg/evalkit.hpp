#pragma once

// Road IoU, model evaluation, and the supervision-condition experiments.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lidarseg/datastore.hpp"
#include "lidarseg/loss.hpp"
#include "lidarseg/micronet.hpp"
#include "lidarseg/train.hpp"

namespace lidarseg {

// |P ∩ G| / |P ∪ G|; two empty masks score 1.
double iou(const MaskPlane& pred, const MaskPlane& gt);

// mask[i] = probs[i] >= threshold.
MaskPlane binarize(const PredictionPlane& pred, double threshold = 0.5);

// Mean IoU of the binarized predictions against each frame's dense mask.
double evaluate(const MicroNet<float>& net, std::span<const LoadedFrame* const> frames, double threshold = 0.5);
double evaluate(const MicroNet<float>& net, const LoadedDataset& data, double threshold = 0.5);
double evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                double threshold = 0.5);

// Prediction drawn in translucent red over the input image.
RgbImage overlay(const RgbImage& image, const MaskPlane& pred);

inline constexpr const char* kConditionDense = "2D only (baseline)";
inline constexpr const char* kConditionSparse = "Projected 3D only";
inline constexpr const char* kConditionMixed = "mix 2D + projected 3D";

struct ConditionResult {
  std::string name;
  MixMode mode = MixMode::Partition;
  double ratio_dense = 1.0;
  double iou = 0.0;
  TrainResult training;
};

struct SweepPoint {
  double ratio_dense = 0.0;
  double iou = 0.0;
  TrainResult training;
};

struct ExperimentReport {
  TrainConfig config;
  std::vector<ConditionResult> conditions;
  std::vector<SweepPoint> sweep;
  double runtime_seconds = 0.0;
};

// Three trainings with identical seeds: dense only, sparse only, and the union
// of both mask sets.
ExperimentReport run_conditions(const LoadedDataset& data, const TrainConfig& cfg, std::ostream* progress = nullptr);

// One partition-mode training per ratio.
ExperimentReport run_ratio_sweep(const LoadedDataset& data, std::span<const double> ratios, const TrainConfig& cfg,
                                 std::ostream* progress = nullptr);

// "condition,iou" and "ratio_dense,iou" tables.
std::string conditions_csv(const ExperimentReport& report);
std::string sweep_csv(const ExperimentReport& report);

}  // namespace lidarseg
