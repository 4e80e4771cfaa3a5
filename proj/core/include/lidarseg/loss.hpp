#pragma once

// Masked binary cross-entropy over a per-pixel validity mask.
//
//   L = -(1/M) * sum_i m_i * (y_i log p_i + (1 - y_i) log(1 - p_i))
//
// where m is the validity plane and M its population count. With an all-ones
// validity plane this is the ordinary mean BCE over the image.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lidarseg/maskgen.hpp"
#include "lidarseg/plane.hpp"

namespace lidarseg {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before the log.
inline constexpr double kProbEpsilon = 1e-7;

struct PredictionPlane {
  Plane<double> probs;
  std::optional<Plane<double>> logits;

  static PredictionPlane from_logits(Plane<double> logits);
  static PredictionPlane from_probs(Plane<double> probs);
  [[nodiscard]] ImageSize size() const { return probs.size(); }
};

double sigmoid(double x);

struct LossValue {
  double value = 0.0;
  Plane<double> grad_wrt_logits;  // exactly zero where the validity mask is zero
};

LossValue masked_bce(const PredictionPlane& pred, const SparseGroundTruth& gt);

// Plain mean BCE over every pixel (no mask).
LossValue mean_bce(const PredictionPlane& pred, const MaskPlane& labels);

struct BatchLoss {
  double value = 0.0;
  std::vector<Plane<double>> grads;  // per item, already scaled by 1/batch
};

struct LossItem {
  const PredictionPlane* pred;
  const SparseGroundTruth* gt;
};

// Unweighted mean of per-item masked losses. Throws on an empty batch.
BatchLoss batch_loss(std::span<const LossItem> items);

// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> values);

}  // namespace lidarseg
