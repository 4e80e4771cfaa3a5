#include "lidarseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lidarseg/errors.hpp"

namespace lidarseg {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PredictionPlane PredictionPlane::from_logits(Plane<double> logits) {
  PredictionPlane p;
  p.probs = Plane<double>(logits.size());
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) p.probs[i] = sigmoid(logits[i]);
  p.logits = std::move(logits);
  return p;
}

PredictionPlane PredictionPlane::from_probs(Plane<double> probs) {
  PredictionPlane p;
  p.probs = std::move(probs);
  return p;
}

double pairwise_sum(std::span<const double> v) {
  constexpr std::size_t kLeaf = 16;
  if (v.size() <= kLeaf) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

void check_finite(const PredictionPlane& pred) {
  for (double p : pred.probs)
    if (std::isnan(p)) throw NumericalError("NaN in predicted probabilities");
  if (pred.logits)
    for (double l : *pred.logits)
      if (std::isnan(l)) throw NumericalError("NaN in predicted logits");
}

double bce_term(double p, std::uint8_t y) {
  const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  return y ? std::log(pc) : std::log(1.0 - pc);
}

// Shared by the masked and unmasked variants so the dense case is bitwise identical.
LossValue reduce(const PredictionPlane& pred, const MaskPlane& labels, const MaskPlane* valid, std::size_t count) {
  const std::size_t n = pred.probs.pixel_count();
  LossValue out{0.0, Plane<double>(pred.size(), 0.0)};
  if (count == 0) return out;
  std::vector<double> terms(n);
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = valid ? static_cast<double>((*valid)[i]) : 1.0;
    if (m == 0.0) {
      terms[i] = 0.0;
      continue;
    }
    const double p = pred.probs[i];
    const double y = labels[i];
    terms[i] = m * bce_term(p, labels[i]);
    out.grad_wrt_logits[i] = m * (p - y) * inv;
  }
  out.value = -pairwise_sum(terms) * inv;
  if (!std::isfinite(out.value)) throw NumericalError("masked loss is not finite");
  return out;
}

}  // namespace

LossValue masked_bce(const PredictionPlane& pred, const SparseGroundTruth& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("prediction " + to_string(pred.size()) + " does not match ground truth " +
                                to_string(gt.size()));
  check_finite(pred);
  return reduce(pred, gt.labels(), &gt.valid(), gt.valid_count());
}

LossValue mean_bce(const PredictionPlane& pred, const MaskPlane& labels) {
  if (pred.size() != labels.size())
    throw std::invalid_argument("prediction " + to_string(pred.size()) + " does not match labels " +
                                to_string(labels.size()));
  check_finite(pred);
  return reduce(pred, labels, nullptr, labels.pixel_count());
}

BatchLoss batch_loss(std::span<const LossItem> items) {
  if (items.empty()) throw std::invalid_argument("batch_loss: empty batch");
  BatchLoss out;
  out.grads.reserve(items.size());
  std::vector<double> values;
  values.reserve(items.size());
  const double inv = 1.0 / static_cast<double>(items.size());
  for (const auto& item : items) {
    LossValue lv = masked_bce(*item.pred, *item.gt);
    values.push_back(lv.value);
    for (double& g : lv.grad_wrt_logits) g *= inv;
    out.grads.push_back(std::move(lv.grad_wrt_logits));
  }
  out.value = pairwise_sum(values) * inv;
  return out;
}

}  // namespace lidarseg
