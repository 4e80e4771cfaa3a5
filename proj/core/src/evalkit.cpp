#include "lidarseg/evalkit.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "lidarseg/errors.hpp"

namespace lidarseg {

double iou(const MaskPlane& pred, const MaskPlane& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("iou: prediction " + to_string(pred.size()) + " does not match ground truth " +
                                to_string(gt.size()));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MaskPlane binarize(const PredictionPlane& pred, double threshold) {
  MaskPlane out(pred.size(), 0);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) out[i] = pred.probs[i] >= threshold ? 1 : 0;
  return out;
}

double evaluate(const MicroNet<float>& net, std::span<const LoadedFrame* const> frames, double threshold) {
  if (frames.empty()) throw DataError("evaluate: no validation frames");
  std::vector<double> scores;
  scores.reserve(frames.size());
  for (const LoadedFrame* f : frames) {
    const MaskPlane pred = binarize(net.predict(f->image), threshold);
    scores.push_back(iou(pred, f->supervision(SupervisionKind::Dense).labels()));
  }
  return pairwise_sum(scores) / static_cast<double>(scores.size());
}

double evaluate(const MicroNet<float>& net, const LoadedDataset& data, double threshold) {
  return evaluate(net, data.split(Split::Val), threshold);
}

double evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, double threshold) {
  const MicroNet<float> net = load_checkpoint(checkpoint);
  auto val = filter_split(load_manifest(manifest), Split::Val);
  std::erase_if(val, [](const ManifestRecord& r) { return r.kind != SupervisionKind::Dense; });
  if (val.empty()) throw DataError(manifest.string() + ": no dense validation records");
  return evaluate(net, LoadedDataset::load(val), threshold);
}

RgbImage overlay(const RgbImage& image, const MaskPlane& pred) {
  if (pred.size() != image.size) throw std::invalid_argument("overlay: mask does not match image");
  constexpr float kAlpha = 0.45f;
  constexpr float kTint[3] = {1.0f, 0.1f, 0.1f};
  RgbImage out = image;
  for (int r = 0; r < image.size.height; ++r)
    for (int c = 0; c < image.size.width; ++c)
      if (pred(r, c))
        for (int ch = 0; ch < 3; ++ch) out.at(ch, r, c) = (1.0f - kAlpha) * image.at(ch, r, c) + kAlpha * kTint[ch];
  return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ConditionResult run_one(const LoadedDataset& data, TrainConfig cfg, std::string name, MixMode mode, double ratio,
                        std::ostream* progress) {
  cfg.mix_mode = mode;
  cfg.mix_ratio = ratio;
  if (progress) *progress << "== " << name << " (" << to_string(mode) << ", ratio_dense " << ratio << ")\n";
  ConditionResult r{std::move(name), mode, ratio, 0.0, train(data, cfg, progress)};
  r.iou = evaluate(r.training.net, data, cfg.threshold);
  return r;
}

}  // namespace

ExperimentReport run_conditions(const LoadedDataset& data, const TrainConfig& cfg, std::ostream* progress) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = cfg;
  report.conditions.push_back(run_one(data, cfg, kConditionDense, MixMode::Partition, 1.0, progress));
  report.conditions.push_back(run_one(data, cfg, kConditionSparse, MixMode::Partition, 0.0, progress));
  report.conditions.push_back(run_one(data, cfg, kConditionMixed, MixMode::Union, 1.0, progress));
  report.runtime_seconds = seconds_since(t0);
  return report;
}

ExperimentReport run_ratio_sweep(const LoadedDataset& data, std::span<const double> ratios, const TrainConfig& cfg,
                                 std::ostream* progress) {
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("sweep ratios must lie in [0, 1]");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = cfg;
  for (double ratio : ratios) {
    char name[48];
    std::snprintf(name, sizeof name, "ratio %.4g", ratio);
    ConditionResult r = run_one(data, cfg, name, MixMode::Partition, ratio, progress);
    report.sweep.push_back({ratio, r.iou, std::move(r.training)});
  }
  report.runtime_seconds = seconds_since(t0);
  return report;
}

std::string conditions_csv(const ExperimentReport& report) {
  std::string out = "condition,iou\n";
  char line[128];
  for (const auto& c : report.conditions) {
    std::snprintf(line, sizeof line, "%s,%.6f\n", c.name.c_str(), c.iou);
    out += line;
  }
  return out;
}

std::string sweep_csv(const ExperimentReport& report) {
  std::string out = "ratio_dense,iou\n";
  char line[96];
  for (const auto& p : report.sweep) {
    std::snprintf(line, sizeof line, "%.4g,%.6f\n", p.ratio_dense, p.iou);
    out += line;
  }
  return out;
}

}  // namespace lidarseg
