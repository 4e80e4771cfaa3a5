#include "lidarseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include "lidarseg/errors.hpp"
#include "lidarseg/evalkit.hpp"
#include "lidarseg/seed.hpp"

namespace lidarseg {

std::string to_string(MixMode m) { return m == MixMode::Partition ? "partition" : "union"; }

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw std::invalid_argument("mix_ratio must lie in [0, 1]");
  if (!(lr_initial > 0.0) || !(lr_final > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (lr_final > lr_initial) throw std::invalid_argument("lr_final must not exceed lr_initial");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
}

namespace {

struct TrainingUnit {
  const LoadedFrame* frame;
  std::vector<SupervisionKind> kinds;
};

std::vector<TrainingUnit> select_units(const LoadedDataset& data, const TrainConfig& cfg) {
  const auto selected = cfg.mix_mode == MixMode::Union
                            ? apply_union(data.records())
                            : apply_mix(data.records(), MixPlan{cfg.mix_ratio, cfg.seed});
  std::vector<TrainingUnit> units;
  std::map<std::string, std::size_t> index;
  for (const auto& r : selected) {
    if (r.split != Split::Train) continue;
    auto [it, inserted] = index.try_emplace(r.id, units.size());
    if (inserted) units.push_back({&data.frame(r.id), {}});
    units[it->second].kinds.push_back(r.kind);
  }
  return units;
}

}  // namespace

TrainResult train(const LoadedDataset& data, const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const auto units = select_units(data, cfg);
  if (units.empty()) throw DataError("training set is empty");
  const auto val = data.split(Split::Val);

  TrainResult result{MicroNet<float>::initialized(cfg.seed), {}};
  MicroNet<float>& net = result.net;
  OptimizerState<float> opt(net.parameter_count(), cfg.adam);
  const LrSchedule schedule{cfg.lr_initial, cfg.lr_final, cfg.epochs};
  AlignedVector<float> grads(net.parameter_count());

  // Batch order and flips come from one generator, independent of the mix selection.
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7EA1));
  std::bernoulli_distribution flip_coin(0.5);
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<ForwardTrace<float>> traces(bs);
  std::vector<PredictionPlane> preds(bs);
  std::deque<SparseGroundTruth> flipped_gts;  // stable addresses for LossItem
  std::vector<LossItem> items;
  std::vector<std::size_t> item_owner;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule.at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> batch_values;

    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      items.clear();
      item_owner.clear();
      flipped_gts.clear();

      for (std::size_t j = start; j < end; ++j) {
        const TrainingUnit& unit = units[order[j]];
        const bool flip = cfg.augment && flip_coin(rng);
        const std::size_t slot = j - start;
        const RgbImage& image = unit.frame->image;
        Plane<float> logits = flip ? net.forward(hflip(image), &traces[slot]) : net.forward(image, &traces[slot]);
        Plane<double> ld(logits.size());
        for (std::size_t i = 0; i < logits.pixel_count(); ++i) ld[i] = logits[i];
        preds[slot] = PredictionPlane::from_logits(std::move(ld));
        for (SupervisionKind k : unit.kinds) {
          const SparseGroundTruth& gt = unit.frame->supervision(k);
          if (flip) flipped_gts.push_back(hflip(gt));
          item_owner.push_back(slot);
          items.push_back({&preds[slot], flip ? &flipped_gts.back() : &gt});
        }
      }

      BatchLoss loss = batch_loss(items);
      if (!std::isfinite(loss.value))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      batch_values.push_back(loss.value);

      std::fill(grads.begin(), grads.end(), 0.0f);
      for (std::size_t slot = 0; slot < end - start; ++slot) {
        // Sum the logit gradients of every supervision attached to this image.
        Plane<double> g;
        for (std::size_t k = 0; k < items.size(); ++k) {
          if (item_owner[k] != slot) continue;
          if (g.empty()) {
            g = std::move(loss.grads[k]);
          } else {
            for (std::size_t i = 0; i < g.pixel_count(); ++i) g[i] += loss.grads[k][i];
          }
        }
        net.backward(traces[slot], g, grads);
      }
      adam_step<float>(net.parameters(), grads, opt, lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = pairwise_sum(batch_values) / static_cast<double>(batch_values.size());
    m.val_iou = val.empty() ? 0.0 : evaluate(net, val, cfg.threshold);
    for (float p : net.parameters())
      if (!std::isfinite(p)) throw NumericalError("non-finite parameter after epoch " + std::to_string(epoch));
    result.metrics.push_back(m);
    if (progress) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %4d  lr %.6f  loss %.6f  val_iou %.4f\n", m.epoch, m.lr, m.train_loss,
                    m.val_iou);
      *progress << line << std::flush;
    }
  }
  return result;
}

TrainResult train(const std::vector<ManifestRecord>& manifest, const TrainConfig& cfg, std::ostream* progress) {
  if (manifest.empty()) throw DataError("manifest is empty");
  return train(LoadedDataset::load(manifest), cfg, progress);
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::string out = "epoch,lr,train_loss,val_iou\n";
  char line[160];
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", m.epoch, m.lr, m.train_loss, m.val_iou);
    out += line;
  }
  return out;
}

}  // namespace lidarseg
