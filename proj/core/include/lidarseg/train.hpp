#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lidarseg/datastore.hpp"
#include "lidarseg/micronet.hpp"

namespace lidarseg {

// How train frames pick their supervision.
enum class MixMode {
  Partition,  // one variant per frame, floor(mix_ratio * n) of them dense
  Union,      // every frame is supervised by both its dense and sparse masks
};

std::string to_string(MixMode m);

struct TrainConfig {
  int epochs = 150;
  int batch_size = 8;
  std::uint64_t seed = 1;
  double mix_ratio = 1.0;  // fraction of dense-supervised train frames (Partition mode)
  MixMode mix_mode = MixMode::Partition;
  bool augment = true;  // horizontal flip with probability 0.5
  double lr_initial = 0.001;
  double lr_final = 0.0005;
  AdamConfig adam{};
  double threshold = 0.5;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_iou = 0.0;
};

struct TrainResult {
  MicroNet<float> net;
  std::vector<EpochMetrics> metrics;
};

// Trains on the frames selected from `data` by the configured mix; logs
// validation IoU (dense val masks) after each epoch. Throws NumericalError on
// a non-finite loss.
TrainResult train(const LoadedDataset& data, const TrainConfig& cfg, std::ostream* progress = nullptr);
TrainResult train(const std::vector<ManifestRecord>& manifest, const TrainConfig& cfg,
                  std::ostream* progress = nullptr);

// CSV with header "epoch,lr,train_loss,val_iou".
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

}  // namespace lidarseg
