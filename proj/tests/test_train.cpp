#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <sstream>

#include "lidarseg/errors.hpp"
#include "lidarseg/synthworld.hpp"
#include "lidarseg/train.hpp"
#include "support.hpp"

using namespace lidarseg;
using lidarseg::testing::ScratchDir;

namespace {

class TrainFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScratchDir("train");
    records_ = generate_dataset(12, VariationConfig{}, default_camera(), LidarSpec::dense64(), dir_->path(), 21);
    data_ = new LoadedDataset(LoadedDataset::load(records_));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete dir_;
  }
  static TrainConfig quick(int epochs = 4) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg.seed = 2;
    return cfg;
  }
  static inline ScratchDir* dir_ = nullptr;
  static inline std::vector<ManifestRecord> records_;
  static inline LoadedDataset* data_ = nullptr;
};

bool same_parameters(const MicroNet<float>& a, const MicroNet<float>& b) {
  return std::ranges::equal(a.parameters(), b.parameters());
}

}  // namespace

TEST_F(TrainFixture, DenseLossFallsBelowHalfOfInitial) {
  ASSERT_EQ(data_->split(Split::Train).size(), 10u);
  const auto r = train(*data_, quick(50));
  ASSERT_EQ(r.metrics.size(), 50u);
  EXPECT_LT(r.metrics.back().train_loss, 0.5 * r.metrics.front().train_loss);
  EXPECT_GT(r.metrics.back().val_iou, 0.5);
}

TEST_F(TrainFixture, DeterministicForFixedSeed) {
  const auto a = train(*data_, quick());
  // shift the heap so the second run's buffers land at different addresses
  std::vector<std::unique_ptr<char[]>> ballast;
  for (std::size_t n : {3u, 40u, 17u, 1000u, 5u, 77u}) ballast.push_back(std::make_unique<char[]>(n));
  const auto b = train(*data_, quick());
  EXPECT_TRUE(same_parameters(a.net, b.net));
  EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
  auto other = quick();
  other.seed = 3;
  EXPECT_FALSE(same_parameters(a.net, train(*data_, other).net));
}

TEST_F(TrainFixture, RatioEndpointsPickTheExpectedVariant) {
  // Point the sparse records at the dense masks: the all-sparse run must then
  // reproduce the all-dense run on the original data.
  auto recs = records_;
  std::map<std::string, ManifestRecord> dense;
  for (const auto& r : recs)
    if (r.kind == SupervisionKind::Dense) dense[r.id] = r;
  for (auto& r : recs)
    if (r.kind == SupervisionKind::Sparse) {
      r.gt = dense[r.id].gt;
      r.valid = dense[r.id].valid;
    }
  const auto swapped = LoadedDataset::load(recs);

  auto dense_cfg = quick(), sparse_cfg = quick();
  dense_cfg.mix_ratio = 1.0;
  sparse_cfg.mix_ratio = 0.0;
  const auto reference = train(*data_, dense_cfg);
  EXPECT_TRUE(same_parameters(reference.net, train(swapped, sparse_cfg).net));
  EXPECT_FALSE(same_parameters(reference.net, train(*data_, sparse_cfg).net));

  auto union_cfg = quick();
  union_cfg.mix_mode = MixMode::Union;
  const auto u = train(swapped, union_cfg);
  for (std::size_t i = 0; i < u.metrics.size(); ++i)
    EXPECT_NEAR(u.metrics[i].val_iou, reference.metrics[i].val_iou, 1e-6);
}

TEST_F(TrainFixture, LearningRateFollowsSchedule) {
  const auto r = train(*data_, quick(3));
  EXPECT_DOUBLE_EQ(r.metrics[0].lr, 1e-3);
  EXPECT_DOUBLE_EQ(r.metrics[1].lr, 7.5e-4);
  EXPECT_DOUBLE_EQ(r.metrics[2].lr, 5e-4);
  EXPECT_DOUBLE_EQ(train(*data_, quick(1)).metrics[0].lr, 1e-3);
}

TEST_F(TrainFixture, ProgressAndCsv) {
  std::ostringstream log;
  const auto r = train(*data_, quick(2), &log);
  EXPECT_NE(log.str().find("epoch    1"), std::string::npos);
  const auto csv = metrics_csv(r.metrics);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,lr,train_loss,val_iou");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 8), "0,0.001,");
}

TEST(TrainConfigTest, ValidateRejectsBadValues) {
  const auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_NO_THROW(TrainConfig{}.validate());
  EXPECT_THROW(bad([](auto& c) { c.epochs = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.batch_size = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.mix_ratio = -0.1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.mix_ratio = std::nan(""); }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.lr_initial = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.lr_final = 0.01; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.threshold = 1.0; }).validate(), std::invalid_argument);
}

TEST(TrainErrors, EmptyInputs) {
  EXPECT_THROW(train(std::vector<ManifestRecord>{}, TrainConfig{}), DataError);
  EXPECT_THROW(train(LoadedDataset{}, TrainConfig{}), DataError);
}
