#include <benchmark/benchmark.h>

#include <random>

#include "lidarseg/geometry.hpp"
#include "lidarseg/loss.hpp"
#include "lidarseg/maskgen.hpp"
#include "lidarseg/micronet.hpp"
#include "lidarseg/synthworld.hpp"

using namespace lidarseg;

namespace {

RgbImage noise_image(int side) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  RgbImage img(ImageSize{side, side});
  for (float& v : img.chw) v = u(rng);
  return img;
}

SceneSpec example_scene() { return sample_scene(VariationConfig{}, 42); }

void BM_Forward(benchmark::State& state) {
  const auto net = MicroNet<float>::initialized(1);
  const auto img = noise_image(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(img));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto net = MicroNet<float>::initialized(1);
  const int side = static_cast<int>(state.range(0));
  const auto img = noise_image(side);
  const Plane<double> upstream(side, side, 1e-3);
  std::vector<float> grads(net.parameter_count());
  ForwardTrace<float> trace;
  for (auto _ : state) {
    (void)net.forward(img, &trace);
    net.backward(trace, upstream, grads);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_MaskedBce(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4, 4);
  std::bernoulli_distribution coin(0.5), sparse(0.1);
  Plane<double> logits(side, side);
  MaskPlane y(side, side), m(side, side);
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    logits[i] = u(rng);
    m[i] = sparse(rng);
    y[i] = m[i] && coin(rng);
  }
  const auto pred = PredictionPlane::from_logits(logits);
  const SparseGroundTruth gt(y, m);
  for (auto _ : state) benchmark::DoNotOptimize(masked_bce(pred, gt));
}
BENCHMARK(BM_MaskedBce)->Arg(64)->Arg(256);

void BM_Render(benchmark::State& state) {
  const auto scene = example_scene();
  const auto cam = default_camera();
  for (auto _ : state) benchmark::DoNotOptimize(render(scene, cam));
}
BENCHMARK(BM_Render);

void BM_Scan(benchmark::State& state) {
  const auto scene = example_scene();
  const auto lidar = state.range(0) == 0 ? LidarSpec::dense16() : LidarSpec::dense64();
  for (auto _ : state) benchmark::DoNotOptimize(scan(scene, lidar));
}
BENCHMARK(BM_Scan)->Arg(0)->Arg(1);

void BM_ProjectAndMask(benchmark::State& state) {
  const auto scene = example_scene();
  const auto cloud = scan(scene, LidarSpec::dense64());
  const auto cam = default_camera();
  const auto extr = scene.camera_from_lidar();
  for (auto _ : state) {
    const auto projected = project_cloud(cloud, cam, extr);
    benchmark::DoNotOptimize(build_sparse_gt(projected, cam.size(), NoiseConfig{}));
  }
  state.counters["points"] = static_cast<double>(cloud.size());
}
BENCHMARK(BM_ProjectAndMask);

}  // namespace
BENCHMARK_MAIN();
