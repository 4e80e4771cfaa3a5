#pragma once

// Compact convolutional encoder-decoder for binary road segmentation.
//
//   conv3x3( 3 -> 8)            + ReLU    H   x W
//   conv3x3( 8 -> 16, stride 2) + ReLU    H/2 x W/2
//   conv3x3(16 -> 32, stride 2) + ReLU    H/4 x W/4
//   upsample x2, conv3x3(32 -> 16) + ReLU H/2 x W/2
//   upsample x2, conv3x3(16 -> 8)  + ReLU H   x W
//   conv1x1( 8 -> 1)                      logits
//
// All 3x3 convolutions use zero padding of 1; upsampling is nearest-neighbour.
// Parameters live in one flat vector in declaration order (per layer: weights
// [out][in][ky][kx], then biases).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lidarseg/loss.hpp"
#include "lidarseg/plane.hpp"

namespace lidarseg {

struct ConvLayerSpec {
  int in_channels;
  int out_channels;
  int kernel;          // 1 or 3
  int stride;          // 1 or 2
  bool upsample_input; // nearest x2 before the convolution
  bool relu;
};

inline constexpr std::array<ConvLayerSpec, 6> kMicroNetLayers{{
    {3, 8, 3, 1, false, true},
    {8, 16, 3, 2, false, true},
    {16, 32, 3, 2, false, true},
    {32, 16, 3, 1, true, true},
    {16, 8, 3, 1, true, true},
    {8, 1, 1, 1, false, false},
}};

inline constexpr std::uint32_t kMicroNetArchVersion = 1;

// Activations cached by a forward pass; consumed by backward().
template <typename T>
struct ForwardTrace {
  ImageSize input_size{};
  AlignedVector<T> input;                    // (3, H, W)
  std::array<AlignedVector<T>, 6> outputs;   // post-activation output of each layer
  [[nodiscard]] bool empty() const { return input.empty(); }
};

template <typename T>
class MicroNet {
 public:
  using Scalar = T;

  // All parameters zero.
  MicroNet();
  // Kaiming-style uniform weights from a seeded generator; zero biases.
  static MicroNet initialized(std::uint64_t seed);

  [[nodiscard]] static std::size_t parameter_count();
  [[nodiscard]] static std::size_t weight_offset(std::size_t layer);
  [[nodiscard]] static std::size_t bias_offset(std::size_t layer);

  [[nodiscard]] std::span<T> parameters() { return params_; }
  [[nodiscard]] std::span<const T> parameters() const { return params_; }

  // Logits for one image. H and W must be positive multiples of 4.
  Plane<T> forward(const RgbImage& image, ForwardTrace<T>* trace = nullptr) const;
  PredictionPlane predict(const RgbImage& image) const;

  // Accumulates (+=) parameter gradients for upstream logit gradients.
  // Throws std::logic_error when `trace` holds no forward pass.
  void backward(const ForwardTrace<T>& trace, const Plane<double>& grad_wrt_logits, std::span<T> grads) const;

  template <typename U>
  [[nodiscard]] MicroNet<U> cast() const {
    MicroNet<U> out;
    auto dst = out.parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = static_cast<U>(params_[i]);
    return out;
  }

  friend bool operator==(const MicroNet&, const MicroNet&) = default;

 private:
  AlignedVector<T> params_;
};

extern template class MicroNet<float>;
extern template class MicroNet<double>;

struct AdamConfig {
  double beta1 = 0.937;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
  AdamConfig config;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;

  OptimizerState() = default;
  explicit OptimizerState(std::size_t n, AdamConfig cfg = {})
      : config(cfg), first_moment(n, T{0}), second_moment(n, T{0}) {}
};

// Bias-corrected Adam update; advances state.step.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state, double lr);

extern template void adam_step<float>(std::span<float>, std::span<const float>, OptimizerState<float>&, double);
extern template void adam_step<double>(std::span<double>, std::span<const double>, OptimizerState<double>&, double);

// Linear interpolation from lr_initial (epoch 0) to lr_final (epoch total_epochs - 1).
struct LrSchedule {
  double lr_initial = 0.001;
  double lr_final = 0.0005;
  int total_epochs = 1;

  [[nodiscard]] double multiplier(int epoch) const;
  [[nodiscard]] double at(int epoch) const { return lr_initial * multiplier(epoch); }
};

// Binary checkpoint: "LSMN" magic, u32 architecture version, u32 parameter
// count, then little-endian float32 parameters in declaration order.
void save_checkpoint(const std::filesystem::path& path, const MicroNet<float>& net);
MicroNet<float> load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const MicroNet<float>& net);
MicroNet<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace lidarseg
