#include "lidarseg/micronet.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "lidarseg/errors.hpp"

namespace lidarseg {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

constexpr std::size_t kLayers = kMicroNetLayers.size();

constexpr std::size_t weight_count(const ConvLayerSpec& l) {
  return static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel;
}

struct Offsets {
  std::array<std::size_t, kLayers> weight{};
  std::array<std::size_t, kLayers> bias{};
  std::size_t total = 0;
};

constexpr Offsets compute_offsets() {
  Offsets o;
  std::size_t at = 0;
  for (std::size_t i = 0; i < kLayers; ++i) {
    o.weight[i] = at;
    at += weight_count(kMicroNetLayers[i]);
    o.bias[i] = at;
    at += static_cast<std::size_t>(kMicroNetLayers[i].out_channels);
  }
  o.total = at;
  return o;
}

constexpr Offsets kOffsets = compute_offsets();

struct Dims {
  int h;
  int w;
};

// Spatial size of the tensor fed to layer `i` (after optional upsampling) and of its output.
struct LayerGeometry {
  Dims in;   // conv input
  Dims out;
};

std::array<LayerGeometry, kLayers> layer_geometry(ImageSize input) {
  std::array<LayerGeometry, kLayers> g{};
  Dims cur{input.height, input.width};
  for (std::size_t i = 0; i < kLayers; ++i) {
    const auto& l = kMicroNetLayers[i];
    if (l.upsample_input) cur = {cur.h * 2, cur.w * 2};
    g[i].in = cur;
    if (l.stride == 2) cur = {cur.h / 2, cur.w / 2};
    g[i].out = cur;
  }
  return g;
}

// (C, H, W) -> (C*9, Ho*Wo) for a 3x3 kernel with zero padding 1.
template <typename T>
void im2col3x3(const T* in, int channels, int h, int w, int stride, int ho, int wo, T* col) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    const T* src = in + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          T* row = dst + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + wo, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            // ix = ox + kx - 1
            const int lo = std::max(0, 1 - kx);
            const int hi = std::min(wo, w + 1 - kx);
            std::fill(row, row + lo, T{0});
            std::copy(srow + lo + kx - 1, srow + hi + kx - 1, row + lo);
            std::fill(row + hi, row + wo, T{0});
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - 1;
              row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T{0};
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatters (C*9, Ho*Wo) column gradients into (C, H, W).
template <typename T>
void col2im3x3(const T* col, int channels, int h, int w, int stride, int ho, int wo, T* out) {
  std::fill(out, out + static_cast<std::size_t>(channels) * h * w, T{0});
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    T* dst = out + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          const T* srow = src + static_cast<std::size_t>(oy) * wo;
          T* drow = dst + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::max(0, 1 - kx);
            const int hi = std::min(wo, w + 1 - kx);
            for (int ox = lo; ox < hi; ++ox) drow[ox + kx - 1] += srow[ox];
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - 1;
              if (ix >= 0 && ix < w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// Offset in the low-resolution grid hit by kernel tap `k` (0..2) of a 3x3
// convolution applied to a nearest x2 upsampled map, for output parity `parity`.
constexpr int phase_tap(int parity, int k) { return (parity + k + 1) / 2 - 1; }

// Folds 3x3 weights (out, in, 3, 3) into four phase kernels laid out as a
// (4*out) x (in*9) matrix over the low-resolution 3x3 neighbourhood.
template <typename T>
void fold_phase_weights(const T* w, int out_ch, int in_ch, RowMat<T>& folded) {
  folded.setZero(4 * out_ch, in_ch * 9);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int o = 0; o < out_ch; ++o)
        for (int c = 0; c < in_ch; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int ty = phase_tap(a, ky) + 1, tx = phase_tap(b, kx) + 1;
              folded((a * 2 + b) * out_ch + o, c * 9 + ty * 3 + tx) += w[((o * in_ch + c) * 3 + ky) * 3 + kx];
            }
}

// Adjoint of fold_phase_weights, accumulated into grad (out, in, 3, 3).
template <typename T>
void unfold_phase_grads(const RowMat<T>& folded_grad, int out_ch, int in_ch, T* grad) {
  for (int o = 0; o < out_ch; ++o)
    for (int c = 0; c < in_ch; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T acc{0};
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              const int ty = phase_tap(a, ky) + 1, tx = phase_tap(b, kx) + 1;
              acc += folded_grad((a * 2 + b) * out_ch + o, c * 9 + ty * 3 + tx);
            }
          grad[((o * in_ch + c) * 3 + ky) * 3 + kx] = acc;
        }
}

// (4*C, h*w) phase-major rows <-> (C, 2h, 2w) interleaved image.
template <typename T>
void interleave_phases(const T* phases, int channels, int h, int w, T* out) {
  const int w2 = 2 * w;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < channels; ++c) {
        const T* src = phases + static_cast<std::size_t>((a * 2 + b) * channels + c) * h * w;
        T* dst = out + static_cast<std::size_t>(c) * 4 * h * w;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(2 * y + a) * w2 + 2 * x + b] = src[y * w + x];
      }
}

template <typename T>
void deinterleave_phases(const T* image, int channels, int h, int w, T* phases) {
  const int w2 = 2 * w;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < channels; ++c) {
        T* dst = phases + static_cast<std::size_t>((a * 2 + b) * channels + c) * h * w;
        const T* src = image + static_cast<std::size_t>(c) * 4 * h * w;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) dst[y * w + x] = src[static_cast<std::size_t>(2 * y + a) * w2 + 2 * x + b];
      }
}

// Reusable buffers; resize() never shrinks capacity so steady-state passes do not allocate.
template <typename T>
struct Scratch {
  AlignedVector<T> col, dcol, din, dout, phases;
  RowMat<T> folded, dw;
  Eigen::Matrix<T, Eigen::Dynamic, 1> db;
};

template <typename T>
Scratch<T>& scratch() {
  thread_local Scratch<T> s;
  return s;
}

void check_input(ImageSize s) {
  if (s.width <= 0 || s.height <= 0 || s.width % 4 != 0 || s.height % 4 != 0)
    throw std::invalid_argument("MicroNet input " + to_string(s) + " must have positive dimensions divisible by 4");
}

}  // namespace

template <typename T>
MicroNet<T>::MicroNet() : params_(kOffsets.total, T{0}) {}

template <typename T>
MicroNet<T> MicroNet<T>::initialized(std::uint64_t seed) {
  MicroNet net;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < kLayers; ++i) {
    const auto& l = kMicroNetLayers[i];
    const double fan_in = static_cast<double>(l.in_channels) * l.kernel * l.kernel;
    // ReLU layers use the Kaiming gain; the linear logit head uses gain 1.
    const double bound = std::sqrt((l.relu ? 6.0 : 3.0) / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    T* w = net.params_.data() + kOffsets.weight[i];
    for (std::size_t k = 0; k < weight_count(l); ++k) w[k] = static_cast<T>(dist(rng));
  }
  return net;
}

template <typename T>
std::size_t MicroNet<T>::parameter_count() {
  return kOffsets.total;
}

template <typename T>
std::size_t MicroNet<T>::weight_offset(std::size_t layer) {
  return kOffsets.weight.at(layer);
}

template <typename T>
std::size_t MicroNet<T>::bias_offset(std::size_t layer) {
  return kOffsets.bias.at(layer);
}

template <typename T>
Plane<T> MicroNet<T>::forward(const RgbImage& image, ForwardTrace<T>* trace) const {
  check_input(image.size);
  const auto geo = layer_geometry(image.size);
  auto& ws = scratch<T>();

  ForwardTrace<T> local;
  ForwardTrace<T>& tr = trace ? *trace : local;
  tr.input_size = image.size;
  tr.input.assign(image.chw.begin(), image.chw.end());

  const T* cur = tr.input.data();
  for (std::size_t i = 0; i < kLayers; ++i) {
    const auto& l = kMicroNetLayers[i];
    const auto [hout, wout] = geo[i].out;
    auto& out = tr.outputs[i];
    out.resize(static_cast<std::size_t>(l.out_channels) * hout * wout);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params_.data() + kOffsets.bias[i], l.out_channels);

    if (l.upsample_input) {
      // conv3x3(upsample(x)) evaluated as four phase kernels on the low-resolution x.
      const int h = hout / 2, w = wout / 2, p = h * w, k = l.in_channels * 9;
      ws.col.resize(static_cast<std::size_t>(k) * p);
      im2col3x3(cur, l.in_channels, h, w, 1, h, w, ws.col.data());
      fold_phase_weights(params_.data() + kOffsets.weight[i], l.out_channels, l.in_channels, ws.folded);
      ws.phases.resize(static_cast<std::size_t>(4) * l.out_channels * p);
      MapMat<T> pmat(ws.phases.data(), 4 * l.out_channels, p);
      pmat.noalias() = ws.folded * ConstMapMat<T>(ws.col.data(), k, p);
      for (int ph = 0; ph < 4; ++ph) pmat.middleRows(ph * l.out_channels, l.out_channels).colwise() += bias;
      interleave_phases(ws.phases.data(), l.out_channels, h, w, out.data());
    } else {
      const auto [hin, win] = geo[i].in;
      const int k = l.in_channels * l.kernel * l.kernel;
      const int p = hout * wout;
      const T* colp = cur;
      if (l.kernel == 3) {
        ws.col.resize(static_cast<std::size_t>(k) * p);
        im2col3x3(cur, l.in_channels, hin, win, l.stride, hout, wout, ws.col.data());
        colp = ws.col.data();
      }
      ConstMapMat<T> wmat(params_.data() + kOffsets.weight[i], l.out_channels, k);
      MapMat<T> omat(out.data(), l.out_channels, p);
      omat.noalias() = wmat * ConstMapMat<T>(colp, k, p);
      omat.colwise() += bias;
    }
    if (l.relu)
      for (T& v : out) v = v > T{0} ? v : T{0};
    cur = out.data();
  }

  Plane<T> logits(image.size.height, image.size.width);
  std::copy(tr.outputs.back().begin(), tr.outputs.back().end(), logits.begin());
  return logits;
}

template <typename T>
PredictionPlane MicroNet<T>::predict(const RgbImage& image) const {
  Plane<T> l = forward(image);
  Plane<double> ld(l.size());
  for (std::size_t i = 0; i < l.pixel_count(); ++i) ld[i] = static_cast<double>(l[i]);
  return PredictionPlane::from_logits(std::move(ld));
}

template <typename T>
void MicroNet<T>::backward(const ForwardTrace<T>& trace, const Plane<double>& grad_wrt_logits,
                           std::span<T> grads) const {
  if (trace.empty()) throw std::logic_error("MicroNet::backward called without a cached forward pass");
  if (grad_wrt_logits.size() != trace.input_size)
    throw std::invalid_argument("logit gradient " + to_string(grad_wrt_logits.size()) + " does not match input " +
                                to_string(trace.input_size));
  if (grads.size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong size");
  const auto geo = layer_geometry(trace.input_size);
  auto& ws = scratch<T>();

  // Gradient w.r.t. the post-activation output of the current layer.
  ws.dout.resize(grad_wrt_logits.pixel_count());
  for (std::size_t i = 0; i < ws.dout.size(); ++i) ws.dout[i] = static_cast<T>(grad_wrt_logits[i]);

  for (std::size_t ii = kLayers; ii-- > 0;) {
    const auto& l = kMicroNetLayers[ii];
    const auto [hout, wout] = geo[ii].out;
    const T* in = ii == 0 ? trace.input.data() : trace.outputs[ii - 1].data();
    T* gw = grads.data() + kOffsets.weight[ii];
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grads.data() + kOffsets.bias[ii], l.out_channels);

    if (l.relu) {
      const auto& out = trace.outputs[ii];
      for (std::size_t j = 0; j < ws.dout.size(); ++j)
        if (!(out[j] > T{0})) ws.dout[j] = T{0};
    }

    // Parameter gradients are formed in temporaries, then added once, so that
    // accumulating two identical items yields exactly twice one item.
    if (l.upsample_input) {
      const int h = hout / 2, w = wout / 2, p = h * w, k = l.in_channels * 9;
      ws.col.resize(static_cast<std::size_t>(k) * p);
      im2col3x3(in, l.in_channels, h, w, 1, h, w, ws.col.data());
      ws.phases.resize(static_cast<std::size_t>(4) * l.out_channels * p);
      deinterleave_phases(ws.dout.data(), l.out_channels, h, w, ws.phases.data());
      ConstMapMat<T> dph(ws.phases.data(), 4 * l.out_channels, p);
      ConstMapMat<T> cmat(ws.col.data(), k, p);
      ws.dw.noalias() = dph * cmat.transpose();
      ws.db = dph.rowwise().sum();
      RowMat<T> dw_unfolded(l.out_channels, k);
      unfold_phase_grads(ws.dw, l.out_channels, l.in_channels, dw_unfolded.data());
      MapMat<T>(gw, l.out_channels, k) += dw_unfolded;
      for (int o = 0; o < l.out_channels; ++o)
        gb(o) += (ws.db(o) + ws.db(l.out_channels + o)) + (ws.db(2 * l.out_channels + o) + ws.db(3 * l.out_channels + o));

      fold_phase_weights(params_.data() + kOffsets.weight[ii], l.out_channels, l.in_channels, ws.folded);
      ws.dcol.resize(static_cast<std::size_t>(k) * p);
      MapMat<T>(ws.dcol.data(), k, p).noalias() = ws.folded.transpose() * dph;
      ws.din.resize(static_cast<std::size_t>(l.in_channels) * p);
      col2im3x3(ws.dcol.data(), l.in_channels, h, w, 1, h, w, ws.din.data());
    } else {
      const auto [hin, win] = geo[ii].in;
      const int k = l.in_channels * l.kernel * l.kernel;
      const int p = hout * wout;
      const T* colp = in;
      if (l.kernel == 3) {
        ws.col.resize(static_cast<std::size_t>(k) * p);
        im2col3x3(in, l.in_channels, hin, win, l.stride, hout, wout, ws.col.data());
        colp = ws.col.data();
      }
      ConstMapMat<T> dmat(ws.dout.data(), l.out_channels, p);
      ws.dw.noalias() = dmat * ConstMapMat<T>(colp, k, p).transpose();
      ws.db = dmat.rowwise().sum();
      MapMat<T>(gw, l.out_channels, k) += ws.dw;
      gb += ws.db;

      if (ii == 0) break;
      ConstMapMat<T> wmat(params_.data() + kOffsets.weight[ii], l.out_channels, k);
      ws.din.resize(static_cast<std::size_t>(l.in_channels) * hin * win);
      if (l.kernel == 3) {
        ws.dcol.resize(static_cast<std::size_t>(k) * p);
        MapMat<T>(ws.dcol.data(), k, p).noalias() = wmat.transpose() * dmat;
        col2im3x3(ws.dcol.data(), l.in_channels, hin, win, l.stride, hout, wout, ws.din.data());
      } else {
        MapMat<T>(ws.din.data(), k, p).noalias() = wmat.transpose() * dmat;
      }
    }
    ws.dout.swap(ws.din);
  }
}

template class MicroNet<float>;
template class MicroNet<double>;

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state, double lr) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  state.step += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(c.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = b1 * m + (T{1} - b1) * g;
    v = b2 * v + (T{1} - b2) * g * g;
    params[i] -= step_size * m / (std::sqrt(v) * inv_sqrt_bc2 + eps);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, OptimizerState<float>&, double);
template void adam_step<double>(std::span<double>, std::span<const double>, OptimizerState<double>&, double);

double LrSchedule::multiplier(int epoch) const {
  if (total_epochs <= 1) return 1.0;
  const double t = std::clamp(static_cast<double>(epoch) / static_cast<double>(total_epochs - 1), 0.0, 1.0);
  return (lr_initial + (lr_final - lr_initial) * t) / lr_initial;
}

namespace {
constexpr std::array<std::uint8_t, 4> kMagic{'L', 'S', 'M', 'N'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}
}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const MicroNet<float>& net) {
  const auto params = net.parameters();
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(12 + 4 * params.size());
  put_u32(out, kMicroNetArchVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (float f : params) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

MicroNet<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw DataError("checkpoint: bad magic tag");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kMicroNetArchVersion)
    throw DataError("checkpoint: unsupported architecture version " + std::to_string(version));
  const std::uint32_t count = get_u32(bytes, 8);
  if (count != MicroNet<float>::parameter_count())
    throw DataError("checkpoint: expected " + std::to_string(MicroNet<float>::parameter_count()) +
                    " parameters, found " + std::to_string(count));
  if (bytes.size() != 12 + 4 * static_cast<std::size_t>(count)) throw DataError("checkpoint: truncated or oversized blob");
  MicroNet<float> net;
  auto p = net.parameters();
  for (std::size_t i = 0; i < count; ++i) {
    p[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
    if (!std::isfinite(p[i])) throw DataError("checkpoint: non-finite parameter at index " + std::to_string(i));
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const MicroNet<float>& net) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

MicroNet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace lidarseg
