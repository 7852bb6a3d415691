#pragma once

#include <array>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "s2sr/tensor.hpp"

namespace s2sr {

// One 3x3 convolution layer: kernel [out][in][3][3], per-output-channel bias.
template <typename T>
struct ConvParamsT {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<T> kernel;
  std::vector<T> bias;

  ConvParamsT() = default;
  ConvParamsT(int out_ch, int in_ch)
      : out_channels(out_ch), in_channels(in_ch),
        kernel(static_cast<size_t>(out_ch) * in_ch * 9, T(0)),
        bias(static_cast<size_t>(out_ch), T(0)) {}

  T& w(int co, int ci, int ky, int kx) {
    return kernel[((static_cast<size_t>(co) * in_channels + ci) * 3 + ky) * 3 + kx];
  }
  T w(int co, int ci, int ky, int kx) const {
    return kernel[((static_cast<size_t>(co) * in_channels + ci) * 3 + ky) * 3 + kx];
  }

  int64_t param_total() const {
    return static_cast<int64_t>(kernel.size()) + static_cast<int64_t>(bias.size());
  }
};

using ConvParams = ConvParamsT<float>;

// Architecture hyperparameters. Two valid wirings exist: the 2x network
// (10 input channels, 6 outputs) and the 6x network (12 inputs, 2 outputs).
struct NetworkConfig {
  int depth = 6;         // residual block count d
  int features = 128;    // feature width f
  int input_channels = 10;
  int output_channels = 6;
  float lambda = 0.1f;   // residual scaling
  int scale = 2;

  void validate() const;

  // Channel index in the assembled input where the band group being
  // super-resolved starts (the slice the long skip adds back).
  int skip_channel_begin() const { return scale == 2 ? 4 : 10; }

  static NetworkConfig for_scale(int scale, int depth, int features,
                                 float lambda = 0.1f);
};

template <typename T>
struct NetworkWeightsT {
  ConvParamsT<T> first;                                // input_channels -> f
  std::vector<std::array<ConvParamsT<T>, 2>> blocks;   // d pairs, f -> f
  ConvParamsT<T> last;                                 // f -> output_channels

  int64_t param_total() const {
    int64_t n = first.param_total() + last.param_total();
    for (const auto& b : blocks) n += b[0].param_total() + b[1].param_total();
    return n;
  }
};

using NetworkWeights = NetworkWeightsT<float>;

struct ParamCount {
  int conv_layers = 0;
  int64_t params = 0;
};

ParamCount param_count(const NetworkConfig& config);

NetworkWeights zero_weights(const NetworkConfig& config);

// Kernels uniform in +-sqrt(6 / (9 * in_channels)), biases zero.
// Deterministic for a given seed.
NetworkWeights init_he_uniform(const NetworkConfig& config, uint64_t seed);

NetworkWeightsT<double> widen(const NetworkWeights& w);
NetworkWeights narrow(const NetworkWeightsT<double>& w);

template <typename T>
NetworkWeightsT<T> make_weights(const NetworkConfig& config);

template <typename T, typename Fn>
void for_each_conv(NetworkWeightsT<T>& w, Fn&& fn) {
  fn(w.first);
  for (auto& b : w.blocks) {
    fn(b[0]);
    fn(b[1]);
  }
  fn(w.last);
}

template <typename T, typename Fn>
void for_each_conv(const NetworkWeightsT<T>& w, Fn&& fn) {
  fn(w.first);
  for (const auto& b : w.blocks) {
    fn(b[0]);
    fn(b[1]);
  }
  fn(w.last);
}

// Throws ShapeMismatch when the weight tensors do not fit the config.
template <typename T>
void validate_weights(const NetworkConfig& config, const NetworkWeightsT<T>& w);

// 3x3 cross-correlation with zero padding of 1; output keeps H x W.
template <typename T>
TensorT<T> conv2d_same(const TensorT<T>& x, const ConvParamsT<T>& p);

template <typename T>
TensorT<T> relu(const TensorT<T>& x);

// v = lambda * conv2(relu(conv1(z))) + z. No activation after conv2.
template <typename T>
TensorT<T> resblock_forward(const TensorT<T>& z, const ConvParamsT<T>& p1,
                            const ConvParamsT<T>& p2, T lambda);

// Activations retained by a forward pass for the matching backward pass.
template <typename T>
struct ForwardCacheT {
  TensorT<T> input;                   // assembled network input x0
  TensorT<T> first_pre;               // first conv output, before its ReLU
  std::vector<TensorT<T>> block_mid;  // conv1 output inside each block, pre-ReLU
  std::vector<TensorT<T>> acts;       // acts[0] = ReLU(first_pre); acts[i] = block i output
};

using ForwardCache = ForwardCacheT<float>;

// Upsamples y_b (and y_c for the 6x network) to the finest grid bilinearly
// and concatenates [y_a, up(y_b)(, up(y_c))].
template <typename T>
TensorT<T> assemble_input(const NetworkConfig& config, const TensorT<T>& y_a,
                          const TensorT<T>& y_b,
                          const std::type_identity_t<TensorT<T>>* y_c = nullptr);

// Convolutional trunk only: first conv + ReLU, d residual blocks, final conv.
// The returned tensor is the correction before the long skip.
template <typename T>
TensorT<T> forward_trunk(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                         const TensorT<T>& x0, ForwardCacheT<T>* cache = nullptr);

// Full forward pass. Inputs are expected already divided by the value scale;
// the long skip (the upsampled low-resolution bands) is added to the trunk
// output, so an all-zero network returns exactly the bilinear upsampling.
template <typename T>
TensorT<T> forward(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                   const TensorT<T>& y_a, const TensorT<T>& y_b,
                   const std::type_identity_t<TensorT<T>>* y_c = nullptr,
                   std::type_identity_t<ForwardCacheT<T>>* cache = nullptr);

template <typename T>
struct GradientsT {
  NetworkWeightsT<T> weights;
  TensorT<T> input;  // gradient w.r.t. the assembled input x0
};

// Exact reverse-mode gradients of a scalar loss given d(loss)/d(output).
// The cache must come from a forward call with the same config and weights.
template <typename T>
GradientsT<T> backward(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                       const ForwardCacheT<T>& cache, const TensorT<T>& grad_out);

namespace detail {
template <typename T>
void conv_accumulate(const TensorT<T>& x, const ConvParamsT<T>& p, TensorT<T>& out);
template <typename T>
void conv_backward_input(const TensorT<T>& grad_out, const ConvParamsT<T>& p,
                         TensorT<T>& grad_in);
template <typename T>
void conv_backward_params(const TensorT<T>& grad_out, const TensorT<T>& x,
                          ConvParamsT<T>& grad_p);
}  // namespace detail

}  // namespace s2sr
