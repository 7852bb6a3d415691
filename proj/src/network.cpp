#include "s2sr/network.hpp"

#include <cmath>
#include <cstring>

#include "s2sr/resample.hpp"
#include "s2sr/rng.hpp"

namespace s2sr {

void NetworkConfig::validate() const {
  require(depth >= 1, ErrorCode::InvariantViolation, "depth must be >= 1");
  require(features >= 1, ErrorCode::InvariantViolation, "features must be >= 1");
  require(lambda > 0.0f && lambda <= 1.0f, ErrorCode::InvariantViolation,
          "lambda must lie in (0, 1]");
  const bool t2 = input_channels == 10 && output_channels == 6 && scale == 2;
  const bool s6 = input_channels == 12 && output_channels == 2 && scale == 6;
  require(t2 || s6, ErrorCode::InvariantViolation,
          "channel wiring must be (10 in, 6 out, 2x) or (12 in, 2 out, 6x)");
}

NetworkConfig NetworkConfig::for_scale(int scale, int depth, int features,
                                       float lambda) {
  NetworkConfig c;
  c.depth = depth;
  c.features = features;
  c.lambda = lambda;
  c.scale = scale;
  if (scale == 2) {
    c.input_channels = 10;
    c.output_channels = 6;
  } else {
    c.input_channels = 12;
    c.output_channels = 2;
  }
  c.validate();
  return c;
}

ParamCount param_count(const NetworkConfig& config) {
  config.validate();
  const int64_t f = config.features;
  const int64_t k2 = 9;
  ParamCount out;
  out.conv_layers = 2 * config.depth + 2;
  out.params = (k2 * config.input_channels * f + f) +
               config.depth * 2 * (k2 * f * f + f) +
               (k2 * f * config.output_channels + config.output_channels);
  return out;
}

template <typename T>
NetworkWeightsT<T> make_weights(const NetworkConfig& config) {
  config.validate();
  NetworkWeightsT<T> w;
  w.first = ConvParamsT<T>(config.features, config.input_channels);
  w.blocks.assign(static_cast<size_t>(config.depth),
                  {ConvParamsT<T>(config.features, config.features),
                   ConvParamsT<T>(config.features, config.features)});
  w.last = ConvParamsT<T>(config.output_channels, config.features);
  return w;
}

template NetworkWeightsT<float> make_weights<float>(const NetworkConfig&);
template NetworkWeightsT<double> make_weights<double>(const NetworkConfig&);

NetworkWeights zero_weights(const NetworkConfig& config) {
  return make_weights<float>(config);
}

NetworkWeights init_he_uniform(const NetworkConfig& config, uint64_t seed) {
  NetworkWeights w = make_weights<float>(config);
  Rng rng(seed);
  for_each_conv(w, [&](ConvParams& p) {
    const float bound = std::sqrt(6.0f / (9.0f * static_cast<float>(p.in_channels)));
    for (float& v : p.kernel) v = rng.uniform(-bound, bound);
    // biases stay zero
  });
  return w;
}

NetworkWeightsT<double> widen(const NetworkWeights& w) {
  NetworkWeightsT<double> out;
  auto conv = [](const ConvParams& p) {
    ConvParamsT<double> q(p.out_channels, p.in_channels);
    for (size_t i = 0; i < p.kernel.size(); ++i) q.kernel[i] = p.kernel[i];
    for (size_t i = 0; i < p.bias.size(); ++i) q.bias[i] = p.bias[i];
    return q;
  };
  out.first = conv(w.first);
  for (const auto& b : w.blocks) out.blocks.push_back({conv(b[0]), conv(b[1])});
  out.last = conv(w.last);
  return out;
}

NetworkWeights narrow(const NetworkWeightsT<double>& w) {
  NetworkWeights out;
  auto conv = [](const ConvParamsT<double>& p) {
    ConvParams q(p.out_channels, p.in_channels);
    for (size_t i = 0; i < p.kernel.size(); ++i)
      q.kernel[i] = static_cast<float>(p.kernel[i]);
    for (size_t i = 0; i < p.bias.size(); ++i)
      q.bias[i] = static_cast<float>(p.bias[i]);
    return q;
  };
  out.first = conv(w.first);
  for (const auto& b : w.blocks) out.blocks.push_back({conv(b[0]), conv(b[1])});
  out.last = conv(w.last);
  return out;
}

template <typename T>
void validate_weights(const NetworkConfig& config, const NetworkWeightsT<T>& w) {
  config.validate();
  auto check = [&](const ConvParamsT<T>& p, int out_ch, int in_ch, const char* name) {
    require(p.out_channels == out_ch && p.in_channels == in_ch &&
                p.kernel.size() == static_cast<size_t>(out_ch) * in_ch * 9 &&
                p.bias.size() == static_cast<size_t>(out_ch),
            ErrorCode::ShapeMismatch, std::string("weights: bad shape for ") + name);
  };
  check(w.first, config.features, config.input_channels, "first conv");
  require(w.blocks.size() == static_cast<size_t>(config.depth),
          ErrorCode::ShapeMismatch, "weights: block count differs from depth");
  for (const auto& b : w.blocks) {
    check(b[0], config.features, config.features, "block conv1");
    check(b[1], config.features, config.features, "block conv2");
  }
  check(w.last, config.output_channels, config.features, "last conv");
}

template void validate_weights<float>(const NetworkConfig&, const NetworkWeightsT<float>&);
template void validate_weights<double>(const NetworkConfig&, const NetworkWeightsT<double>&);

namespace detail {

// One row of 3-tap horizontal accumulation: out += w0*in[x-1] + w1*in[x] +
// w2*in[x+1], missing taps dropped (zero padding).
template <typename T>
inline void row_taps(const T* in, T* out, int w, T w0, T w1, T w2) {
  if (w == 1) {
    out[0] += w1 * in[0];
    return;
  }
  out[0] += w1 * in[0] + w2 * in[1];
  for (int x = 1; x < w - 1; ++x)
    out[x] += w0 * in[x - 1] + w1 * in[x] + w2 * in[x + 1];
  out[w - 1] += w0 * in[w - 2] + w1 * in[w - 1];
}

template <typename T>
void conv_accumulate(const TensorT<T>& x, const ConvParamsT<T>& p, TensorT<T>& out) {
  const int h = x.height, w = x.width;
  for (int co = 0; co < p.out_channels; ++co) {
    T* oplane = out.plane(co);
    const T b = p.bias[co];
    for (int64_t i = 0; i < out.plane_size(); ++i) oplane[i] = b;
  }
  for (int co = 0; co < p.out_channels; ++co) {
    T* oplane = out.plane(co);
    for (int ci = 0; ci < p.in_channels; ++ci) {
      const T* iplane = x.plane(ci);
      const T* w9 = p.kernel.data() + (static_cast<size_t>(co) * p.in_channels + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const T w0 = w9[ky * 3 + 0], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          row_taps(iplane + static_cast<size_t>(sy) * w,
                   oplane + static_cast<size_t>(y) * w, w, w0, w1, w2);
        }
      }
    }
  }
}

template <typename T>
void conv_backward_input(const TensorT<T>& grad_out, const ConvParamsT<T>& p,
                         TensorT<T>& grad_in) {
  const int h = grad_out.height, w = grad_out.width;
  std::fill(grad_in.data.begin(), grad_in.data.end(), T(0));
  for (int ci = 0; ci < p.in_channels; ++ci) {
    T* iplane = grad_in.plane(ci);
    for (int co = 0; co < p.out_channels; ++co) {
      const T* gplane = grad_out.plane(co);
      const T* w9 = p.kernel.data() + (static_cast<size_t>(co) * p.in_channels + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        // input row sy receives output row y = sy - ky + 1; horizontal taps
        // run reversed relative to the forward pass.
        const T w0 = w9[ky * 3 + 0], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          row_taps(gplane + static_cast<size_t>(y) * w,
                   iplane + static_cast<size_t>(sy) * w, w, w2, w1, w0);
        }
      }
    }
  }
}

template <typename T>
void conv_backward_params(const TensorT<T>& grad_out, const TensorT<T>& x,
                          ConvParamsT<T>& grad_p) {
  const int h = x.height, w = x.width;
  for (int co = 0; co < grad_p.out_channels; ++co) {
    const T* gplane = grad_out.plane(co);
    double bias_acc = 0.0;
    for (int64_t i = 0; i < grad_out.plane_size(); ++i) bias_acc += gplane[i];
    grad_p.bias[co] = static_cast<T>(bias_acc);

    for (int ci = 0; ci < grad_p.in_channels; ++ci) {
      const T* iplane = x.plane(ci);
      T* w9 = grad_p.kernel.data() +
              (static_cast<size_t>(co) * grad_p.in_channels + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* g = gplane + static_cast<size_t>(y) * w;
          const T* in = iplane + static_cast<size_t>(sy) * w;
          T r0 = T(0), r1 = T(0), r2 = T(0);
          for (int xx = 1; xx < w; ++xx) r0 += g[xx] * in[xx - 1];
          for (int xx = 0; xx < w; ++xx) r1 += g[xx] * in[xx];
          for (int xx = 0; xx < w - 1; ++xx) r2 += g[xx] * in[xx + 1];
          acc0 += r0;
          acc1 += r1;
          acc2 += r2;
        }
        w9[ky * 3 + 0] = static_cast<T>(acc0);
        w9[ky * 3 + 1] = static_cast<T>(acc1);
        w9[ky * 3 + 2] = static_cast<T>(acc2);
      }
    }
  }
}

template void conv_accumulate<float>(const TensorT<float>&, const ConvParamsT<float>&, TensorT<float>&);
template void conv_accumulate<double>(const TensorT<double>&, const ConvParamsT<double>&, TensorT<double>&);
template void conv_backward_input<float>(const TensorT<float>&, const ConvParamsT<float>&, TensorT<float>&);
template void conv_backward_input<double>(const TensorT<double>&, const ConvParamsT<double>&, TensorT<double>&);
template void conv_backward_params<float>(const TensorT<float>&, const TensorT<float>&, ConvParamsT<float>&);
template void conv_backward_params<double>(const TensorT<double>&, const TensorT<double>&, ConvParamsT<double>&);

}  // namespace detail

template <typename T>
TensorT<T> conv2d_same(const TensorT<T>& x, const ConvParamsT<T>& p) {
  require(x.channels == p.in_channels, ErrorCode::ShapeMismatch,
          "conv input has " + std::to_string(x.channels) + " channels, kernel wants " +
              std::to_string(p.in_channels));
  TensorT<T> out(x.height, x.width, p.out_channels);
  detail::conv_accumulate(x, p, out);
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out = x;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
TensorT<T> resblock_forward(const TensorT<T>& z, const ConvParamsT<T>& p1,
                            const ConvParamsT<T>& p2, T lambda) {
  require(p1.in_channels == z.channels && p1.out_channels == p1.in_channels &&
              p2.in_channels == z.channels && p2.out_channels == z.channels,
          ErrorCode::ShapeMismatch, "residual block must preserve the channel count");
  TensorT<T> t = conv2d_same(relu(conv2d_same(z, p1)), p2);
  TensorT<T> out = z;
  for (int64_t i = 0; i < out.size(); ++i) out.data[i] += lambda * t.data[i];
  return out;
}

template <typename T>
TensorT<T> assemble_input(const NetworkConfig& config, const TensorT<T>& y_a,
                          const TensorT<T>& y_b,
                          const std::type_identity_t<TensorT<T>>* y_c) {
  config.validate();
  const int h = y_a.height, w = y_a.width;
  require(y_a.channels == 4, ErrorCode::ShapeMismatch, "y_a must have 4 channels");
  require(w % 2 == 0 && h % 2 == 0, ErrorCode::ShapeMismatch,
          "finest dims must be even");
  require(y_b.channels == 6 && y_b.height == h / 2 && y_b.width == w / 2,
          ErrorCode::ShapeMismatch, "y_b must be half the finest dims with 6 channels");
  if (config.scale == 6) {
    require(y_c != nullptr, ErrorCode::MissingInput,
            "the 6x network needs the 6x band group");
    require(w % 6 == 0 && h % 6 == 0, ErrorCode::ShapeMismatch,
            "finest dims must be divisible by 6");
    require(y_c->channels == 2 && y_c->height == h / 6 && y_c->width == w / 6,
            ErrorCode::ShapeMismatch,
            "y_c must be one sixth the finest dims with 2 channels");
  }

  TensorT<T> x0(h, w, config.input_channels);
  const size_t plane_bytes = sizeof(T) * static_cast<size_t>(h) * w;
  for (int c = 0; c < 4; ++c) std::memcpy(x0.plane(c), y_a.plane(c), plane_bytes);

  const TensorT<T> up_b = bilinear_upsample(y_b, 2);
  for (int c = 0; c < 6; ++c) std::memcpy(x0.plane(4 + c), up_b.plane(c), plane_bytes);

  if (config.scale == 6) {
    const TensorT<T> up_c = bilinear_upsample(*y_c, 6);
    for (int c = 0; c < 2; ++c)
      std::memcpy(x0.plane(10 + c), up_c.plane(c), plane_bytes);
  }
  return x0;
}

template <typename T>
TensorT<T> forward_trunk(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                         const TensorT<T>& x0, ForwardCacheT<T>* cache) {
  validate_weights(config, w);
  require(x0.channels == config.input_channels, ErrorCode::ShapeMismatch,
          "trunk input channel count differs from config");

  TensorT<T> pre = conv2d_same(x0, w.first);
  TensorT<T> act = relu(pre);
  if (cache) {
    cache->input = x0;
    cache->first_pre = pre;
    cache->block_mid.clear();
    cache->acts.clear();
    cache->acts.push_back(act);
  }

  const T lambda = static_cast<T>(config.lambda);
  for (int i = 0; i < config.depth; ++i) {
    TensorT<T> mid = conv2d_same(act, w.blocks[i][0]);
    TensorT<T> scaled = conv2d_same(relu(mid), w.blocks[i][1]);
    for (int64_t j = 0; j < act.size(); ++j) act.data[j] += lambda * scaled.data[j];
    if (cache) {
      cache->block_mid.push_back(std::move(mid));
      cache->acts.push_back(act);
    }
  }
  return conv2d_same(act, w.last);
}

template <typename T>
TensorT<T> forward(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                   const TensorT<T>& y_a, const TensorT<T>& y_b,
                   const std::type_identity_t<TensorT<T>>* y_c,
                   std::type_identity_t<ForwardCacheT<T>>* cache) {
  TensorT<T> x0 = assemble_input(config, y_a, y_b, y_c);
  TensorT<T> out = forward_trunk(config, w, x0, cache);
  // long skip: add back the upsampled band group being super-resolved
  const int begin = config.skip_channel_begin();
  const int64_t plane = out.plane_size();
  for (int c = 0; c < config.output_channels; ++c) {
    T* o = out.plane(c);
    const T* s = x0.plane(begin + c);
    for (int64_t i = 0; i < plane; ++i) o[i] += s[i];
  }
  return out;
}

template <typename T>
GradientsT<T> backward(const NetworkConfig& config, const NetworkWeightsT<T>& w,
                       const ForwardCacheT<T>& cache, const TensorT<T>& grad_out) {
  validate_weights(config, w);
  const size_t d = static_cast<size_t>(config.depth);
  require(cache.acts.size() == d + 1 && cache.block_mid.size() == d,
          ErrorCode::StaleCache, "cache does not match the network depth");
  require(cache.input.channels == config.input_channels &&
              cache.input.height == grad_out.height &&
              cache.input.width == grad_out.width &&
              cache.first_pre.channels == config.features,
          ErrorCode::StaleCache, "cache does not match the forward inputs");
  require(grad_out.channels == config.output_channels, ErrorCode::ShapeMismatch,
          "grad_out channel count differs from config");
  for (const auto& a : cache.acts)
    require(a.height == grad_out.height && a.width == grad_out.width &&
                a.channels == config.features,
            ErrorCode::StaleCache, "cached activation shape mismatch");

  GradientsT<T> g;
  g.weights = make_weights<T>(config);

  const T lambda = static_cast<T>(config.lambda);

  // last conv
  detail::conv_backward_params(grad_out, cache.acts[d], g.weights.last);
  TensorT<T> grad_act(grad_out.height, grad_out.width, config.features);
  detail::conv_backward_input(grad_out, w.last, grad_act);

  // residual blocks, in reverse
  TensorT<T> scratch(grad_out.height, grad_out.width, config.features);
  for (size_t i = d; i-- > 0;) {
    // conv2 consumed relu(mid); its output gradient is lambda * grad_act
    TensorT<T> grad_c2 = grad_act;
    for (T& v : grad_c2.data) v *= lambda;

    TensorT<T> relu_mid = relu(cache.block_mid[i]);
    detail::conv_backward_params(grad_c2, relu_mid, g.weights.blocks[i][1]);
    detail::conv_backward_input(grad_c2, w.blocks[i][1], scratch);

    // interior ReLU
    const TensorT<T>& mid = cache.block_mid[i];
    for (int64_t j = 0; j < scratch.size(); ++j)
      if (mid.data[j] <= T(0)) scratch.data[j] = T(0);

    detail::conv_backward_params(scratch, cache.acts[i], g.weights.blocks[i][0]);
    TensorT<T> grad_z(grad_out.height, grad_out.width, config.features);
    detail::conv_backward_input(scratch, w.blocks[i][0], grad_z);

    // identity skip of the block
    for (int64_t j = 0; j < grad_act.size(); ++j) grad_act.data[j] += grad_z.data[j];
  }

  // first conv's ReLU
  for (int64_t j = 0; j < grad_act.size(); ++j)
    if (cache.first_pre.data[j] <= T(0)) grad_act.data[j] = T(0);

  detail::conv_backward_params(grad_act, cache.input, g.weights.first);
  g.input = TensorT<T>(grad_out.height, grad_out.width, config.input_channels);
  detail::conv_backward_input(grad_act, w.first, g.input);

  // long skip: the output gradient flows straight into the upsampled slice
  const int begin = config.skip_channel_begin();
  for (int c = 0; c < config.output_channels; ++c) {
    T* gi = g.input.plane(begin + c);
    const T* go = grad_out.plane(c);
    for (int64_t j = 0; j < grad_out.plane_size(); ++j) gi[j] += go[j];
  }
  return g;
}

#define S2SR_INSTANTIATE(T)                                                        \
  template TensorT<T> conv2d_same<T>(const TensorT<T>&, const ConvParamsT<T>&);   \
  template TensorT<T> relu<T>(const TensorT<T>&);                                 \
  template TensorT<T> resblock_forward<T>(const TensorT<T>&, const ConvParamsT<T>&, \
                                          const ConvParamsT<T>&, T);              \
  template TensorT<T> assemble_input<T>(const NetworkConfig&, const TensorT<T>&,  \
                                        const TensorT<T>&, const TensorT<T>*);    \
  template TensorT<T> forward_trunk<T>(const NetworkConfig&, const NetworkWeightsT<T>&, \
                                       const TensorT<T>&, ForwardCacheT<T>*);     \
  template TensorT<T> forward<T>(const NetworkConfig&, const NetworkWeightsT<T>&, \
                                 const TensorT<T>&, const TensorT<T>&,            \
                                 const TensorT<T>*, ForwardCacheT<T>*);           \
  template GradientsT<T> backward<T>(const NetworkConfig&, const NetworkWeightsT<T>&, \
                                     const ForwardCacheT<T>&, const TensorT<T>&);

S2SR_INSTANTIATE(float)
S2SR_INSTANTIATE(double)
#undef S2SR_INSTANTIATE

}  // namespace s2sr
