#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "s2sr/error.hpp"

namespace s2sr {

// Dense H x W x C block of image data, activations or gradients.
// Storage is planar: one row-major H x W plane per channel,
// index = (c * H + y) * W + x.
template <typename T>
struct TensorT {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  TensorT() = default;
  TensorT(int h, int w, int c, T fill = T(0))
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {
    require(h >= 1 && w >= 1 && c >= 1, ErrorCode::ShapeMismatch,
            "tensor dimensions must be positive");
  }

  int64_t plane_size() const { return static_cast<int64_t>(height) * width; }
  int64_t size() const { return plane_size() * channels; }

  T* plane(int c) { return data.data() + static_cast<size_t>(c) * plane_size(); }
  const T* plane(int c) const {
    return data.data() + static_cast<size_t>(c) * plane_size();
  }

  T& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  T at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const TensorT& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

using Tensor = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  TensorT<To> out(t.height, t.width, t.channels);
  for (int64_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (const T v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace s2sr
