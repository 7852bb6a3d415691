#include "s2sr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace s2sr {
namespace {

// Mirror without repeating the edge pixel: -1 -> 1, n -> n-2.
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// One separable pass along x. Anchored at the center tap so constant input
// passes through bit-exactly despite the renormalized kernel.
void blur_pass_x(const std::vector<float>& src, int w, int h,
                 const std::vector<double>& kernel, std::vector<float>& dst) {
  const int radius = static_cast<int>(kernel.size() / 2);
  for (int y = 0; y < h; ++y) {
    const float* row = src.data() + static_cast<size_t>(y) * w;
    float* out = dst.data() + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const double center = row[x];
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        if (k == 0) continue;
        acc += kernel[k + radius] * (row[mirror_index(x + k, w)] - center);
      }
      out[x] = static_cast<float>(center + acc);
    }
  }
}

void blur_pass_y(const std::vector<float>& src, int w, int h,
                 const std::vector<double>& kernel, std::vector<float>& dst) {
  const int radius = static_cast<int>(kernel.size() / 2);
  for (int y = 0; y < h; ++y) {
    float* out = dst.data() + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const double center = src[static_cast<size_t>(y) * w + x];
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        if (k == 0) continue;
        const int sy = mirror_index(y + k, h);
        acc += kernel[k + radius] * (src[static_cast<size_t>(sy) * w + x] - center);
      }
      out[x] = static_cast<float>(center + acc);
    }
  }
}

// Keys cubic kernel, a = -0.5.
template <typename T>
T keys_weight(T t) {
  t = std::abs(t);
  if (t <= T(1)) return (T(1.5) * t - T(2.5)) * t * t + T(1);
  if (t < T(2)) return ((T(-0.5) * t + T(2.5)) * t - T(4)) * t + T(2);
  return T(0);
}

struct Sample1D {
  int i0;  // left/top source index before clamping
  double frac;
};

// Output center i sits at source coordinate (i + 0.5)/s - 0.5. The offset
// and fraction only depend on i mod s; computing them from the residue keeps
// the grid bit-identical for any crop whose origin is a multiple of s (tiled
// and untiled runs must agree exactly).
std::vector<Sample1D> center_aligned_grid(int out_n, int s) {
  std::vector<Sample1D> phase(s);
  for (int k = 0; k < s; ++k) {
    const double coord = (k + 0.5) / s - 0.5;
    const double base = std::floor(coord);
    phase[k] = {static_cast<int>(base), coord - base};
  }
  std::vector<Sample1D> grid(out_n);
  for (int i = 0; i < out_n; ++i)
    grid[i] = {i / s + phase[i % s].i0, phase[i % s].frac};
  return grid;
}

}  // namespace

double mtf_to_sigma(double mtf) {
  require(mtf > 0.0 && mtf < 1.0, ErrorCode::DomainError,
          "mtf must lie strictly between 0 and 1");
  const double pi = std::numbers::pi;
  return std::sqrt(-2.0 * std::log(mtf) / (pi * pi));
}

double DegradationSpec::sigma_for(const std::string& band_id) const {
  const auto it = per_band_sigma.find(band_id);
  if (it != per_band_sigma.end()) return it->second;
  if (sigma > 0.0) return sigma;
  return 1.0 / scale;
}

void DegradationSpec::validate() const {
  require(scale >= 2, ErrorCode::DomainError, "degradation scale must be >= 2");
  require(sigma >= 0.0, ErrorCode::DomainError, "sigma must be positive (0 = default 1/s)");
  for (const auto& [band, s] : per_band_sigma)
    require(s > 0.0, ErrorCode::DomainError, "per-band sigma for " + band + " must be positive");
}

BandImage gaussian_blur(const BandImage& image, double sigma) {
  require(sigma > 0.0, ErrorCode::DomainError, "blur sigma must be positive");
  const auto kernel = gaussian_kernel(sigma);

  BandImage tmp = image;
  BandImage out = image;
  blur_pass_x(image.data, image.width, image.height, kernel, tmp.data);
  blur_pass_y(tmp.data, image.width, image.height, kernel, out.data);
  return out;
}

BandImage area_downsample(const BandImage& image, int s) {
  require(s >= 1, ErrorCode::DomainError, "downsample factor must be >= 1");
  require(image.width % s == 0 && image.height % s == 0, ErrorCode::DimensionMismatch,
          "band " + image.band_id + ": " + std::to_string(image.width) + "x" +
              std::to_string(image.height) + " not divisible by " + std::to_string(s));

  BandImage out = make_band(image.band_id, image.width / s, image.height / s,
                            image.gsd * s);
  const double inv = 1.0 / (static_cast<double>(s) * s);
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      double sum = 0.0;
      for (int dy = 0; dy < s; ++dy) {
        const float* row = &image.at(oy * s + dy, ox * s);
        for (int dx = 0; dx < s; ++dx) sum += row[dx];
      }
      out.at(oy, ox) = static_cast<float>(sum * inv);
    }
  }
  return out;
}

namespace detail {

template <typename T>
void upsample_bilinear_plane(const T* src, int sw, int sh, int s, T* dst) {
  const int ow = sw * s, oh = sh * s;
  const auto gx = center_aligned_grid(ow, s);
  const auto gy = center_aligned_grid(oh, s);
  for (int y = 0; y < oh; ++y) {
    const int y0 = std::clamp(gy[y].i0, 0, sh - 1);
    const int y1 = std::clamp(gy[y].i0 + 1, 0, sh - 1);
    const T fy = static_cast<T>(gy[y].frac);
    const T* row0 = src + static_cast<size_t>(y0) * sw;
    const T* row1 = src + static_cast<size_t>(y1) * sw;
    T* out = dst + static_cast<size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      const int x0 = std::clamp(gx[x].i0, 0, sw - 1);
      const int x1 = std::clamp(gx[x].i0 + 1, 0, sw - 1);
      const T fx = static_cast<T>(gx[x].frac);
      const T top = row0[x0] + fx * (row0[x1] - row0[x0]);
      const T bot = row1[x0] + fx * (row1[x1] - row1[x0]);
      out[x] = top + fy * (bot - top);
    }
  }
}

// Anchored at the second tap (whose weight is 1 minus the others), so
// constants pass through exactly.
template <typename T>
void upsample_bicubic_plane(const T* src, int sw, int sh, int s, T* dst) {
  const int ow = sw * s, oh = sh * s;
  const auto gx = center_aligned_grid(ow, s);
  const auto gy = center_aligned_grid(oh, s);

  auto taps = [](const Sample1D& g, int n, int idx[4], T w[3]) {
    const T t = static_cast<T>(g.frac);
    idx[0] = std::clamp(g.i0 - 1, 0, n - 1);
    idx[1] = std::clamp(g.i0, 0, n - 1);
    idx[2] = std::clamp(g.i0 + 1, 0, n - 1);
    idx[3] = std::clamp(g.i0 + 2, 0, n - 1);
    w[0] = keys_weight(T(1) + t);
    w[1] = keys_weight(T(1) - t);
    w[2] = keys_weight(T(2) - t);
  };

  std::vector<T> column(4);
  for (int y = 0; y < oh; ++y) {
    int yi[4];
    T wy[3];
    taps(gy[y], sh, yi, wy);
    T* out = dst + static_cast<size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      int xi[4];
      T wx[3];
      taps(gx[x], sw, xi, wx);
      for (int r = 0; r < 4; ++r) {
        const T* row = src + static_cast<size_t>(yi[r]) * sw;
        const T anchor = row[xi[1]];
        column[r] = anchor + wx[0] * (row[xi[0]] - anchor) +
                    wx[1] * (row[xi[2]] - anchor) + wx[2] * (row[xi[3]] - anchor);
      }
      const T anchor = column[1];
      out[x] = anchor + wy[0] * (column[0] - anchor) + wy[1] * (column[2] - anchor) +
               wy[2] * (column[3] - anchor);
    }
  }
}

template void upsample_bilinear_plane<float>(const float*, int, int, int, float*);
template void upsample_bilinear_plane<double>(const double*, int, int, int, double*);
template void upsample_bicubic_plane<float>(const float*, int, int, int, float*);
template void upsample_bicubic_plane<double>(const double*, int, int, int, double*);

}  // namespace detail

BandImage bilinear_upsample(const BandImage& image, int s) {
  require(s >= 2, ErrorCode::DomainError, "upsample factor must be >= 2");
  const int gsd = image.gsd % s == 0 ? image.gsd / s : image.gsd;
  BandImage out = make_band(image.band_id, image.width * s, image.height * s, gsd);
  detail::upsample_bilinear_plane(image.data.data(), image.width, image.height, s,
                                  out.data.data());
  return out;
}

BandImage bicubic_upsample(const BandImage& image, int s) {
  require(s >= 2, ErrorCode::DomainError, "upsample factor must be >= 2");
  const int gsd = image.gsd % s == 0 ? image.gsd / s : image.gsd;
  BandImage out = make_band(image.band_id, image.width * s, image.height * s, gsd);
  detail::upsample_bicubic_plane(image.data.data(), image.width, image.height, s,
                                 out.data.data());
  return out;
}

template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& t, int s) {
  require(s >= 2, ErrorCode::DomainError, "upsample factor must be >= 2");
  TensorT<T> out(t.height * s, t.width * s, t.channels);
  for (int c = 0; c < t.channels; ++c)
    detail::upsample_bilinear_plane(t.plane(c), t.width, t.height, s, out.plane(c));
  return out;
}

template TensorT<float> bilinear_upsample<float>(const TensorT<float>&, int);
template TensorT<double> bilinear_upsample<double>(const TensorT<double>&, int);

SimulatedScene simulate_scene(const MultiResScene& scene, const DegradationSpec& spec) {
  spec.validate();
  scene.validate();
  const int s = spec.scale;

  auto check_divisible = [&](const BandImage& b) {
    require(b.width % s == 0 && b.height % s == 0, ErrorCode::DimensionMismatch,
            "band " + b.band_id + " dims not divisible by scale " + std::to_string(s));
  };
  auto check_sigma_cover = [&](const BandImage& b) {
    if (!spec.per_band_sigma.empty())
      require(spec.per_band_sigma.count(b.band_id) > 0, ErrorCode::MissingBand,
              "per_band_sigma does not cover band " + b.band_id);
  };
  for (const auto& b : scene.set_a) { check_divisible(b); check_sigma_cover(b); }
  for (const auto& b : scene.set_b) { check_divisible(b); check_sigma_cover(b); }
  for (const auto& b : scene.set_c) { check_divisible(b); check_sigma_cover(b); }

  SimulatedScene result;
  if (s == 6) {
    require(scene.has_c(), ErrorCode::MissingBand,
            "6x simulation needs the 6x band group as targets");
    result.targets = scene.set_c;
  } else {
    result.targets = scene.set_b;
  }

  auto degrade = [&](const std::vector<BandImage>& bands) {
    std::vector<BandImage> out;
    out.reserve(bands.size());
    for (const auto& b : bands)
      out.push_back(area_downsample(gaussian_blur(b, spec.sigma_for(b.band_id)), s));
    return out;
  };
  result.input.set_a = degrade(scene.set_a);
  result.input.set_b = degrade(scene.set_b);
  result.input.set_c = degrade(scene.set_c);
  result.input.base_gsd = scene.base_gsd * s;
  result.input.validate();
  return result;
}

}  // namespace s2sr
