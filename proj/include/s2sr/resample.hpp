#pragma once

#include <map>
#include <string>
#include <vector>

#include "s2sr/raster.hpp"
#include "s2sr/tensor.hpp"

namespace s2sr {

// Degradation model used to synthesize training pairs: Gaussian blur at the
// input resolution followed by s x s block averaging. sigma defaults to 1/s
// when left at 0; per_band_sigma overrides it band by band.
struct DegradationSpec {
  int scale = 2;
  double sigma = 0.0;
  std::map<std::string, double> per_band_sigma;

  double sigma_for(const std::string& band_id) const;
  void validate() const;
};

// Gaussian blur std-dev (in low-resolution pixels) equivalent to a sensor
// modulation-transfer-function value: sqrt(-2 ln(mtf) / pi^2).
double mtf_to_sigma(double mtf);

// Separable Gaussian, kernel truncated at radius ceil(4 sigma) and
// renormalized; borders mirrored without repeating the edge pixel.
// Constant images pass through bit-exactly.
BandImage gaussian_blur(const BandImage& image, double sigma);

// Each output pixel is the arithmetic mean of its s x s source block.
BandImage area_downsample(const BandImage& image, int s);

// Pixel-center-aligned interpolation (output center i maps to source
// coordinate (i + 0.5)/s - 0.5); samples outside the image clamp to the
// border. Constant images pass through bit-exactly.
BandImage bilinear_upsample(const BandImage& image, int s);

// Same grid as bilinear with the Keys cubic kernel (a = -0.5).
BandImage bicubic_upsample(const BandImage& image, int s);

// All-channel bilinear upsample used to assemble the network input; shares
// the per-plane kernel with the BandImage overload bit-for-bit.
template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& t, int s);

struct SimulatedScene {
  MultiResScene input;             // every band degraded by spec.scale
  std::vector<BandImage> targets;  // original B group (s=2) or C group (s=6)
};

// Degrades every band of the scene by spec.scale (blur then block-average)
// and keeps the originals of the group being super-resolved as targets.
SimulatedScene simulate_scene(const MultiResScene& scene, const DegradationSpec& spec);

namespace detail {
// Core resampling kernels shared by the BandImage and TensorT overloads.
template <typename T>
void upsample_bilinear_plane(const T* src, int sw, int sh, int s, T* dst);
template <typename T>
void upsample_bicubic_plane(const T* src, int sw, int sh, int s, T* dst);
}  // namespace detail

}  // namespace s2sr
