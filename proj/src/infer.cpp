#include "s2sr/infer.hpp"

#include <chrono>
#include <cstring>

#include "s2sr/parallel.hpp"
#include "s2sr/resample.hpp"

namespace s2sr {
namespace {

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

BandImage reflect_pad(const BandImage& band, int new_w, int new_h) {
  BandImage out = make_band(band.band_id, new_w, new_h, band.gsd);
  for (int y = 0; y < new_h; ++y) {
    const int sy = mirror_index(y, band.height);
    for (int x = 0; x < new_w; ++x)
      out.at(y, x) = band.at(sy, mirror_index(x, band.width));
  }
  return out;
}

Tensor stack_bands(const std::vector<BandImage>& bands, float scale_inv) {
  Tensor t(bands.front().height, bands.front().width, static_cast<int>(bands.size()));
  for (size_t c = 0; c < bands.size(); ++c) {
    float* plane = t.plane(static_cast<int>(c));
    const auto& src = bands[c].data;
    for (size_t i = 0; i < src.size(); ++i) plane[i] = src[i] * scale_inv;
  }
  return t;
}

Tensor crop_tensor(const Tensor& t, int x0, int y0, int w, int h) {
  Tensor out(h, w, t.channels);
  for (int c = 0; c < t.channels; ++c)
    for (int y = 0; y < h; ++y)
      std::memcpy(out.plane(c) + static_cast<size_t>(y) * w,
                  t.plane(c) + (static_cast<size_t>(y0 + y) * t.width + x0),
                  sizeof(float) * static_cast<size_t>(w));
  return out;
}

struct AxisTile {
  int start = 0;       // tile origin in output pixels
  int size = 0;        // tile extent
  int kept_begin = 0;  // stitched interval [kept_begin, kept_end)
  int kept_end = 0;
};

// Lays tiles with stride tile - 2*margin; each contributes its interior,
// border tiles keep their outer margins, and the shifted last tile never
// overlaps the region already covered.
std::vector<AxisTile> plan_axis(int dim, int tile, int margin, int align) {
  std::vector<AxisTile> out;
  if (tile >= dim) {
    out.push_back({0, dim, 0, dim});
    return out;
  }
  const int step = tile - 2 * margin;
  require(step >= align, ErrorCode::TileTooSmall,
          "tile interior is empty after overlap cropping");

  std::vector<int> starts;
  for (int p = 0;; p += step) {
    if (p + tile >= dim) {
      starts.push_back(dim - tile);
      break;
    }
    starts.push_back(p);
  }
  for (size_t k = 0; k < starts.size(); ++k) {
    AxisTile t;
    t.start = starts[k];
    t.size = tile;
    t.kept_begin = k == 0 ? 0 : std::max(starts[k] + margin, out.back().kept_end);
    t.kept_end = k + 1 == starts.size() ? dim : starts[k] + tile - margin;
    require(t.kept_begin < t.kept_end, ErrorCode::TileTooSmall,
            "degenerate tile interior");
    out.push_back(t);
  }
  return out;
}

}  // namespace

void TilingSpec::validate(int scale) const {
  require(tile >= scale && tile % scale == 0, ErrorCode::InvariantViolation,
          "tile edge must be a positive multiple of " + std::to_string(scale));
  require(overlap_lowres >= 1, ErrorCode::InvariantViolation,
          "overlap must be at least one low-resolution pixel");
}

PaddedScene pad_to_multiple(const MultiResScene& scene, int multiple) {
  scene.validate();
  require(multiple >= 1, ErrorCode::DomainError, "pad multiple must be >= 1");

  const int w = scene.width(), h = scene.height();
  const int new_w = (w + multiple - 1) / multiple * multiple;
  const int new_h = (h + multiple - 1) / multiple * multiple;

  PaddedScene out;
  out.orig_width = w;
  out.orig_height = h;
  out.scene.base_gsd = scene.base_gsd;

  auto pad_group = [&](const std::vector<BandImage>& bands, int ratio) {
    std::vector<BandImage> padded;
    if (bands.empty()) return padded;
    require(new_w % ratio == 0 && new_h % ratio == 0, ErrorCode::DimensionMismatch,
            "pad multiple incompatible with the band-group ratios");
    for (const auto& b : bands)
      padded.push_back(b.width == new_w / ratio && b.height == new_h / ratio
                           ? b
                           : reflect_pad(b, new_w / ratio, new_h / ratio));
    return padded;
  };
  out.scene.set_a = pad_group(scene.set_a, 1);
  out.scene.set_b = pad_group(scene.set_b, 2);
  out.scene.set_c = pad_group(scene.set_c, 6);
  out.scene.validate();
  return out;
}

BandImage crop_to(const BandImage& band, int width, int height) {
  if (band.width == width && band.height == height) return band;
  return crop(band, 0, 0, width, height);
}

std::vector<BandImage> superresolve(const MultiResScene& scene,
                                    const NetworkConfig& config,
                                    const NetworkWeights& weights,
                                    const TilingSpec& tiling, int threads,
                                    std::vector<TileTiming>* timing) {
  scene.validate();
  config.validate();
  validate_weights(config, weights);
  require(config.scale == 2 || scene.has_c(), ErrorCode::WeightsConfigMismatch,
          "a 6x checkpoint needs a scene with the 6x band group");

  const int s = config.scale;
  const int w = scene.width(), h = scene.height();
  const int margin = tiling.overlap_lowres * s;
  const float inv_scale = static_cast<float>(1.0 / kValueScale);

  // snap the requested tile edge onto the coarse-band grid
  TilingSpec effective = tiling;
  effective.tile = std::max(s, std::min(tiling.tile, std::min(w, h)) / s * s);
  effective.validate(s);

  // Each tile reads this much extra real context beyond its own extent, so
  // the zero padding at the crop boundary never reaches a kept pixel and
  // the stitched result is bit-identical to an untiled pass (scene borders
  // zero-pad in both). 2d+2 convolutions spread one pixel each.
  const int receptive = 2 * config.depth + 2;
  const int context = (receptive + s - 1) / s * s;

  const Tensor ya = stack_bands(scene.set_a, inv_scale);
  const Tensor yb = stack_bands(scene.set_b, inv_scale);
  Tensor yc;
  if (scene.has_c()) yc = stack_bands(scene.set_c, inv_scale);

  // the band group being super-resolved, unscaled, for the long skip
  const Tensor raw_low = stack_bands(s == 2 ? scene.set_b : scene.set_c, 1.0f);
  const int low_ratio = s;  // raw_low grid relative to the finest grid

  const auto tiles_x = plan_axis(w, effective.tile, margin, s);
  const auto tiles_y = plan_axis(h, effective.tile, margin, s);

  const auto& out_ids = s == 2 ? std::vector<std::string>(kBandsB.begin(), kBandsB.end())
                               : std::vector<std::string>(kBandsC.begin(), kBandsC.end());
  std::vector<BandImage> out;
  for (const auto& id : out_ids) out.push_back(make_band(id, w, h, scene.base_gsd));

  const int64_t n_tiles = static_cast<int64_t>(tiles_x.size()) * tiles_y.size();
  if (timing) timing->assign(static_cast<size_t>(n_tiles), TileTiming{});

  parallel_for(n_tiles, threads, [&](int64_t t) {
    const AxisTile& tx = tiles_x[static_cast<size_t>(t) % tiles_x.size()];
    const AxisTile& ty = tiles_y[static_cast<size_t>(t) / tiles_x.size()];
    const auto t0 = std::chrono::steady_clock::now();

    const int in_x0 = std::max(0, tx.start - context);
    const int in_y0 = std::max(0, ty.start - context);
    const int in_w = std::min(w, tx.start + tx.size + context) - in_x0;
    const int in_h = std::min(h, ty.start + ty.size + context) - in_y0;

    const Tensor ya_t = crop_tensor(ya, in_x0, in_y0, in_w, in_h);
    const Tensor yb_t = crop_tensor(yb, in_x0 / 2, in_y0 / 2, in_w / 2, in_h / 2);
    Tensor yc_t;
    const Tensor* yc_ptr = nullptr;
    if (s == 6) {
      yc_t = crop_tensor(yc, in_x0 / 6, in_y0 / 6, in_w / 6, in_h / 6);
      yc_ptr = &yc_t;
    }

    const Tensor x0 = assemble_input(config, ya_t, yb_t, yc_ptr);
    const Tensor correction = forward_trunk(config, weights, x0);
    const Tensor skip = bilinear_upsample(
        crop_tensor(raw_low, in_x0 / low_ratio, in_y0 / low_ratio,
                    in_w / low_ratio, in_h / low_ratio),
        low_ratio);

    for (int c = 0; c < config.output_channels; ++c) {
      const float* corr = correction.plane(c);
      const float* sk = skip.plane(c);
      BandImage& band = out[static_cast<size_t>(c)];
      for (int y = ty.kept_begin; y < ty.kept_end; ++y) {
        const size_t row = static_cast<size_t>(y - in_y0) * in_w;
        for (int x = tx.kept_begin; x < tx.kept_end; ++x) {
          const size_t i = row + static_cast<size_t>(x - in_x0);
          band.at(y, x) = corr[i] * static_cast<float>(kValueScale) + sk[i];
        }
      }
    }

    if (timing) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      (*timing)[static_cast<size_t>(t)] =
          TileTiming{tx.start, ty.start, tx.size, ty.size, dt.count()};
    }
  });
  return out;
}

std::vector<BandImage> superresolve_all(const MultiResScene& scene,
                                        const NetworkConfig& config_2x,
                                        const NetworkWeights& weights_2x,
                                        const NetworkConfig& config_6x,
                                        const NetworkWeights& weights_6x,
                                        const TilingSpec& tiling, int threads,
                                        std::vector<TileTiming>* timing) {
  require(scene.has_c(), ErrorCode::MissingBand,
          "the full cube needs the 6x band group");
  require(config_2x.scale == 2 && config_6x.scale == 6,
          ErrorCode::WeightsConfigMismatch, "checkpoints passed in the wrong order");

  std::vector<TileTiming> t2, t6;
  std::vector<BandImage> cube = scene.set_a;
  // the 6x network consumes the original band groups, not the 2x outputs
  std::vector<BandImage> xb =
      superresolve(scene, config_2x, weights_2x, tiling, threads, timing ? &t2 : nullptr);
  std::vector<BandImage> xc =
      superresolve(scene, config_6x, weights_6x, tiling, threads, timing ? &t6 : nullptr);
  for (auto& b : xb) cube.push_back(std::move(b));
  for (auto& b : xc) cube.push_back(std::move(b));
  if (timing) {
    *timing = std::move(t2);
    timing->insert(timing->end(), t6.begin(), t6.end());
  }
  return cube;
}

}  // namespace s2sr
