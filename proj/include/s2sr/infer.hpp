#pragma once

#include <vector>

#include "s2sr/network.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

// Tile layout for full-scene inference. `tile` is the tile edge in output
// pixels; `overlap_lowres` is the per-side overlap in pixels of the band
// group being super-resolved (so the cropped margin is overlap_lowres *
// scale output pixels).
struct TilingSpec {
  int tile = 512;
  int overlap_lowres = 2;

  void validate(int scale) const;
};

struct PaddedScene {
  MultiResScene scene;
  int orig_width = 0;
  int orig_height = 0;
};

// Reflect-pads every band on the right/bottom so the finest dims become
// multiples of `multiple`; coarse bands are padded to keep the 1 : 1/2 :
// 1/6 ratios. The original dims are recorded for the final crop.
PaddedScene pad_to_multiple(const MultiResScene& scene, int multiple);

BandImage crop_to(const BandImage& band, int width, int height);

struct TileTiming {
  int x0 = 0, y0 = 0, width = 0, height = 0;
  double seconds = 0.0;
};

// Full-scene super-resolution: tiles the scene with the given overlap, runs
// the network per tile (values scaled by 1/2000 on the way in; the long skip
// is applied in raw units, see forward_trunk), and stitches the disjoint
// tile interiors. Returns the predicted band group at the finest GSD.
std::vector<BandImage> superresolve(const MultiResScene& scene,
                                    const NetworkConfig& config,
                                    const NetworkWeights& weights,
                                    const TilingSpec& tiling, int threads = 1,
                                    std::vector<TileTiming>* timing = nullptr);

// Runs the 2x and the 6x networks independently (the 6x network consumes the
// original band groups, not the 2x outputs) and assembles the complete cube:
// the 4 native bands plus 6 + 2 super-resolved ones, all at the base GSD.
std::vector<BandImage> superresolve_all(const MultiResScene& scene,
                                        const NetworkConfig& config_2x,
                                        const NetworkWeights& weights_2x,
                                        const NetworkConfig& config_6x,
                                        const NetworkWeights& weights_6x,
                                        const TilingSpec& tiling, int threads = 1,
                                        std::vector<TileTiming>* timing = nullptr);

inline constexpr double kValueScale = 2000.0;

}  // namespace s2sr
