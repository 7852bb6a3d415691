#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "s2sr/infer.hpp"
#include "s2sr/resample.hpp"
#include "s2sr/rng.hpp"
#include "synthetic.hpp"

using namespace s2sr;

namespace {

double max_abs(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("pad_to_multiple pads, preserves ratios and round-trips") {
  const MultiResScene scene = synthetic::make_scene(100, 1, false);
  const PaddedScene already = pad_to_multiple(scene, 4);
  CHECK(already.scene.width() == 100);
  CHECK(already.scene.set_a[0].data == scene.set_a[0].data);

  const PaddedScene padded = pad_to_multiple(scene, 32);
  CHECK(padded.scene.width() == 128);
  CHECK(padded.scene.height() == 128);
  CHECK(padded.scene.set_b[0].width == 64);
  CHECK(padded.orig_width == 100);

  // cropping back restores the original bit-exactly
  for (size_t i = 0; i < scene.set_a.size(); ++i) {
    const BandImage back = crop_to(padded.scene.set_a[i], 100, 100);
    CHECK(back.data == scene.set_a[i].data);
  }
  for (size_t i = 0; i < scene.set_b.size(); ++i) {
    const BandImage back = crop_to(padded.scene.set_b[i], 50, 50);
    CHECK(back.data == scene.set_b[i].data);
  }
}

TEST_CASE("tiling spec validation") {
  TilingSpec t;
  t.tile = 9;
  CHECK_THROWS_AS(t.validate(2), Error);
  t.tile = 12;
  t.overlap_lowres = 0;
  CHECK_THROWS_AS(t.validate(2), Error);
  t.overlap_lowres = 2;
  t.validate(6);
}

TEST_CASE("zero-weight inference equals bilinear upsampling exactly, tiled and untiled") {
  const MultiResScene scene = synthetic::make_scene(48, 2, false);
  const NetworkConfig config = NetworkConfig::for_scale(2, 2, 4);
  const NetworkWeights zeros = zero_weights(config);

  TilingSpec untiled;
  untiled.tile = 512;
  TilingSpec tiled;
  tiled.tile = 24;
  tiled.overlap_lowres = 2;

  const std::vector<BandImage> a = superresolve(scene, config, zeros, untiled, 1);
  const std::vector<BandImage> b = superresolve(scene, config, zeros, tiled, 2);
  REQUIRE(a.size() == 6);
  for (size_t i = 0; i < a.size(); ++i) {
    const BandImage ref = bilinear_upsample(scene.set_b[i], 2);
    CHECK(a[i].data == ref.data);
    CHECK(b[i].data == ref.data);
    CHECK(a[i].band_id == scene.set_b[i].band_id);
    CHECK(a[i].gsd == 10);
  }
}

TEST_CASE("zero-weight 6x inference survives stitching bit-exactly") {
  const MultiResScene scene = synthetic::make_scene(144, 3, true);
  const NetworkConfig config = NetworkConfig::for_scale(6, 1, 3);
  const NetworkWeights zeros = zero_weights(config);
  TilingSpec tiled;
  tiled.tile = 72;
  tiled.overlap_lowres = 2;
  const std::vector<BandImage> out = superresolve(scene, config, zeros, tiled, 2);
  REQUIRE(out.size() == 2);
  for (size_t i = 0; i < out.size(); ++i) {
    const BandImage ref = bilinear_upsample(scene.set_c[i], 6);
    CHECK(out[i].data == ref.data);
  }
}

TEST_CASE("tiled equals untiled within float accumulation tolerance") {
  const MultiResScene scene = synthetic::make_scene(96, 4, false);
  const NetworkConfig config = NetworkConfig::for_scale(2, 2, 8);
  const NetworkWeights weights = init_he_uniform(config, 11);

  TilingSpec untiled;
  untiled.tile = 96;
  TilingSpec tiled;
  tiled.tile = 64;
  tiled.overlap_lowres = 2;

  const std::vector<BandImage> a = superresolve(scene, config, weights, untiled, 1);
  const std::vector<BandImage> b = superresolve(scene, config, weights, tiled, 2);
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_abs(a[i].data, b[i].data));
  // tolerance is stated in scaled units
  CHECK(worst / 2000.0 <= 1e-4);

  // single tile covering the scene is the untiled path: exactly zero
  TilingSpec cover;
  cover.tile = 96;
  const std::vector<BandImage> c = superresolve(scene, config, weights, cover, 2);
  for (size_t i = 0; i < a.size(); ++i) CHECK(c[i].data == a[i].data);
}

TEST_CASE("stitching adds no seam gradient to the zero-weight output") {
  const MultiResScene scene = synthetic::make_scene(48, 5, false);
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  const NetworkWeights zeros = zero_weights(config);
  TilingSpec tiled;
  tiled.tile = 24;
  tiled.overlap_lowres = 2;
  const std::vector<BandImage> out = superresolve(scene, config, zeros, tiled, 1);

  // tile boundary after cropping sits at x = 20 for this layout
  const BandImage ref = bilinear_upsample(scene.set_b[0], 2);
  for (int y = 0; y < out[0].height; ++y)
    for (int x = 19; x <= 21; ++x) {
      const float g_out = out[0].at(y, x) - out[0].at(y, x - 1);
      const float g_ref = ref.at(y, x) - ref.at(y, x - 1);
      CHECK(g_out == g_ref);
    }
}

TEST_CASE("full-cube inference assembles 12 bands at the base gsd") {
  const MultiResScene scene = synthetic::make_scene(72, 6, true);
  const NetworkConfig c2 = NetworkConfig::for_scale(2, 1, 2);
  const NetworkConfig c6 = NetworkConfig::for_scale(6, 1, 2);
  TilingSpec tiling;
  tiling.tile = 72;

  const std::vector<BandImage> cube = superresolve_all(
      scene, c2, zero_weights(c2), c6, zero_weights(c6), tiling, 1);
  REQUIRE(cube.size() == 12);
  // order: native A bands, then the 2x group, then the 6x group
  CHECK(cube[0].band_id == "B2");
  CHECK(cube[3].band_id == "B8");
  CHECK(cube[4].band_id == "B5");
  CHECK(cube[10].band_id == "B1");
  for (const auto& b : cube) {
    CHECK(b.gsd == 10);
    CHECK(b.width == 72);
  }
  // native bands pass through untouched
  for (int i = 0; i < 4; ++i) CHECK(cube[i].data == scene.set_a[i].data);
  // zero-weight networks degrade to bilinear for the rest
  CHECK(cube[4].data == bilinear_upsample(scene.set_b[0], 2).data);
  CHECK(cube[10].data == bilinear_upsample(scene.set_c[0], 6).data);

  // deterministic across repeated runs
  const std::vector<BandImage> again = superresolve_all(
      scene, c2, zero_weights(c2), c6, zero_weights(c6), tiling, 2);
  for (size_t i = 0; i < cube.size(); ++i) CHECK(cube[i].data == again[i].data);
}

TEST_CASE("configuration mismatches are rejected") {
  const MultiResScene no_c = synthetic::make_scene(48, 7, false);
  const NetworkConfig c6 = NetworkConfig::for_scale(6, 1, 2);
  TilingSpec tiling;
  try {
    superresolve(no_c, c6, zero_weights(c6), tiling, 1);
    FAIL("expected WeightsConfigMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WeightsConfigMismatch);
  }
}

TEST_CASE("degenerate tile interiors are rejected") {
  const MultiResScene scene = synthetic::make_scene(48, 8, false);
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  TilingSpec tiny;
  tiny.tile = 8;
  tiny.overlap_lowres = 2;  // margin 4 per side eats the whole tile
  try {
    superresolve(scene, config, zero_weights(config), tiny, 1);
    FAIL("expected TileTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TileTooSmall);
  }
}

TEST_CASE("per-tile timing is reported for every tile") {
  const MultiResScene scene = synthetic::make_scene(48, 9, false);
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  TilingSpec tiled;
  tiled.tile = 24;
  std::vector<TileTiming> timing;
  superresolve(scene, config, zero_weights(config), tiled, 2, &timing);
  // 48px scene, 24px tiles, stride 16 -> 3 tiles per axis
  CHECK(timing.size() == 9);
  for (const auto& t : timing) {
    CHECK(t.width == 24);
    CHECK(t.seconds >= 0.0);
  }
}
