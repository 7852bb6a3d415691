#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "s2sr/resample.hpp"
#include "s2sr/rng.hpp"
#include "synthetic.hpp"

using namespace s2sr;

namespace {

BandImage random_band(const std::string& id, int w, int h, int gsd, uint64_t seed,
                      float lo = 0.0f, float hi = 10000.0f) {
  BandImage b = make_band(id, w, h, gsd);
  Rng rng(seed);
  for (float& v : b.data) v = rng.uniform(lo, hi);
  return b;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("mtf_to_sigma matches the closed form") {
  CHECK(std::abs(mtf_to_sigma(0.3849) - 0.44) < 0.005);
  CHECK(std::abs(mtf_to_sigma(0.2247) - 0.55) < 0.005);
  CHECK(mtf_to_sigma(0.999999) < 1e-2);  // no blur at perfect transfer
  CHECK_THROWS_AS(mtf_to_sigma(0.0), Error);
  CHECK_THROWS_AS(mtf_to_sigma(1.0), Error);
  CHECK_THROWS_AS(mtf_to_sigma(-0.5), Error);
}

TEST_CASE("mtf_to_sigma is strictly decreasing") {
  double prev = mtf_to_sigma(0.05);
  for (double mtf = 0.10; mtf < 1.0; mtf += 0.05) {
    const double s = mtf_to_sigma(mtf);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("gaussian blur keeps constants bit-exact") {
  const BandImage c = make_band("B5", 9, 7, 20, 1234.56f);
  for (const double sigma : {0.2, 0.5, 1.0, 3.0}) {
    const BandImage out = gaussian_blur(c, sigma);
    CHECK(out.data == c.data);
  }
}

TEST_CASE("gaussian blur of a centered impulse matches the sampled kernel") {
  BandImage img = make_band("B5", 9, 9, 20, 0.0f);
  img.at(4, 4) = 1.0f;
  const BandImage out = gaussian_blur(img, 0.5);
  const BandImage ref = oracle::gaussian_blur(img, 0.5);
  CHECK(max_abs_diff(out.data, ref.data) < 1e-6);
}

TEST_CASE("gaussian blur matches a dense convolution oracle") {
  const BandImage img = random_band("B6", 17, 13, 20, 21);
  for (const double sigma : {0.4, 1.1}) {
    const BandImage out = gaussian_blur(img, sigma);
    const BandImage ref = oracle::gaussian_blur(img, sigma);
    CHECK(max_abs_diff(out.data, ref.data) < 1e-6 * 10000.0);
  }
}

TEST_CASE("gaussian blur approximately preserves the image sum") {
  // interior-dominated: mass kept away from the mirrored borders
  BandImage img = random_band("B7", 32, 32, 20, 5, 100.0f, 2000.0f);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (y < 5 || y >= 27 || x < 5 || x >= 27) img.at(y, x) = 0.0f;
  const BandImage out = gaussian_blur(img, 1.0);
  double s0 = 0.0, s1 = 0.0;
  for (const float v : img.data) s0 += v;
  for (const float v : out.data) s1 += v;
  CHECK(std::abs(s1 - s0) / s0 < 1e-3);
}

TEST_CASE("blur and downsample commute with adding a constant") {
  const BandImage img = random_band("B5", 12, 12, 20, 77, 100.0f, 3000.0f);
  BandImage shifted = img;
  for (float& v : shifted.data) v += 500.0f;

  const BandImage b1 = gaussian_blur(img, 0.7);
  const BandImage b2 = gaussian_blur(shifted, 0.7);
  for (size_t i = 0; i < b1.data.size(); ++i)
    CHECK(std::abs(b2.data[i] - b1.data[i] - 500.0f) < 0.01f);

  const BandImage d1 = area_downsample(img, 2);
  const BandImage d2 = area_downsample(shifted, 2);
  for (size_t i = 0; i < d1.data.size(); ++i)
    CHECK(std::abs(d2.data[i] - d1.data[i] - 500.0f) < 0.01f);
}

TEST_CASE("area downsample of 2x2 block is the plain mean") {
  BandImage img = make_band("B5", 2, 2, 20, 0.0f);
  img.data = {1.0f, 2.0f, 3.0f, 4.0f};
  const BandImage out = area_downsample(img, 2);
  REQUIRE(out.width == 1);
  CHECK(out.data[0] == 2.5f);
  CHECK(out.gsd == 40);
}

TEST_CASE("area downsample keeps constants and matches block means exactly") {
  const BandImage c = make_band("B1", 12, 12, 60, 777.125f);
  const BandImage cd = area_downsample(c, 6);
  for (const float v : cd.data) CHECK(v == 777.125f);

  const BandImage img = random_band("B9", 12, 12, 60, 8);
  const BandImage out = area_downsample(img, 6);
  const BandImage ref = oracle::block_mean(img, 6);
  CHECK(out.data == ref.data);
  CHECK(out.gsd == 360);
}

TEST_CASE("area downsample rejects non-divisible dims") {
  const BandImage img = random_band("B5", 10, 10, 20, 3);
  CHECK_THROWS_AS(area_downsample(img, 3), Error);
}

TEST_CASE("bilinear upsample keeps constants bit-exact and copies single pixels") {
  const BandImage c = make_band("B5", 5, 4, 20, 321.0625f);
  for (const int s : {2, 3, 6}) {
    const BandImage out = bilinear_upsample(c, s);
    CHECK(out.width == 5 * s);
    for (const float v : out.data) CHECK(v == 321.0625f);
  }
  BandImage one = make_band("B9", 1, 1, 60, 0.0f);
  one.data[0] = 42.0f;
  const BandImage rep = bilinear_upsample(one, 6);
  for (const float v : rep.data) CHECK(v == 42.0f);
}

TEST_CASE("bilinear upsample matches the closed-form oracle") {
  BandImage ramp = make_band("B5", 2, 2, 20, 0.0f);
  ramp.data = {0.0f, 1.0f, 2.0f, 3.0f};
  const BandImage out = bilinear_upsample(ramp, 2);
  const BandImage ref = oracle::bilinear_upsample(ramp, 2);
  CHECK(max_abs_diff(out.data, ref.data) < 1e-6);

  const BandImage img = random_band("B6", 7, 5, 20, 91);
  for (const int s : {2, 6}) {
    const BandImage o = bilinear_upsample(img, s);
    const BandImage r = oracle::bilinear_upsample(img, s);
    CHECK(max_abs_diff(o.data, r.data) < 1e-6 * 10000.0);
  }
}

TEST_CASE("bicubic upsample keeps constants and reproduces ramps in the interior") {
  const BandImage c = make_band("B5", 6, 6, 20, 555.5f);
  for (const int s : {2, 6}) {
    const BandImage out = bicubic_upsample(c, s);
    for (const float v : out.data) CHECK(v == 555.5f);
  }

  BandImage ramp = make_band("B5", 8, 8, 20, 0.0f);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(y, x) = static_cast<float>(10 * x + 20 * y);
  const BandImage up = bicubic_upsample(ramp, 2);
  // interior: 2 source pixels in from the border
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x) {
      const double expected = 10.0 * ((x + 0.5) / 2 - 0.5) + 20.0 * ((y + 0.5) / 2 - 0.5);
      CHECK(std::abs(up.at(y, x) - expected) < 1e-4);
    }
}

TEST_CASE("bicubic upsample matches direct kernel summation") {
  const BandImage img = random_band("B11", 6, 6, 20, 17, 0.0f, 1.0f);
  const BandImage out = bicubic_upsample(img, 2);
  const BandImage ref = oracle::bicubic_upsample(img, 2);
  CHECK(max_abs_diff(out.data, ref.data) < 1e-6);
}

TEST_CASE("simulate_scene 2x produces the documented geometry") {
  const MultiResScene scene = synthetic::make_scene(48, 11, false);
  DegradationSpec spec;
  spec.scale = 2;
  const SimulatedScene sim = simulate_scene(scene, spec);

  CHECK(sim.input.base_gsd == 20);
  CHECK(sim.input.width() == 24);
  CHECK(sim.input.set_b[0].gsd == 40);
  CHECK(sim.input.set_b[0].width == 12);
  REQUIRE(sim.targets.size() == 6);
  CHECK(sim.targets[0].gsd == 20);
  CHECK(sim.targets[0].width == 24);
  CHECK(sim.targets[0].band_id == "B5");
  // targets are the untouched originals
  CHECK(sim.targets[0].data == scene.set_b[0].data);
}

TEST_CASE("simulate_scene 6x spans 6x to 36x ground sampling") {
  const MultiResScene scene = synthetic::make_scene(72, 12, true);
  DegradationSpec spec;
  spec.scale = 6;
  const SimulatedScene sim = simulate_scene(scene, spec);
  CHECK(sim.input.base_gsd == 60);
  CHECK(sim.input.set_a[0].gsd == 60);
  CHECK(sim.input.set_b[0].gsd == 120);
  CHECK(sim.input.set_c[0].gsd == 360);
  CHECK(sim.input.width() == 12);
  REQUIRE(sim.targets.size() == 2);
  CHECK(sim.targets[0].gsd == 60);
  CHECK(sim.targets[0].band_id == "B1");
}

TEST_CASE("simulate_scene keeps constants constant") {
  MultiResScene scene;
  scene.base_gsd = 10;
  for (const char* id : kBandsA) scene.set_a.push_back(make_band(id, 24, 24, 10, 900.0f));
  for (const char* id : kBandsB) scene.set_b.push_back(make_band(id, 12, 12, 20, 700.0f));
  DegradationSpec spec;
  spec.scale = 2;
  const SimulatedScene sim = simulate_scene(scene, spec);
  for (const auto& b : sim.input.set_a)
    for (const float v : b.data) CHECK(v == 900.0f);
  for (const auto& b : sim.input.set_b)
    for (const float v : b.data) CHECK(v == 700.0f);
}

TEST_CASE("simulate_scene rejects non-divisible scenes") {
  // finest 24 gives 4x4 bands in the 6x group; those cannot shrink by 6
  const MultiResScene with_c = synthetic::make_scene(24, 14, true);
  DegradationSpec spec;
  spec.scale = 6;
  try {
    simulate_scene(with_c, spec);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("per-band sigma must cover every band") {
  const MultiResScene scene = synthetic::make_scene(24, 15, false);
  DegradationSpec spec;
  spec.scale = 2;
  spec.per_band_sigma["B2"] = 0.5;  // others missing
  CHECK_THROWS_AS(simulate_scene(scene, spec), Error);
}
