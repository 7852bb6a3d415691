#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "s2sr/error.hpp"

namespace s2sr {

// Band groups by ground sampling distance: set A at the base GSD, set B at
// twice the base, set C at six times the base. Channel order within a group
// is fixed; tensors, patch files and checkpoints all rely on it.
inline constexpr std::array<const char*, 4> kBandsA = {"B2", "B3", "B4", "B8"};
inline constexpr std::array<const char*, 6> kBandsB = {"B5",  "B6",  "B7",
                                                       "B8a", "B11", "B12"};
inline constexpr std::array<const char*, 2> kBandsC = {"B1", "B9"};

inline constexpr std::array<int, 7> kValidGsd = {10, 20, 40, 60, 80, 120, 360};

// 'A', 'B', 'C', or 0 for an unknown band id.
char band_group(const std::string& band_id);

// Single-band raster. Values are top-of-atmosphere reflectance times 1e4,
// stored unscaled; they may exceed 10000.
struct BandImage {
  int width = 0;
  int height = 0;
  int gsd = 10;  // metres per pixel
  std::string band_id;
  std::vector<float> data;  // row-major

  const float& at(int y, int x) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }

  void validate() const;  // throws InvariantViolation
};

BandImage make_band(const std::string& band_id, int width, int height, int gsd,
                    float fill = 0.0f);

BandImage crop(const BandImage& src, int x0, int y0, int w, int h);

// Co-registered multi-resolution scene: 4 bands at the base GSD, 6 at twice,
// optionally 2 at six times. Finest dims W x H; the B group is W/2 x H/2 and
// the C group W/6 x H/6.
struct MultiResScene {
  std::vector<BandImage> set_a;
  std::vector<BandImage> set_b;
  std::vector<BandImage> set_c;  // empty when the 6x group is absent
  int base_gsd = 10;

  bool has_c() const { return !set_c.empty(); }
  int width() const { return set_a.empty() ? 0 : set_a.front().width; }
  int height() const { return set_a.empty() ? 0 : set_a.front().height; }

  void validate() const;
};

struct ManifestEntry {
  std::string band_id;
  std::string path;  // relative to the manifest file
  int width = 0;
  int height = 0;
};

struct SceneManifest {
  int version = 1;
  int base_gsd = 10;
  std::vector<ManifestEntry> bands;
};

// Binary band container: 32-byte header (magic "S2SR", version u16,
// width u32, height u32, gsd u16, band id as 8 ASCII bytes, 8 reserved),
// then row-major little-endian float32.
void write_band(const BandImage& image, const std::filesystem::path& path);
BandImage read_band(const std::filesystem::path& path);

SceneManifest parse_manifest(const std::filesystem::path& manifest_path);

MultiResScene read_scene(const std::filesystem::path& manifest_path);

// Writes one band file per band next to the manifest.
void write_scene(const MultiResScene& scene,
                 const std::filesystem::path& manifest_path);

// Flat single-GSD band listing (simulation targets, super-resolved cubes).
// Same key:value layout as the scene manifest with a `gsd:` line.
void write_band_list(const std::vector<BandImage>& bands,
                     const std::filesystem::path& listing_path);
std::vector<BandImage> read_band_list(const std::filesystem::path& listing_path);

}  // namespace s2sr
