#include "s2sr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace s2sr {
namespace {

constexpr char kBandMagic[4] = {'S', '2', 'S', 'R'};
constexpr uint16_t kBandFormatVersion = 1;
constexpr size_t kBandHeaderSize = 32;
constexpr int kManifestVersion = 1;

void put_u16(unsigned char* p, uint16_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>(v >> 8);
}

void put_u32(unsigned char* p, uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

int group_index(const std::string& id) {
  auto find = [&](const auto& set) {
    for (size_t i = 0; i < set.size(); ++i)
      if (id == set[i]) return static_cast<int>(i);
    return -1;
  };
  int i = find(kBandsA);
  if (i >= 0) return i;
  i = find(kBandsB);
  if (i >= 0) return i;
  return find(kBandsC);
}

void sort_canonical(std::vector<BandImage>& bands) {
  std::sort(bands.begin(), bands.end(), [](const BandImage& a, const BandImage& b) {
    return group_index(a.band_id) < group_index(b.band_id);
  });
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

char band_group(const std::string& band_id) {
  for (const char* b : kBandsA)
    if (band_id == b) return 'A';
  for (const char* b : kBandsB)
    if (band_id == b) return 'B';
  for (const char* b : kBandsC)
    if (band_id == b) return 'C';
  return 0;
}

void BandImage::validate() const {
  require(width >= 1 && height >= 1, ErrorCode::InvariantViolation,
          "band " + band_id + ": dimensions must be at least 1x1");
  require(data.size() == static_cast<size_t>(width) * height,
          ErrorCode::InvariantViolation,
          "band " + band_id + ": data length does not match width*height");
  require(std::find(kValidGsd.begin(), kValidGsd.end(), gsd) != kValidGsd.end(),
          ErrorCode::InvariantViolation,
          "band " + band_id + ": unsupported gsd " + std::to_string(gsd));
  require(!band_id.empty() && band_id.size() <= 8, ErrorCode::InvariantViolation,
          "band id must be 1..8 characters");
  for (const float v : data)
    require(std::isfinite(v), ErrorCode::InvariantViolation,
            "band " + band_id + ": non-finite pixel value");
}

BandImage make_band(const std::string& band_id, int width, int height, int gsd,
                    float fill) {
  BandImage img;
  img.band_id = band_id;
  img.width = width;
  img.height = height;
  img.gsd = gsd;
  img.data.assign(static_cast<size_t>(width) * height, fill);
  return img;
}

BandImage crop(const BandImage& src, int x0, int y0, int w, int h) {
  require(x0 >= 0 && y0 >= 0 && w >= 1 && h >= 1 && x0 + w <= src.width &&
              y0 + h <= src.height,
          ErrorCode::DimensionMismatch, "crop window outside band " + src.band_id);
  BandImage out = make_band(src.band_id, w, h, src.gsd);
  for (int y = 0; y < h; ++y)
    std::memcpy(&out.at(y, 0), &src.at(y0 + y, x0), sizeof(float) * w);
  return out;
}

void MultiResScene::validate() const {
  require(set_a.size() == kBandsA.size(), ErrorCode::MissingBand,
          "scene needs exactly 4 base-resolution bands");
  require(set_b.size() == kBandsB.size(), ErrorCode::MissingBand,
          "scene needs exactly 6 half-resolution bands");
  require(set_c.empty() || set_c.size() == kBandsC.size(), ErrorCode::MissingBand,
          "the 6x band group must be complete or absent");

  for (size_t i = 0; i < set_a.size(); ++i)
    require(set_a[i].band_id == kBandsA[i], ErrorCode::MissingBand,
            "base group must be " + std::string(kBandsA[0]) + "..: got " +
                set_a[i].band_id);
  for (size_t i = 0; i < set_b.size(); ++i)
    require(set_b[i].band_id == kBandsB[i], ErrorCode::MissingBand,
            "2x group band mismatch: got " + set_b[i].band_id);
  for (size_t i = 0; i < set_c.size(); ++i)
    require(set_c[i].band_id == kBandsC[i], ErrorCode::MissingBand,
            "6x group band mismatch: got " + set_c[i].band_id);

  const int w = width(), h = height();
  const int div = has_c() ? 6 : 2;
  require(w % div == 0 && h % div == 0, ErrorCode::DimensionMismatch,
          "finest dims " + std::to_string(w) + "x" + std::to_string(h) +
              " not divisible by " + std::to_string(div));

  for (const auto& b : set_a) {
    b.validate();
    require(b.width == w && b.height == h, ErrorCode::DimensionMismatch,
            "base-group bands must share dimensions");
    require(b.gsd == base_gsd, ErrorCode::DimensionMismatch,
            "base-group gsd must equal base_gsd");
  }
  for (const auto& b : set_b) {
    b.validate();
    require(b.width == w / 2 && b.height == h / 2, ErrorCode::DimensionMismatch,
            "2x-group bands must be exactly half the finest dims");
    require(b.gsd == 2 * base_gsd, ErrorCode::DimensionMismatch,
            "2x-group gsd must be twice base_gsd");
  }
  for (const auto& b : set_c) {
    b.validate();
    require(b.width == w / 6 && b.height == h / 6, ErrorCode::DimensionMismatch,
            "6x-group bands must be exactly one sixth of the finest dims");
    require(b.gsd == 6 * base_gsd, ErrorCode::DimensionMismatch,
            "6x-group gsd must be six times base_gsd");
  }
}

void write_band(const BandImage& image, const std::filesystem::path& path) {
  image.validate();

  unsigned char header[kBandHeaderSize] = {0};
  std::memcpy(header, kBandMagic, 4);
  put_u16(header + 4, kBandFormatVersion);
  put_u32(header + 6, static_cast<uint32_t>(image.width));
  put_u32(header + 10, static_cast<uint32_t>(image.height));
  put_u16(header + 14, static_cast<uint16_t>(image.gsd));
  std::memcpy(header + 16, image.band_id.data(), image.band_id.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(header), kBandHeaderSize);

  std::vector<unsigned char> buf(image.data.size() * 4);
  for (size_t i = 0; i < image.data.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &image.data[i], 4);
    put_u32(buf.data() + 4 * i, bits);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorCode::IoFailure, "short write to " + path.string());
}

BandImage read_band(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());

  unsigned char header[kBandHeaderSize];
  in.read(reinterpret_cast<char*>(header), kBandHeaderSize);
  require(in.gcount() == kBandHeaderSize, ErrorCode::CorruptHeader,
          path.string() + ": truncated header");
  require(std::memcmp(header, kBandMagic, 4) == 0, ErrorCode::CorruptHeader,
          path.string() + ": bad magic");
  const uint16_t version = get_u16(header + 4);
  require(version == kBandFormatVersion, ErrorCode::VersionUnsupported,
          path.string() + ": format version " + std::to_string(version));

  BandImage img;
  img.width = static_cast<int>(get_u32(header + 6));
  img.height = static_cast<int>(get_u32(header + 10));
  img.gsd = get_u16(header + 14);
  const char* id = reinterpret_cast<const char*>(header + 16);
  img.band_id.assign(id, strnlen(id, 8));

  require(img.width >= 1 && img.height >= 1 &&
              static_cast<int64_t>(img.width) * img.height < (int64_t(1) << 34),
          ErrorCode::CorruptHeader, path.string() + ": implausible dimensions");

  const size_t n = static_cast<size_t>(img.width) * img.height;
  std::vector<unsigned char> buf(n * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(in.gcount() == static_cast<std::streamsize>(buf.size()),
          ErrorCode::CorruptHeader, path.string() + ": truncated pixel data");

  img.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = get_u32(buf.data() + 4 * i);
    std::memcpy(&img.data[i], &bits, 4);
  }
  img.validate();
  return img;
}

SceneManifest parse_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + manifest_path.string());

  SceneManifest manifest;
  bool saw_version = false, saw_gsd = false;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const size_t colon = line.find(':');
    require(colon != std::string::npos, ErrorCode::CorruptHeader,
            "manifest line without key: " + line);
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "version") {
      manifest.version = std::stoi(value);
      saw_version = true;
    } else if (key == "base_gsd" || key == "gsd") {
      manifest.base_gsd = std::stoi(value);
      saw_gsd = true;
    } else if (key == "band") {
      ManifestEntry entry;
      std::istringstream fields(value);
      if (!(fields >> entry.band_id >> entry.path >> entry.width >> entry.height))
        fail(ErrorCode::CorruptHeader, "bad band entry: " + line);
      manifest.bands.push_back(entry);
    } else {
      fail(ErrorCode::CorruptHeader, "unknown manifest key: " + key);
    }
  }
  require(saw_version, ErrorCode::CorruptHeader, "manifest missing version");
  require(manifest.version == kManifestVersion, ErrorCode::VersionUnsupported,
          "manifest version " + std::to_string(manifest.version));
  require(saw_gsd, ErrorCode::CorruptHeader, "manifest missing base_gsd");
  require(!manifest.bands.empty(), ErrorCode::CorruptHeader, "manifest lists no bands");
  return manifest;
}

MultiResScene read_scene(const std::filesystem::path& manifest_path) {
  const SceneManifest manifest = parse_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();

  MultiResScene scene;
  scene.base_gsd = manifest.base_gsd;
  for (const auto& entry : manifest.bands) {
    const char group = band_group(entry.band_id);
    require(group != 0, ErrorCode::CorruptHeader,
            "manifest lists unknown band " + entry.band_id);
    BandImage band = read_band(dir / entry.path);
    require(band.width == entry.width && band.height == entry.height,
            ErrorCode::CorruptHeader,
            entry.band_id + ": manifest dims disagree with file header");
    require(band.band_id == entry.band_id, ErrorCode::CorruptHeader,
            entry.band_id + ": file header carries band id " + band.band_id);
    if (group == 'A') scene.set_a.push_back(std::move(band));
    else if (group == 'B') scene.set_b.push_back(std::move(band));
    else scene.set_c.push_back(std::move(band));
  }
  sort_canonical(scene.set_a);
  sort_canonical(scene.set_b);
  sort_canonical(scene.set_c);
  scene.validate();
  return scene;
}

void write_scene(const MultiResScene& scene,
                 const std::filesystem::path& manifest_path) {
  scene.validate();
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  std::ostringstream manifest;
  manifest << "version: " << kManifestVersion << "\n";
  manifest << "base_gsd: " << scene.base_gsd << "\n";
  auto emit = [&](const std::vector<BandImage>& bands) {
    for (const auto& band : bands) {
      const std::string file = band.band_id + ".s2sr";
      write_band(band, dir / file);
      manifest << "band: " << band.band_id << " " << file << " " << band.width
               << " " << band.height << "\n";
    }
  };
  emit(scene.set_a);
  emit(scene.set_b);
  emit(scene.set_c);

  std::ofstream out(manifest_path, std::ios::trunc);
  require(out.good(), ErrorCode::IoFailure, "cannot open " + manifest_path.string());
  out << manifest.str();
  require(out.good(), ErrorCode::IoFailure, "short write to " + manifest_path.string());
}

void write_band_list(const std::vector<BandImage>& bands,
                     const std::filesystem::path& listing_path) {
  require(!bands.empty(), ErrorCode::MissingBand, "band list is empty");
  for (const auto& b : bands)
    require(b.gsd == bands.front().gsd, ErrorCode::DimensionMismatch,
            "band list must share one gsd");
  const auto dir = listing_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  std::ofstream out(listing_path, std::ios::trunc);
  require(out.good(), ErrorCode::IoFailure, "cannot open " + listing_path.string());
  out << "version: " << kManifestVersion << "\n";
  out << "gsd: " << bands.front().gsd << "\n";
  for (const auto& band : bands) {
    const std::string file = band.band_id + ".s2sr";
    write_band(band, dir / file);
    out << "band: " << band.band_id << " " << file << " " << band.width << " "
        << band.height << "\n";
  }
  require(out.good(), ErrorCode::IoFailure, "short write to " + listing_path.string());
}

std::vector<BandImage> read_band_list(const std::filesystem::path& listing_path) {
  const SceneManifest manifest = parse_manifest(listing_path);
  const auto dir = listing_path.parent_path();
  std::vector<BandImage> bands;
  for (const auto& entry : manifest.bands) {
    BandImage band = read_band(dir / entry.path);
    require(band.width == entry.width && band.height == entry.height,
            ErrorCode::CorruptHeader,
            entry.band_id + ": listing dims disagree with file header");
    require(band.gsd == manifest.base_gsd, ErrorCode::CorruptHeader,
            entry.band_id + ": listing gsd disagrees with file header");
    bands.push_back(std::move(band));
  }
  return bands;
}

}  // namespace s2sr
