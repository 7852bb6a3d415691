#include "s2sr/checkpoint.hpp"

#include <cstring>

#include "bytes.hpp"

namespace s2sr {
namespace {

constexpr char kMagic[4] = {'S', '2', 'C', 'K'};
constexpr uint16_t kVersion = 1;

void write_tensor(bytes::Writer& w, const std::vector<float>& data,
                  std::initializer_list<int> dims) {
  w.u32(static_cast<uint32_t>(dims.size()));
  size_t total = 1;
  for (int d : dims) {
    w.u32(static_cast<uint32_t>(d));
    total *= static_cast<size_t>(d);
  }
  w.f32_array(data.data(), data.size());
  require(total == data.size(), ErrorCode::ShapeMismatch,
          "checkpoint tensor size disagrees with its dims");
}

void read_tensor(bytes::Reader& r, std::vector<float>& data,
                 std::initializer_list<int> dims) {
  const uint32_t ndim = r.u32();
  require(ndim == dims.size(), ErrorCode::CorruptHeader,
          r.path() + ": unexpected tensor rank");
  size_t total = 1;
  for (int d : dims) {
    const uint32_t got = r.u32();
    require(got == static_cast<uint32_t>(d), ErrorCode::CorruptHeader,
            r.path() + ": tensor dim " + std::to_string(got) + " where " +
                std::to_string(d) + " was declared");
    total *= static_cast<size_t>(d);
  }
  data.resize(total);
  r.f32_array(data.data(), total);
}

}  // namespace

void save_weights(const NetworkConfig& config, const NetworkWeights& weights,
                  const std::filesystem::path& path) {
  validate_weights(config, weights);
  bytes::Writer w(path);
  w.raw(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<uint32_t>(config.depth));
  w.u32(static_cast<uint32_t>(config.features));
  w.u32(static_cast<uint32_t>(config.input_channels));
  w.u32(static_cast<uint32_t>(config.output_channels));
  w.u16(static_cast<uint16_t>(config.scale));
  w.f32(config.lambda);
  w.u64(static_cast<uint64_t>(param_count(config).params));

  for_each_conv(weights, [&](const ConvParams& p) {
    write_tensor(w, p.kernel, {p.out_channels, p.in_channels, 3, 3});
    write_tensor(w, p.bias, {p.out_channels});
  });
  w.finish();
}

std::pair<NetworkConfig, NetworkWeights> load_weights(
    const std::filesystem::path& path) {
  bytes::Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorCode::CorruptHeader,
          path.string() + ": bad checkpoint magic");
  const uint16_t version = r.u16();
  require(version == kVersion, ErrorCode::VersionUnsupported,
          path.string() + ": checkpoint version " + std::to_string(version));

  NetworkConfig config;
  config.depth = static_cast<int>(r.u32());
  config.features = static_cast<int>(r.u32());
  config.input_channels = static_cast<int>(r.u32());
  config.output_channels = static_cast<int>(r.u32());
  config.scale = r.u16();
  config.lambda = r.f32();
  config.validate();

  const uint64_t declared = r.u64();
  const ParamCount expected = param_count(config);
  require(declared == static_cast<uint64_t>(expected.params), ErrorCode::CorruptHeader,
          path.string() + ": declared parameter count " + std::to_string(declared) +
              " does not match the config's " + std::to_string(expected.params));

  NetworkWeights weights = make_weights<float>(config);
  for_each_conv(weights, [&](ConvParams& p) {
    read_tensor(r, p.kernel, {p.out_channels, p.in_channels, 3, 3});
    read_tensor(r, p.bias, {p.out_channels});
  });
  return {config, weights};
}

void check_config(const NetworkConfig& expected, const NetworkConfig& loaded) {
  require(expected.depth == loaded.depth && expected.features == loaded.features &&
              expected.input_channels == loaded.input_channels &&
              expected.output_channels == loaded.output_channels &&
              expected.scale == loaded.scale && expected.lambda == loaded.lambda,
          ErrorCode::ShapeMismatch,
          "checkpoint config conflicts with the requested one");
}

}  // namespace s2sr
