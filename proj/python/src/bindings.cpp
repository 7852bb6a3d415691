#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "s2sr/checkpoint.hpp"
#include "s2sr/infer.hpp"
#include "s2sr/metrics.hpp"
#include "s2sr/network.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/resample.hpp"
#include "s2sr/train.hpp"

namespace py = pybind11;
using namespace s2sr;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

BandImage band_from_array(const std::string& band_id, const FloatArray& arr, int gsd) {
  require(arr.ndim() == 2, ErrorCode::ShapeMismatch, "band array must be 2-D");
  BandImage b = make_band(band_id, static_cast<int>(arr.shape(1)),
                          static_cast<int>(arr.shape(0)), gsd);
  std::memcpy(b.data.data(), arr.data(), sizeof(float) * b.data.size());
  b.validate();
  return b;
}

py::array band_to_array(const BandImage& b) {
  py::array_t<float> out({b.height, b.width});
  std::memcpy(out.mutable_data(), b.data.data(), sizeof(float) * b.data.size());
  return out;
}

// python side uses channel-last (H, W, C); the core is planar
Tensor tensor_from_array(const FloatArray& arr) {
  require(arr.ndim() == 3, ErrorCode::ShapeMismatch, "tensor array must be (H, W, C)");
  const int h = static_cast<int>(arr.shape(0));
  const int w = static_cast<int>(arr.shape(1));
  const int c = static_cast<int>(arr.shape(2));
  Tensor t(h, w, c);
  const float* src = arr.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        t.at(ch, y, x) = src[(static_cast<size_t>(y) * w + x) * c + ch];
  return t;
}

py::array tensor_to_array(const Tensor& t) {
  py::array_t<float> out({t.height, t.width, t.channels});
  float* dst = out.mutable_data();
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      for (int ch = 0; ch < t.channels; ++ch)
        dst[(static_cast<size_t>(y) * t.width + x) * t.channels + ch] = t.at(ch, y, x);
  return out;
}

py::dict report_to_dict(const MetricsReport& r) {
  py::dict out;
  py::dict per_band;
  for (const auto& b : r.bands) {
    py::dict m;
    m["rmse"] = b.rmse;
    m["sre_db"] = b.sre_db;
    m["uiq"] = b.uiq;
    per_band[py::str(b.band_id)] = m;
  }
  out["bands"] = per_band;
  out["rmse_avg"] = r.rmse_avg;
  out["sre_avg"] = r.sre_avg;
  out["sre_sentinels"] = r.sre_sentinel_count;
  out["uiq_avg"] = r.uiq_avg;
  out["sam_deg"] = r.sam_deg;
  out["sam_excluded"] = r.sam_excluded;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multispectral super-resolution core: degradation model, residual "
            "CNN with hand-rolled backprop, tiled inference and quality metrics";

  py::register_exception<Error>(m, "Error");

  py::class_<BandImage>(m, "BandImage")
      .def(py::init(&band_from_array), py::arg("band_id"), py::arg("array"),
           py::arg("gsd"))
      .def_readonly("width", &BandImage::width)
      .def_readonly("height", &BandImage::height)
      .def_readonly("gsd", &BandImage::gsd)
      .def_readonly("band_id", &BandImage::band_id)
      .def("array", &band_to_array)
      .def("__repr__", [](const BandImage& b) {
        return "<BandImage " + b.band_id + " " + std::to_string(b.width) + "x" +
               std::to_string(b.height) + " @" + std::to_string(b.gsd) + "m>";
      });

  py::class_<MultiResScene>(m, "MultiResScene")
      .def(py::init([](std::vector<BandImage> a, std::vector<BandImage> b,
                       std::vector<BandImage> c, int base_gsd) {
             MultiResScene s;
             s.set_a = std::move(a);
             s.set_b = std::move(b);
             s.set_c = std::move(c);
             s.base_gsd = base_gsd;
             s.validate();
             return s;
           }),
           py::arg("set_a"), py::arg("set_b"),
           py::arg("set_c") = std::vector<BandImage>{}, py::arg("base_gsd") = 10)
      .def_readonly("set_a", &MultiResScene::set_a)
      .def_readonly("set_b", &MultiResScene::set_b)
      .def_readonly("set_c", &MultiResScene::set_c)
      .def_readonly("base_gsd", &MultiResScene::base_gsd)
      .def_property_readonly("width", &MultiResScene::width)
      .def_property_readonly("height", &MultiResScene::height);

  m.def("read_band", &read_band, py::arg("path"));
  m.def("write_band", &write_band, py::arg("image"), py::arg("path"));
  m.def("read_scene", &read_scene, py::arg("manifest_path"));
  m.def("write_scene", &write_scene, py::arg("scene"), py::arg("manifest_path"));
  m.def("read_band_list", &read_band_list, py::arg("listing_path"));
  m.def("write_band_list", &write_band_list, py::arg("bands"), py::arg("listing_path"));

  m.def("mtf_to_sigma", &mtf_to_sigma, py::arg("mtf"));
  m.def("gaussian_blur", &gaussian_blur, py::arg("image"), py::arg("sigma"));
  m.def("area_downsample", &area_downsample, py::arg("image"), py::arg("s"));
  m.def("bilinear_upsample",
        static_cast<BandImage (*)(const BandImage&, int)>(&bilinear_upsample),
        py::arg("image"), py::arg("s"));
  m.def("bicubic_upsample", &bicubic_upsample, py::arg("image"), py::arg("s"));
  m.def(
      "simulate_scene",
      [](const MultiResScene& scene, int scale, double sigma) {
        DegradationSpec spec;
        spec.scale = scale;
        spec.sigma = sigma;
        SimulatedScene sim = simulate_scene(scene, spec);
        return py::make_tuple(std::move(sim.input), std::move(sim.targets));
      },
      py::arg("scene"), py::arg("scale"), py::arg("sigma") = 0.0);

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def_static("for_scale", &NetworkConfig::for_scale, py::arg("scale"),
                  py::arg("depth"), py::arg("features"), py::arg("lambda") = 0.1f)
      .def_readonly("depth", &NetworkConfig::depth)
      .def_readonly("features", &NetworkConfig::features)
      .def_readonly("input_channels", &NetworkConfig::input_channels)
      .def_readonly("output_channels", &NetworkConfig::output_channels)
      .def_readonly("scale", &NetworkConfig::scale);

  py::class_<NetworkWeights>(m, "NetworkWeights")
      .def_property_readonly("param_total", &NetworkWeights::param_total);

  m.def("param_count", [](const NetworkConfig& c) {
    const ParamCount pc = param_count(c);
    return py::make_tuple(pc.conv_layers, pc.params);
  });
  m.def("zero_weights", &zero_weights, py::arg("config"));
  m.def("init_he_uniform", &init_he_uniform, py::arg("config"), py::arg("seed"));
  m.def("save_weights", &save_weights, py::arg("config"), py::arg("weights"),
        py::arg("path"));
  m.def("load_weights", &load_weights, py::arg("path"));

  m.def(
      "forward",
      [](const NetworkConfig& config, const NetworkWeights& w, const FloatArray& y_a,
         const FloatArray& y_b, py::object y_c) {
        const Tensor a = tensor_from_array(y_a);
        const Tensor b = tensor_from_array(y_b);
        if (y_c.is_none()) return tensor_to_array(forward(config, w, a, b));
        const Tensor c = tensor_from_array(y_c.cast<FloatArray>());
        return tensor_to_array(forward(config, w, a, b, &c));
      },
      py::arg("config"), py::arg("weights"), py::arg("y_a"), py::arg("y_b"),
      py::arg("y_c") = py::none(),
      "Forward pass on value-scaled (H, W, C) arrays.");

  py::class_<PatchSet>(m, "PatchSet")
      .def_property_readonly("size", [](const PatchSet& p) { return p.size(); })
      .def_readonly("patch_size", &PatchSet::patch_size)
      .def_readonly("scale", &PatchSet::scale);

  m.def("sample_patches", &sample_patches, py::arg("input_scene"), py::arg("targets"),
        py::arg("n"), py::arg("patch_size"), py::arg("seed"));
  m.def("split_train_val", &split_train_val, py::arg("patches"), py::arg("fraction"),
        py::arg("seed"));
  m.def("save_patches", &save_patches, py::arg("patches"), py::arg("path"));
  m.def("load_patches", &load_patches, py::arg("path"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](int batch_size, double lr0, int plateau_patience,
                       double lr_factor, double value_scale, int max_epochs,
                       double min_lr, uint64_t seed, int threads) {
             TrainConfig c;
             c.batch_size = batch_size;
             c.lr0 = lr0;
             c.plateau_patience = plateau_patience;
             c.lr_factor = lr_factor;
             c.value_scale = value_scale;
             c.max_epochs = max_epochs;
             c.min_lr = min_lr > 0 ? min_lr : lr0 / 1024.0;
             c.seed = seed;
             c.threads = threads;
             return c;
           }),
           py::arg("batch_size") = 128, py::arg("lr0") = 1e-4,
           py::arg("plateau_patience") = 5, py::arg("lr_factor") = 0.5,
           py::arg("value_scale") = 2000.0, py::arg("max_epochs") = 100,
           py::arg("min_lr") = 0.0, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "train",
      [](const NetworkConfig& nc, const TrainConfig& tc, const PatchSet& tr,
         const PatchSet& va, py::object initial) {
        const NetworkWeights* init = nullptr;
        NetworkWeights held;
        if (!initial.is_none()) {
          held = initial.cast<NetworkWeights>();
          init = &held;
        }
        TrainResult r = train(nc, tc, tr, va, init);
        py::list history;
        for (const auto& e : r.history.epochs)
          history.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss, e.lr));
        return py::make_tuple(std::move(r.weights), history);
      },
      py::arg("net_config"), py::arg("train_config"), py::arg("train_patches"),
      py::arg("val_patches"), py::arg("initial_weights") = py::none());

  m.def(
      "superresolve",
      [](const MultiResScene& scene, const NetworkConfig& config,
         const NetworkWeights& weights, int tile, int overlap, int threads) {
        TilingSpec t;
        t.tile = tile;
        t.overlap_lowres = overlap;
        return superresolve(scene, config, weights, t, threads);
      },
      py::arg("scene"), py::arg("config"), py::arg("weights"), py::arg("tile") = 512,
      py::arg("overlap") = 2, py::arg("threads") = 1);

  m.def(
      "superresolve_all",
      [](const MultiResScene& scene, const NetworkConfig& c2, const NetworkWeights& w2,
         const NetworkConfig& c6, const NetworkWeights& w6, int tile, int overlap,
         int threads) {
        TilingSpec t;
        t.tile = tile;
        t.overlap_lowres = overlap;
        return superresolve_all(scene, c2, w2, c6, w6, t, threads);
      },
      py::arg("scene"), py::arg("config_2x"), py::arg("weights_2x"),
      py::arg("config_6x"), py::arg("weights_6x"), py::arg("tile") = 512,
      py::arg("overlap") = 2, py::arg("threads") = 1);

  m.def(
      "pad_to_multiple",
      [](const MultiResScene& scene, int multiple) {
        PaddedScene p = pad_to_multiple(scene, multiple);
        return py::make_tuple(std::move(p.scene),
                              py::make_tuple(p.orig_width, p.orig_height));
      },
      py::arg("scene"), py::arg("multiple"),
      "Reflect-pads so the finest dims become multiples; returns (scene, "
      "original_dims).");
  m.def("crop_to", &crop_to, py::arg("band"), py::arg("width"), py::arg("height"));

  m.def("rmse", &rmse, py::arg("pred"), py::arg("truth"));
  m.def("sre", &sre, py::arg("pred"), py::arg("truth"));
  m.def("uiq", &uiq, py::arg("pred"), py::arg("truth"));
  m.def(
      "sam",
      [](const FloatArray& pred, const FloatArray& truth) {
        return sam_degrees(tensor_from_array(pred), tensor_from_array(truth));
      },
      py::arg("pred"), py::arg("truth"),
      "Mean spectral angle in degrees over (H, W, C) stacks.");
  m.def(
      "evaluate",
      [](const std::vector<BandImage>& pred, const std::vector<BandImage>& truth) {
        return report_to_dict(evaluate(pred, truth));
      },
      py::arg("pred"), py::arg("truth"));
}
