#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "s2sr/checkpoint.hpp"
#include "s2sr/infer.hpp"
#include "s2sr/metrics.hpp"
#include "s2sr/parallel.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/resample.hpp"
#include "s2sr/train.hpp"

namespace fs = std::filesystem;
using namespace s2sr;

namespace {

constexpr int kExitData = 3;
constexpr int kExitInternal = 4;
constexpr int kExitNonFiniteLoss = 5;

uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (in.eof()) break;
  }
  return h;
}

struct SimulateArgs {
  std::string scene, out;
  int scale = 2;
  double sigma = 0.0;
};

int cmd_simulate(const SimulateArgs& a) {
  const MultiResScene scene = read_scene(a.scene);
  DegradationSpec spec;
  spec.scale = a.scale;
  spec.sigma = a.sigma;
  const SimulatedScene sim = simulate_scene(scene, spec);

  const fs::path out(a.out);
  write_scene(sim.input, out / "input" / "manifest.txt");
  write_band_list(sim.targets, out / "targets" / "targets.txt");

  std::ofstream prov(out / "provenance.txt", std::ios::trunc);
  require(prov.good(), ErrorCode::IoFailure, "cannot write provenance sidecar");
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64_file(a.scene)));
  prov << "version: 1\n"
       << "scale: " << a.scale << "\n"
       << "sigma: " << spec.sigma_for(scene.set_a.front().band_id) << "\n"
       << "source: " << a.scene << "\n"
       << "source_hash: " << hash << "\n";

  std::cout << "simulated " << a.scale << "x degradation -> " << a.out << " ("
            << sim.input.width() << "x" << sim.input.height() << " finest, "
            << sim.targets.size() << " target bands)\n";
  return 0;
}

struct MakePatchesArgs {
  std::string scene, targets, out;
  int n = 1000;
  int patch_size = 32;
  uint64_t seed = 0;
};

int cmd_make_patches(const MakePatchesArgs& a) {
  const MultiResScene scene = read_scene(a.scene);
  const std::vector<BandImage> targets = read_band_list(a.targets);
  const PatchSet patches = sample_patches(scene, targets, a.n, a.patch_size, a.seed);
  save_patches(patches, a.out);
  std::cout << "sampled " << patches.size() << " patches of " << a.patch_size
            << "px -> " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string patches, out_ckpt, out_history;
  int d = 6, f = 128, scale = 2, epochs = 100, batch = 128;
  double lr = 1e-4, val_fraction = 0.1;
  uint64_t seed = 0;
  int threads = 0;
};

int cmd_train(const TrainArgs& a) {
  const PatchSet all = load_patches(a.patches);
  require(all.scale == a.scale, ErrorCode::ShapeMismatch,
          "patch file was sampled for scale " + std::to_string(all.scale));
  const auto [train_set, val_set] = split_train_val(all, 1.0 - a.val_fraction, a.seed);

  const NetworkConfig config = NetworkConfig::for_scale(a.scale, a.d, a.f);
  TrainConfig tc;
  tc.batch_size = a.batch;
  tc.lr0 = a.lr;
  tc.min_lr = a.lr / 1024.0;
  tc.max_epochs = a.epochs;
  tc.seed = a.seed;
  tc.threads = a.threads >= 1 ? a.threads : default_threads();

  const TrainResult result = train(config, tc, train_set, val_set);
  save_weights(config, result.weights, a.out_ckpt);
  const fs::path hist =
      a.out_history.empty() ? fs::path(a.out_ckpt + ".history.txt") : fs::path(a.out_history);
  write_history(result.history, hist);

  const auto& rows = result.history.epochs;
  std::cout << "trained d=" << a.d << " f=" << a.f << " scale=" << a.scale << " for "
            << rows.back().epoch << " epochs; val " << rows.front().val_loss << " -> "
            << rows.back().val_loss << "\n"
            << "checkpoint: " << a.out_ckpt << "\nhistory: " << hist.string() << "\n";
  return 0;
}

struct SuperresArgs {
  std::string scene, ckpt2x, ckpt6x, out;
  int tile = 512, overlap = 2, threads = 0;
};

int cmd_superres(const SuperresArgs& a) {
  const MultiResScene scene = read_scene(a.scene);
  const auto [cfg2, w2] = load_weights(a.ckpt2x);
  require(cfg2.scale == 2, ErrorCode::WeightsConfigMismatch,
          "--ckpt2x does not hold a 2x checkpoint");

  TilingSpec tiling;
  tiling.tile = a.tile;
  tiling.overlap_lowres = a.overlap;
  const int threads = a.threads >= 1 ? a.threads : default_threads();

  std::vector<TileTiming> timing;
  std::vector<BandImage> bands;
  const auto t0 = std::chrono::steady_clock::now();
  if (!a.ckpt6x.empty()) {
    const auto [cfg6, w6] = load_weights(a.ckpt6x);
    require(cfg6.scale == 6, ErrorCode::WeightsConfigMismatch,
            "--ckpt6x does not hold a 6x checkpoint");
    bands = superresolve_all(scene, cfg2, w2, cfg6, w6, tiling, threads, &timing);
  } else {
    bands = superresolve(scene, cfg2, w2, tiling, threads, &timing);
  }
  const std::chrono::duration<double> total = std::chrono::steady_clock::now() - t0;

  for (const auto& t : timing)
    std::fprintf(stderr, "tile %5d,%5d %dx%d: %.3f s\n", t.x0, t.y0, t.width,
                 t.height, t.seconds);
  const double mpix = static_cast<double>(scene.width()) * scene.height() / 1e6;
  std::fprintf(stderr, "superres total: %zu tiles, %.2f s (%.1f min) for %.1f Mpix\n",
               timing.size(), total.count(), total.count() / 60.0, mpix);

  write_band_list(bands, fs::path(a.out) / "bands.txt");
  std::cout << "wrote " << bands.size() << " bands at " << scene.base_gsd
            << " m -> " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string pred, truth, out_report;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const std::vector<BandImage> pred = read_band_list(a.pred);
  const std::vector<BandImage> truth = read_band_list(a.truth);
  const MetricsReport report = evaluate(pred, truth);
  std::cout << format_table(report);
  if (!a.out_report.empty()) {
    std::ofstream out(a.out_report, std::ios::trunc);
    require(out.good(), ErrorCode::IoFailure, "cannot open " + a.out_report);
    out << format_kv(report);
  }
  return 0;
}

struct InfoArgs {
  std::string scene, ckpt, patches;
};

int cmd_info(const InfoArgs& a) {
  if (!a.scene.empty()) {
    const MultiResScene s = read_scene(a.scene);
    std::cout << "scene: " << s.width() << "x" << s.height() << " @ " << s.base_gsd
              << " m";
    std::cout << (s.has_c() ? ", 4+6+2 bands\n" : ", 4+6 bands\n");
    auto show = [](const std::vector<BandImage>& set) {
      for (const auto& b : set)
        std::cout << "  " << b.band_id << ": " << b.width << "x" << b.height
                  << " @ " << b.gsd << " m\n";
    };
    show(s.set_a);
    show(s.set_b);
    show(s.set_c);
  }
  if (!a.ckpt.empty()) {
    const auto [config, weights] = load_weights(a.ckpt);
    const ParamCount pc = param_count(config);
    std::cout << "checkpoint: scale " << config.scale << "x, d=" << config.depth
              << ", f=" << config.features << ", lambda=" << config.lambda << "\n"
              << "  " << pc.conv_layers << " conv layers, " << pc.params
              << " parameters\n";
  }
  if (!a.patches.empty()) {
    const PatchSet p = load_patches(a.patches);
    std::cout << "patches: " << p.size() << " of " << p.patch_size << "px for the "
              << p.scale << "x task\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multispectral super-resolution toolkit: simulate training data, "
               "train the residual CNN, run tiled inference and score results"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: S2SR_THREADS or hardware)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "degrade a scene into a training pair");
  c_sim->add_option("--scene", sim.scene, "scene manifest")->required();
  c_sim->add_option("--scale", sim.scale, "degradation factor")
      ->check(CLI::IsMember({2, 6}))
      ->required();
  c_sim->add_option("--sigma", sim.sigma, "blur sigma in input pixels (default 1/scale)");
  c_sim->add_option("--out", sim.out, "output directory")->required();

  MakePatchesArgs mp;
  auto* c_mp = app.add_subcommand("make-patches", "sample training patches");
  c_mp->add_option("--scene", mp.scene, "degraded scene manifest")->required();
  c_mp->add_option("--targets", mp.targets, "target band listing")->required();
  c_mp->add_option("--n", mp.n, "patch count")->required();
  c_mp->add_option("--patch-size", mp.patch_size, "patch edge in target pixels")
      ->required();
  c_mp->add_option("--seed", mp.seed, "sampling seed");
  c_mp->add_option("--out", mp.out, "output patch file")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a network from a patch file");
  c_tr->add_option("--patches", tr.patches, "patch file")->required();
  c_tr->add_option("--d", tr.d, "residual block count")->required();
  c_tr->add_option("--f", tr.f, "feature width")->required();
  c_tr->add_option("--scale", tr.scale, "task scale")
      ->check(CLI::IsMember({2, 6}))
      ->required();
  c_tr->add_option("--epochs", tr.epochs, "maximum epochs")->required();
  c_tr->add_option("--seed", tr.seed, "training seed");
  c_tr->add_option("--lr", tr.lr, "initial learning rate (default 1e-4)");
  c_tr->add_option("--batch", tr.batch, "mini-batch size (default 128)");
  c_tr->add_option("--val-fraction", tr.val_fraction, "validation share (default 0.1)");
  c_tr->add_option("--out-ckpt", tr.out_ckpt, "checkpoint path")->required();
  c_tr->add_option("--out-history", tr.out_history,
                   "history table path (default <ckpt>.history.txt)");

  SuperresArgs sr;
  auto* c_sr = app.add_subcommand("superres", "super-resolve a full scene");
  c_sr->add_option("--scene", sr.scene, "scene manifest")->required();
  c_sr->add_option("--ckpt2x", sr.ckpt2x, "2x checkpoint")->required();
  c_sr->add_option("--ckpt6x", sr.ckpt6x, "6x checkpoint (optional)");
  c_sr->add_option("--tile", sr.tile, "tile edge in output pixels (default 512)");
  c_sr->add_option("--overlap", sr.overlap,
                   "per-side overlap in low-resolution pixels (default 2)");
  c_sr->add_option("--out", sr.out, "output directory")->required();

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "score a prediction against truth");
  c_ev->add_option("--pred", ev.pred, "predicted band listing")->required();
  c_ev->add_option("--truth", ev.truth, "ground-truth band listing")->required();
  c_ev->add_option("--out-report", ev.out_report, "machine-readable report path");

  InfoArgs in;
  auto* c_in = app.add_subcommand("info", "describe scenes, checkpoints or patch files");
  c_in->add_option("--scene", in.scene, "scene manifest");
  c_in->add_option("--ckpt", in.ckpt, "checkpoint path");
  c_in->add_option("--patches", in.patches, "patch file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_mp) return cmd_make_patches(mp);
    if (*c_tr) {
      tr.threads = threads;
      return cmd_train(tr);
    }
    if (*c_sr) {
      sr.threads = threads;
      return cmd_superres(sr);
    }
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_in) return cmd_info(in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NonFiniteLoss ? kExitNonFiniteLoss : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
