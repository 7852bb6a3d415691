#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "s2sr/network.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/tensor.hpp"

namespace s2sr {

// Co-located training patches in raw reflectance units. patch_size is in
// output-resolution pixels; the a/b/c crops follow the 1 : 1/2 : 1/6 ratio.
struct PatchSet {
  std::vector<Tensor> inputs_a;
  std::vector<Tensor> inputs_b;
  std::vector<Tensor> inputs_c;  // empty for the 2x task
  std::vector<Tensor> targets;
  int patch_size = 0;
  int scale = 2;

  size_t size() const { return targets.size(); }
  void validate() const;
};

struct TrainConfig {
  int batch_size = 128;
  double lr0 = 1e-4;
  int plateau_patience = 5;
  double lr_factor = 0.5;
  double value_scale = 2000.0;
  int max_epochs = 100;
  double min_lr = 1e-4 / 1024;
  uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

// Adam-with-Nesterov-momentum state. Moments mirror the weight shapes and
// are kept in double; mu_product accumulates the momentum schedule
// prod_{i<=t} beta1 * (1 - 0.5 * 0.96^(i * psi)).
struct OptimizerState {
  NetworkWeightsT<double> m;
  NetworkWeightsT<double> v;
  int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum_decay = 0.004;  // psi
  double mu_product = 1.0;

  static OptimizerState init(const NetworkConfig& config);
};

struct EpochStats {
  int epoch = 0;  // 0 = initial evaluation before any update
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

std::string format_history(const TrainHistory& history);
void write_history(const TrainHistory& history, const std::filesystem::path& path);

// n random co-located patch tuples; top-left corners are aligned to the
// coarsest band's grid so every crop lands on whole pixels. Draws are with
// replacement and deterministic under the seed.
PatchSet sample_patches(const MultiResScene& input_scene,
                        const std::vector<BandImage>& targets, int n,
                        int patch_size, uint64_t seed);

// Seeded-shuffle split into disjoint, exhaustive train/validation subsets;
// |train| = round(fraction * n).
std::pair<PatchSet, PatchSet> split_train_val(const PatchSet& patches,
                                              double fraction, uint64_t seed);

// Mean absolute error and its gradient; sign(0) = 0.
template <typename T>
std::pair<double, TensorT<T>> l1_loss(const TensorT<T>& pred,
                                      const TensorT<T>& target);

void nadam_step(NetworkWeightsT<double>& weights,
                const NetworkWeightsT<double>& grads, OptimizerState& state,
                double lr);

// Halves the rate when the best validation loss seen before the last
// `patience` epochs was never beaten inside them and the rate itself was
// flat over that window (the lr column provides the post-reduction
// cooldown). Never returns less than min_lr.
double lr_on_plateau(const TrainHistory& history, int patience, double factor,
                     double current_lr, double min_lr);

struct TrainResult {
  NetworkWeights weights;  // checkpoint with the lowest validation loss
  TrainHistory history;
};

// Full loop: scales patches by 1/value_scale, iterates shuffled batches,
// records per-epoch losses, applies the plateau schedule, stops at
// max_epochs or when a reduction is requested at the min_lr floor.
// Single-threaded runs are bit-reproducible under the seed.
TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config,
                  const PatchSet& train_patches, const PatchSet& val_patches,
                  const NetworkWeights* initial_weights = nullptr);

// Patch container: magic "S2PT", version, counts and shapes, then per-patch
// a/b(/c)/target tensors as little-endian float32.
void save_patches(const PatchSet& patches, const std::filesystem::path& path);
PatchSet load_patches(const std::filesystem::path& path);

}  // namespace s2sr
