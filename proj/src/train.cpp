#include "s2sr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include "bytes.hpp"
#include "s2sr/parallel.hpp"
#include "s2sr/rng.hpp"

namespace s2sr {
namespace {

constexpr char kPatchMagic[4] = {'S', '2', 'P', 'T'};
constexpr uint16_t kPatchVersion = 1;

Tensor stack_crop(const std::vector<BandImage>& bands, int x0, int y0, int size) {
  Tensor t(size, size, static_cast<int>(bands.size()));
  for (size_t c = 0; c < bands.size(); ++c) {
    float* plane = t.plane(static_cast<int>(c));
    for (int y = 0; y < size; ++y)
      std::memcpy(plane + static_cast<size_t>(y) * size, &bands[c].at(y0 + y, x0),
                  sizeof(float) * size);
  }
  return t;
}

template <typename T>
std::vector<std::vector<T>*> param_arrays(NetworkWeightsT<T>& w) {
  std::vector<std::vector<T>*> out;
  for_each_conv(w, [&](ConvParamsT<T>& p) {
    out.push_back(&p.kernel);
    out.push_back(&p.bias);
  });
  return out;
}

template <typename T>
std::vector<const std::vector<T>*> param_arrays(const NetworkWeightsT<T>& w) {
  std::vector<const std::vector<T>*> out;
  for_each_conv(w, [&](const ConvParamsT<T>& p) {
    out.push_back(&p.kernel);
    out.push_back(&p.bias);
  });
  return out;
}

void accumulate_grads(NetworkWeightsT<double>& acc, const NetworkWeights& grads) {
  auto a = param_arrays(acc);
  auto g = param_arrays(grads);
  for (size_t i = 0; i < a.size(); ++i) {
    require(a[i]->size() == g[i]->size(), ErrorCode::ShapeMismatch,
            "gradient accumulator shape mismatch");
    for (size_t j = 0; j < a[i]->size(); ++j) (*a[i])[j] += (*g[i])[j];
  }
}

Tensor scaled(const Tensor& t, double value_scale) {
  Tensor out = t;
  const float inv = static_cast<float>(1.0 / value_scale);
  for (float& v : out.data) v *= inv;
  return out;
}

struct ScaledPatches {
  std::vector<Tensor> a, b, c, t;
};

ScaledPatches scale_patches(const PatchSet& p, double value_scale) {
  ScaledPatches out;
  out.a.reserve(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    out.a.push_back(scaled(p.inputs_a[i], value_scale));
    out.b.push_back(scaled(p.inputs_b[i], value_scale));
    if (!p.inputs_c.empty()) out.c.push_back(scaled(p.inputs_c[i], value_scale));
    out.t.push_back(scaled(p.targets[i], value_scale));
  }
  return out;
}

double mean_loss(const NetworkConfig& config, const NetworkWeights& weights,
                 const ScaledPatches& p, int threads) {
  const int64_t n = static_cast<int64_t>(p.t.size());
  if (n == 0) return 0.0;
  const int workers = static_cast<int>(std::min<int64_t>(std::max(threads, 1), n));
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<double> partial(static_cast<size_t>(workers), 0.0);
  parallel_blocks(n, workers, [&](int64_t begin, int64_t end) {
    const size_t slot = static_cast<size_t>(begin / chunk);
    double acc = 0.0;
    for (int64_t i = begin; i < end; ++i) {
      const Tensor* yc = p.c.empty() ? nullptr : &p.c[i];
      const Tensor pred = forward(config, weights, p.a[i], p.b[i], yc);
      acc += l1_loss(pred, p.t[i]).first;
    }
    partial[slot] += acc;
  });
  double total = 0.0;
  for (const double v : partial) total += v;
  return total / static_cast<double>(n);
}

}  // namespace

void PatchSet::validate() const {
  require(scale == 2 || scale == 6, ErrorCode::InvariantViolation,
          "patch scale must be 2 or 6");
  require(patch_size >= scale && patch_size % (scale == 2 ? 2 : 6) == 0,
          ErrorCode::InvariantViolation,
          "patch_size must be a positive multiple of " + std::to_string(scale));
  const size_t n = targets.size();
  require(inputs_a.size() == n && inputs_b.size() == n &&
              (scale == 2 ? inputs_c.empty() : inputs_c.size() == n),
          ErrorCode::InvariantViolation, "patch arrays must have equal length");
  const int ps = patch_size;
  const int tc = scale == 2 ? 6 : 2;
  for (size_t i = 0; i < n; ++i) {
    require(inputs_a[i].height == ps && inputs_a[i].width == ps &&
                inputs_a[i].channels == 4,
            ErrorCode::ShapeMismatch, "base-group patch shape mismatch");
    require(inputs_b[i].height == ps / 2 && inputs_b[i].width == ps / 2 &&
                inputs_b[i].channels == 6,
            ErrorCode::ShapeMismatch, "2x-group patch shape mismatch");
    if (scale == 6)
      require(inputs_c[i].height == ps / 6 && inputs_c[i].width == ps / 6 &&
                  inputs_c[i].channels == 2,
              ErrorCode::ShapeMismatch, "6x-group patch shape mismatch");
    require(targets[i].height == ps && targets[i].width == ps &&
                targets[i].channels == tc,
            ErrorCode::ShapeMismatch, "target patch shape mismatch");
  }
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCode::InvariantViolation, "batch_size must be >= 1");
  require(lr0 > 0.0, ErrorCode::InvariantViolation, "lr0 must be positive");
  require(plateau_patience >= 1, ErrorCode::InvariantViolation,
          "plateau_patience must be >= 1");
  require(lr_factor > 0.0 && lr_factor < 1.0, ErrorCode::InvariantViolation,
          "lr_factor must lie in (0, 1)");
  require(value_scale > 0.0, ErrorCode::InvariantViolation, "value_scale must be positive");
  require(max_epochs >= 1, ErrorCode::InvariantViolation, "max_epochs must be >= 1");
  require(min_lr > 0.0 && min_lr <= lr0, ErrorCode::InvariantViolation,
          "min_lr must lie in (0, lr0]");
}

OptimizerState OptimizerState::init(const NetworkConfig& config) {
  OptimizerState state;
  state.m = make_weights<double>(config);
  state.v = make_weights<double>(config);
  return state;
}

std::string format_history(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch      train_loss        val_loss              lr\n";
  char line[128];
  for (const auto& e : history.epochs) {
    std::snprintf(line, sizeof(line), "%5d %15.9e %15.9e %15.9e\n", e.epoch,
                  e.train_loss, e.val_loss, e.lr);
    out << line;
  }
  return out.str();
}

void write_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::IoFailure, "cannot open " + path.string());
  out << format_history(history);
  require(out.good(), ErrorCode::IoFailure, "short write to " + path.string());
}

PatchSet sample_patches(const MultiResScene& input_scene,
                        const std::vector<BandImage>& targets, int n,
                        int patch_size, uint64_t seed) {
  input_scene.validate();
  require(n >= 1, ErrorCode::InvariantViolation, "patch count must be >= 1");
  require(targets.size() == 6 || targets.size() == 2, ErrorCode::BandMismatch,
          "targets must be the 6-band or the 2-band group");
  const int scale = targets.size() == 6 ? 2 : 6;
  if (scale == 6)
    require(input_scene.has_c(), ErrorCode::MissingBand,
            "6x patches need the 6x band group");

  const int w = input_scene.width(), h = input_scene.height();
  for (const auto& t : targets) {
    t.validate();
    require(t.width == w && t.height == h, ErrorCode::DimensionMismatch,
            "targets must live on the finest input grid");
  }

  PatchSet out;
  out.scale = scale;
  out.patch_size = patch_size;
  const int align = scale;  // coarsest band grid in finest pixels
  require(patch_size >= align && patch_size % align == 0,
          ErrorCode::InvariantViolation,
          "patch_size must be a positive multiple of " + std::to_string(align));
  require(patch_size <= w && patch_size <= h, ErrorCode::PatchTooLarge,
          "patch_size " + std::to_string(patch_size) + " exceeds scene " +
              std::to_string(w) + "x" + std::to_string(h));

  const uint32_t nx = static_cast<uint32_t>((w - patch_size) / align + 1);
  const uint32_t ny = static_cast<uint32_t>((h - patch_size) / align + 1);
  Rng rng(seed);
  out.inputs_a.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int x = static_cast<int>(rng.below(nx)) * align;
    const int y = static_cast<int>(rng.below(ny)) * align;
    out.inputs_a.push_back(stack_crop(input_scene.set_a, x, y, patch_size));
    out.inputs_b.push_back(stack_crop(input_scene.set_b, x / 2, y / 2, patch_size / 2));
    if (scale == 6)
      out.inputs_c.push_back(stack_crop(input_scene.set_c, x / 6, y / 6, patch_size / 6));
    out.targets.push_back(stack_crop(targets, x, y, patch_size));
  }
  out.validate();
  return out;
}

std::pair<PatchSet, PatchSet> split_train_val(const PatchSet& patches,
                                              double fraction, uint64_t seed) {
  patches.validate();
  const size_t n = patches.size();
  require(n >= 2, ErrorCode::TooFewPatches, "need at least 2 patches to split");
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::DomainError,
          "split fraction must lie in (0, 1)");

  std::vector<uint32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
  Rng rng(seed);
  rng.shuffle(order);

  const size_t n_train = static_cast<size_t>(std::clamp<long long>(
      std::llround(fraction * static_cast<double>(n)), 1, static_cast<long long>(n) - 1));

  auto take = [&](size_t begin, size_t end) {
    PatchSet s;
    s.scale = patches.scale;
    s.patch_size = patches.patch_size;
    for (size_t i = begin; i < end; ++i) {
      const uint32_t j = order[i];
      s.inputs_a.push_back(patches.inputs_a[j]);
      s.inputs_b.push_back(patches.inputs_b[j]);
      if (!patches.inputs_c.empty()) s.inputs_c.push_back(patches.inputs_c[j]);
      s.targets.push_back(patches.targets[j]);
    }
    return s;
  };
  return {take(0, n_train), take(n_train, n)};
}

template <typename T>
std::pair<double, TensorT<T>> l1_loss(const TensorT<T>& pred,
                                      const TensorT<T>& target) {
  require(pred.same_shape(target), ErrorCode::ShapeMismatch,
          "loss inputs must share shape");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  TensorT<T> grad(pred.height, pred.width, pred.channels);
  double acc = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - target.data[i];
    acc += std::abs(d);
    grad.data[i] = d > 0 ? static_cast<T>(inv_n) : (d < 0 ? static_cast<T>(-inv_n) : T(0));
  }
  return {acc * inv_n, std::move(grad)};
}

template std::pair<double, TensorT<float>> l1_loss<float>(const TensorT<float>&, const TensorT<float>&);
template std::pair<double, TensorT<double>> l1_loss<double>(const TensorT<double>&, const TensorT<double>&);

void nadam_step(NetworkWeightsT<double>& weights, const NetworkWeightsT<double>& grads,
                OptimizerState& state, double lr) {
  require(lr > 0.0, ErrorCode::DomainError, "learning rate must be positive");
  auto w = param_arrays(weights);
  auto g = param_arrays(grads);
  auto m = param_arrays(state.m);
  auto v = param_arrays(state.v);
  require(w.size() == g.size() && w.size() == m.size() && w.size() == v.size(),
          ErrorCode::ShapeMismatch, "optimizer state layout mismatch");

  const int64_t t = state.t + 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double mu_t = b1 * (1.0 - 0.5 * std::pow(0.96, t * state.momentum_decay));
  const double mu_next = b1 * (1.0 - 0.5 * std::pow(0.96, (t + 1) * state.momentum_decay));
  const double sched_t = state.mu_product * mu_t;
  const double sched_next = sched_t * mu_next;
  const double v_corr = 1.0 - std::pow(b2, static_cast<double>(t));

  for (size_t a = 0; a < w.size(); ++a) {
    require(w[a]->size() == g[a]->size() && w[a]->size() == m[a]->size() &&
                w[a]->size() == v[a]->size(),
            ErrorCode::ShapeMismatch, "optimizer tensor shape mismatch");
    double* wp = w[a]->data();
    const double* gp = g[a]->data();
    double* mp = m[a]->data();
    double* vp = v[a]->data();
    const size_t len = w[a]->size();
    for (size_t i = 0; i < len; ++i) {
      const double grad = gp[i];
      mp[i] = b1 * mp[i] + (1.0 - b1) * grad;
      vp[i] = b2 * vp[i] + (1.0 - b2) * grad * grad;
      const double g_hat = grad / (1.0 - sched_t);
      const double m_hat = mp[i] / (1.0 - sched_next);
      const double v_hat = vp[i] / v_corr;
      const double m_bar = (1.0 - mu_t) * g_hat + mu_next * m_hat;
      wp[i] -= lr * m_bar / (std::sqrt(v_hat) + state.eps);
    }
  }
  state.t = t;
  state.mu_product = sched_t;
}

double lr_on_plateau(const TrainHistory& history, int patience, double factor,
                     double current_lr, double min_lr) {
  const auto& rows = history.epochs;
  const size_t n = rows.size();
  if (n < static_cast<size_t>(patience) + 1) return current_lr;

  // cooldown: a reduction inside the window blocks another one
  for (size_t i = n - static_cast<size_t>(patience); i < n; ++i)
    if (rows[i].lr != current_lr) return current_lr;

  double best_before = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + static_cast<size_t>(patience) < n; ++i)
    best_before = std::min(best_before, rows[i].val_loss);
  double recent_best = std::numeric_limits<double>::infinity();
  for (size_t i = n - static_cast<size_t>(patience); i < n; ++i)
    recent_best = std::min(recent_best, rows[i].val_loss);

  if (recent_best < best_before) return current_lr;
  return std::max(current_lr * factor, min_lr);
}

TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config,
                  const PatchSet& train_patches, const PatchSet& val_patches,
                  const NetworkWeights* initial_weights) {
  net_config.validate();
  train_config.validate();
  train_patches.validate();
  val_patches.validate();
  require(train_patches.scale == net_config.scale &&
              val_patches.scale == net_config.scale,
          ErrorCode::ShapeMismatch, "patch scale differs from the network's");
  require(train_patches.size() >= 1 && val_patches.size() >= 1,
          ErrorCode::TooFewPatches, "need at least one train and one val patch");

  const int threads = train_config.threads >= 1 ? train_config.threads : default_threads();
  const ScaledPatches tr = scale_patches(train_patches, train_config.value_scale);
  const ScaledPatches va = scale_patches(val_patches, train_config.value_scale);

  NetworkWeights fweights =
      initial_weights ? *initial_weights
                      : init_he_uniform(net_config, train_config.seed);
  validate_weights(net_config, fweights);
  NetworkWeightsT<double> master = widen(fweights);
  OptimizerState state = OptimizerState::init(net_config);

  TrainResult result;
  double lr = train_config.lr0;

  auto record = [&](int epoch, double train_loss, double val_loss) {
    require(std::isfinite(train_loss) && std::isfinite(val_loss),
            ErrorCode::NonFiniteLoss,
            "non-finite loss at epoch " + std::to_string(epoch));
    result.history.epochs.push_back({epoch, train_loss, val_loss, lr});
  };

  // initial evaluation before any update
  record(0, mean_loss(net_config, fweights, tr, threads),
         mean_loss(net_config, fweights, va, threads));
  double best_val = result.history.epochs.back().val_loss;
  result.weights = fweights;

  const int64_t n_train = static_cast<int64_t>(tr.t.size());
  std::vector<uint32_t> order(static_cast<size_t>(n_train));
  for (int64_t i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = static_cast<uint32_t>(i);
  Rng shuffle_rng(train_config.seed ^ 0x5eedf00dULL);

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    for (int64_t batch_begin = 0; batch_begin < n_train;
         batch_begin += train_config.batch_size) {
      const int64_t batch_end =
          std::min<int64_t>(batch_begin + train_config.batch_size, n_train);
      const int64_t batch_n = batch_end - batch_begin;

      const int workers = static_cast<int>(std::min<int64_t>(threads, batch_n));
      std::vector<NetworkWeightsT<double>> grads(
          static_cast<size_t>(workers), make_weights<double>(net_config));
      std::vector<double> losses(static_cast<size_t>(workers), 0.0);

      const int64_t chunk = (batch_n + workers - 1) / workers;
      parallel_blocks(batch_n, workers, [&](int64_t begin, int64_t end) {
        const size_t slot = static_cast<size_t>(begin / chunk);
        for (int64_t s = begin; s < end; ++s) {
          const uint32_t idx = order[static_cast<size_t>(batch_begin + s)];
          const Tensor* yc = tr.c.empty() ? nullptr : &tr.c[idx];
          ForwardCache cache;
          const Tensor pred =
              forward(net_config, fweights, tr.a[idx], tr.b[idx], yc, &cache);
          auto [loss, grad] = l1_loss(pred, tr.t[idx]);
          losses[slot] += loss;
          const GradientsT<float> g = backward(net_config, fweights, cache, grad);
          accumulate_grads(grads[slot], g.weights);
        }
      });

      NetworkWeightsT<double> batch_grad = std::move(grads[0]);
      for (int t = 1; t < workers; ++t) {
        auto acc = param_arrays(batch_grad);
        auto add = param_arrays(grads[static_cast<size_t>(t)]);
        for (size_t a = 0; a < acc.size(); ++a)
          for (size_t i = 0; i < acc[a]->size(); ++i)
            (*acc[a])[i] += (*add[a])[i];
      }
      for (double l : losses) epoch_loss_sum += l;

      const double inv_batch = 1.0 / static_cast<double>(batch_n);
      for (auto* arr : param_arrays(batch_grad))
        for (double& v : *arr) v *= inv_batch;

      nadam_step(master, batch_grad, state, lr);
      fweights = narrow(master);
    }

    const double train_loss = epoch_loss_sum / static_cast<double>(n_train);
    const double val_loss = mean_loss(net_config, fweights, va, threads);
    record(epoch, train_loss, val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      result.weights = fweights;
    }

    const double raw = lr_on_plateau(result.history, train_config.plateau_patience,
                                     train_config.lr_factor, lr, 0.0);
    if (raw < lr) {
      if (lr <= train_config.min_lr) break;  // schedule exhausted
      lr = std::max(raw, train_config.min_lr);
    }
  }
  return result;
}

void save_patches(const PatchSet& patches, const std::filesystem::path& path) {
  patches.validate();
  bytes::Writer w(path);
  w.raw(kPatchMagic, 4);
  w.u16(kPatchVersion);
  w.u32(static_cast<uint32_t>(patches.size()));
  w.u16(static_cast<uint16_t>(patches.scale));
  w.u16(static_cast<uint16_t>(patches.patch_size));
  w.u16(patches.inputs_c.empty() ? 0 : 1);
  for (size_t i = 0; i < patches.size(); ++i) {
    w.f32_array(patches.inputs_a[i].data.data(), patches.inputs_a[i].data.size());
    w.f32_array(patches.inputs_b[i].data.data(), patches.inputs_b[i].data.size());
    if (!patches.inputs_c.empty())
      w.f32_array(patches.inputs_c[i].data.data(), patches.inputs_c[i].data.size());
    w.f32_array(patches.targets[i].data.data(), patches.targets[i].data.size());
  }
  w.finish();
}

PatchSet load_patches(const std::filesystem::path& path) {
  bytes::Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kPatchMagic, 4) == 0, ErrorCode::CorruptHeader,
          path.string() + ": bad patch-file magic");
  const uint16_t version = r.u16();
  require(version == kPatchVersion, ErrorCode::VersionUnsupported,
          path.string() + ": patch-file version " + std::to_string(version));

  PatchSet p;
  const uint32_t n = r.u32();
  p.scale = r.u16();
  p.patch_size = r.u16();
  const bool has_c = r.u16() != 0;
  require(p.scale == 2 || p.scale == 6, ErrorCode::CorruptHeader,
          path.string() + ": bad scale field");
  require(has_c == (p.scale == 6), ErrorCode::CorruptHeader,
          path.string() + ": 6x flag disagrees with scale");

  const int ps = p.patch_size;
  const int tc = p.scale == 2 ? 6 : 2;
  for (uint32_t i = 0; i < n; ++i) {
    Tensor a(ps, ps, 4);
    r.f32_array(a.data.data(), a.data.size());
    Tensor b(ps / 2, ps / 2, 6);
    r.f32_array(b.data.data(), b.data.size());
    if (has_c) {
      Tensor c(ps / 6, ps / 6, 2);
      r.f32_array(c.data.data(), c.data.size());
      p.inputs_c.push_back(std::move(c));
    }
    Tensor t(ps, ps, tc);
    r.f32_array(t.data.data(), t.data.size());
    p.inputs_a.push_back(std::move(a));
    p.inputs_b.push_back(std::move(b));
    p.targets.push_back(std::move(t));
  }
  p.validate();
  return p;
}

}  // namespace s2sr
