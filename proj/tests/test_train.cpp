#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "s2sr/resample.hpp"
#include "s2sr/rng.hpp"
#include "s2sr/train.hpp"
#include "synthetic.hpp"

using namespace s2sr;

namespace {

// degraded scene + targets for the 2x task
std::pair<MultiResScene, std::vector<BandImage>> training_pair(int finest,
                                                               uint64_t seed) {
  const MultiResScene scene = synthetic::make_scene(finest, seed, false);
  DegradationSpec spec;
  spec.scale = 2;
  SimulatedScene sim = simulate_scene(scene, spec);
  return {std::move(sim.input), std::move(sim.targets)};
}

double patch_signature(const PatchSet& p, size_t i) {
  double acc = 0.0;
  for (int k = 0; k < 8; ++k) acc += p.inputs_a[i].data[static_cast<size_t>(k * 37)];
  return acc;
}

}  // namespace

TEST_CASE("sample_patches is deterministic and shaped correctly") {
  const auto [scene, targets] = training_pair(96, 3);
  const PatchSet a = sample_patches(scene, targets, 20, 32, 7);
  const PatchSet b = sample_patches(scene, targets, 20, 32, 7);
  REQUIRE(a.size() == 20);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.inputs_a[i].data == b.inputs_a[i].data);
    CHECK(a.targets[i].data == b.targets[i].data);
  }
  CHECK(a.inputs_a[0].height == 32);
  CHECK(a.inputs_a[0].channels == 4);
  CHECK(a.inputs_b[0].height == 16);
  CHECK(a.inputs_b[0].channels == 6);
  CHECK(a.targets[0].channels == 6);

  const PatchSet c = sample_patches(scene, targets, 20, 32, 8);
  bool any_differ = false;
  for (size_t i = 0; i < c.size(); ++i)
    if (c.inputs_a[i].data != a.inputs_a[i].data) any_differ = true;
  CHECK(any_differ);
}

TEST_CASE("6x patches follow the 1:1/2:1/6 ratio") {
  const MultiResScene scene = synthetic::make_scene(288, 4, true);
  DegradationSpec spec;
  spec.scale = 6;
  const SimulatedScene sim = simulate_scene(scene, spec);
  // degraded finest is 48; use patch_size 24 to stay inside
  const PatchSet p = sample_patches(sim.input, sim.targets, 5, 24, 1);
  CHECK(p.inputs_a[0].height == 24);
  CHECK(p.inputs_b[0].height == 12);
  CHECK(p.inputs_c[0].height == 4);
  CHECK(p.inputs_c[0].channels == 2);
  CHECK(p.targets[0].channels == 2);
}

TEST_CASE("oversized patches are rejected") {
  const auto [scene, targets] = training_pair(48, 5);
  try {
    sample_patches(scene, targets, 1, 64, 0);
    FAIL("expected PatchTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PatchTooLarge);
  }
}

TEST_CASE("split is disjoint, exhaustive and sized by rounding") {
  const auto [scene, targets] = training_pair(96, 6);
  const PatchSet p = sample_patches(scene, targets, 10, 16, 2);
  const auto [train_set, val_set] = split_train_val(p, 0.9, 11);
  CHECK(train_set.size() == 9);
  CHECK(val_set.size() == 1);

  std::multiset<double> before, after;
  for (size_t i = 0; i < p.size(); ++i) before.insert(patch_signature(p, i));
  for (size_t i = 0; i < train_set.size(); ++i) after.insert(patch_signature(train_set, i));
  for (size_t i = 0; i < val_set.size(); ++i) after.insert(patch_signature(val_set, i));
  CHECK(before == after);

  PatchSet one;
  one.scale = 2;
  one.patch_size = 16;
  one.inputs_a.push_back(Tensor(16, 16, 4));
  one.inputs_b.push_back(Tensor(8, 8, 6));
  one.targets.push_back(Tensor(16, 16, 6));
  CHECK_THROWS_AS(split_train_val(one, 0.9, 0), Error);
}

TEST_CASE("l1 loss and its gradient") {
  Tensor pred(2, 2, 1);
  pred.data = {1.0f, 2.0f, 3.0f, 4.0f};
  Tensor target = pred;
  auto [zero_loss, zero_grad] = l1_loss(pred, target);
  CHECK(zero_loss == 0.0);
  for (const float g : zero_grad.data) CHECK(g == 0.0f);

  for (float& v : target.data) v -= 0.5f;
  auto [loss, grad] = l1_loss(pred, target);
  CHECK(loss == doctest::Approx(0.5).epsilon(1e-12));
  for (const float g : grad.data) CHECK(g == 0.25f);  // sign(+)/4

  // random pair against an elementwise oracle
  Rng rng(9);
  Tensor a(3, 5, 2), b(3, 5, 2);
  for (auto& v : a.data) v = rng.uniform(-2.0f, 2.0f);
  for (auto& v : b.data) v = rng.uniform(-2.0f, 2.0f);
  auto [l, g] = l1_loss(a, b);
  double ref = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    ref += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  ref /= static_cast<double>(a.data.size());
  CHECK(std::abs(l - ref) < 1e-9);
}

TEST_CASE("nadam step matches a hand-rolled recurrence on one parameter") {
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 1);
  NetworkWeightsT<double> w = make_weights<double>(config);
  NetworkWeightsT<double> g = make_weights<double>(config);
  OptimizerState state = OptimizerState::init(config);

  const double w0 = 0.5, grad = 0.3, lr = 0.01;
  w.first.kernel[0] = w0;
  g.first.kernel[0] = grad;

  nadam_step(w, g, state, lr);
  nadam_step(w, g, state, lr);

  // hand evaluation of the same recurrence
  double m = 0.0, v = 0.0, x = w0, sched = 1.0;
  for (int t = 1; t <= 2; ++t) {
    const double mu_t = 0.9 * (1.0 - 0.5 * std::pow(0.96, t * 0.004));
    const double mu_n = 0.9 * (1.0 - 0.5 * std::pow(0.96, (t + 1) * 0.004));
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double sched_t = sched * mu_t;
    const double g_hat = grad / (1.0 - sched_t);
    const double m_hat = m / (1.0 - sched_t * mu_n);
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    x -= lr * ((1.0 - mu_t) * g_hat + mu_n * m_hat) / (std::sqrt(v_hat) + 1e-8);
    sched = sched_t;
  }
  CHECK(std::abs(w.first.kernel[0] - x) < 1e-12);
  CHECK(state.t == 2);

  // untouched parameters stay put
  CHECK(w.first.kernel[1] == 0.0);
  CHECK(w.last.bias[0] == 0.0);
}

TEST_CASE("nadam with zero gradients leaves weights unchanged") {
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  NetworkWeightsT<double> w = widen(init_he_uniform(config, 4));
  const NetworkWeightsT<double> before = w;
  NetworkWeightsT<double> g = make_weights<double>(config);
  OptimizerState state = OptimizerState::init(config);
  nadam_step(w, g, state, 0.1);
  CHECK(w.first.kernel == before.first.kernel);
  CHECK(w.last.bias == before.last.bias);
}

TEST_CASE("nadam update magnitude is linear in the learning rate") {
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 1);
  NetworkWeightsT<double> g = make_weights<double>(config);
  g.first.kernel[0] = 0.42;

  auto delta_for = [&](double lr) {
    NetworkWeightsT<double> w = make_weights<double>(config);
    OptimizerState state = OptimizerState::init(config);
    nadam_step(w, g, state, lr);
    return -w.first.kernel[0];
  };
  const double d1 = delta_for(1e-4);
  const double d2 = delta_for(2e-4);
  CHECK(std::abs(d2 / d1 - 2.0) < 1e-12);
  CHECK(delta_for(1e-12) < 1e-11);  // vanishes with the rate
}

TEST_CASE("split arithmetic at the full patch-budget scale") {
  // 360,000 minimal patches split 90/10
  PatchSet big;
  big.scale = 2;
  big.patch_size = 2;
  const Tensor a(2, 2, 4), b(1, 1, 6), t(2, 2, 6);
  const size_t n = 360000;
  big.inputs_a.assign(n, a);
  big.inputs_b.assign(n, b);
  big.targets.assign(n, t);
  const auto [tr, va] = split_train_val(big, 0.9, 17);
  CHECK(tr.size() == 324000);
  CHECK(va.size() == 36000);
}

TEST_CASE("nadam walks monotonically against a constant gradient") {
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 1);
  NetworkWeightsT<double> w = make_weights<double>(config);
  NetworkWeightsT<double> g = make_weights<double>(config);
  OptimizerState state = OptimizerState::init(config);
  g.first.kernel[0] = 0.7;
  double prev = w.first.kernel[0];
  for (int i = 0; i < 5; ++i) {
    nadam_step(w, g, state, 0.01);
    CHECK(w.first.kernel[0] < prev);
    prev = w.first.kernel[0];
  }
}

TEST_CASE("plateau schedule follows the quoted rule") {
  auto hist = [](std::initializer_list<double> vals, double lr) {
    TrainHistory h;
    int e = 0;
    for (const double v : vals) h.epochs.push_back({e++, v, v, lr});
    return h;
  };

  // strictly decreasing: unchanged
  CHECK(lr_on_plateau(hist({5, 4, 3, 2, 1, 0.5}, 1e-4), 5, 0.5, 1e-4, 1e-9) == 1e-4);
  // flat for 5 epochs: halved
  CHECK(lr_on_plateau(hist({3, 3, 3, 3, 3, 3}, 1e-4), 5, 0.5, 1e-4, 1e-9) == 5e-5);
  // flat for 4 epochs then improvement: unchanged
  CHECK(lr_on_plateau(hist({3, 3, 3, 3, 3, 2.9}, 1e-4), 5, 0.5, 1e-4, 1e-9) == 1e-4);
  // not enough history yet: unchanged
  CHECK(lr_on_plateau(hist({3, 3, 3}, 1e-4), 5, 0.5, 1e-4, 1e-9) == 1e-4);
  // never below min_lr
  CHECK(lr_on_plateau(hist({3, 3, 3, 3, 3, 3}, 1e-4), 5, 0.5, 1e-4, 8e-5) == 8e-5);

  // a reduction inside the window blocks an immediate second one
  TrainHistory h;
  for (int e = 0; e < 4; ++e) h.epochs.push_back({e, 3, 3, 1e-4});
  for (int e = 4; e < 8; ++e) h.epochs.push_back({e, 3, 3, 5e-5});
  CHECK(lr_on_plateau(h, 5, 0.5, 5e-5, 1e-9) == 5e-5);
  for (int e = 8; e < 10; ++e) h.epochs.push_back({e, 3, 3, 5e-5});
  CHECK(lr_on_plateau(h, 5, 0.5, 5e-5, 1e-9) == 2.5e-5);
}

TEST_CASE("zero-initialized epoch-0 validation equals the bilinear baseline") {
  const auto [scene, targets] = training_pair(96, 12);
  const PatchSet all = sample_patches(scene, targets, 8, 16, 3);
  const auto [tr, va] = split_train_val(all, 0.75, 1);

  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 4);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.lr0 = 1e-4;
  tc.min_lr = 1e-7;
  tc.seed = 5;
  const NetworkWeights zeros = zero_weights(config);
  const TrainResult r = train(config, tc, tr, va, &zeros);

  double baseline = 0.0;
  for (size_t i = 0; i < va.size(); ++i) {
    Tensor yb = va.inputs_b[i];
    for (float& v : yb.data) v *= static_cast<float>(1.0 / 2000.0);
    Tensor t = va.targets[i];
    for (float& v : t.data) v *= static_cast<float>(1.0 / 2000.0);
    baseline += l1_loss(bilinear_upsample(yb, 2), t).first;
  }
  baseline /= static_cast<double>(va.size());
  CHECK(r.history.epochs[0].epoch == 0);
  CHECK(r.history.epochs[0].val_loss == baseline);
}

TEST_CASE("training is bit-reproducible single-threaded and actually learns") {
  const auto [scene, targets] = training_pair(96, 13);
  const PatchSet all = sample_patches(scene, targets, 8, 16, 9);
  const auto [tr, va] = split_train_val(all, 0.75, 2);

  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 4);
  TrainConfig tc;
  tc.max_epochs = 60;
  tc.lr0 = 2e-3;
  tc.min_lr = 2e-3 / 1024;
  tc.seed = 21;
  tc.threads = 1;

  const TrainResult r1 = train(config, tc, tr, va, nullptr);
  const TrainResult r2 = train(config, tc, tr, va, nullptr);
  REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
  for (size_t i = 0; i < r1.history.epochs.size(); ++i) {
    CHECK(r1.history.epochs[i].train_loss == r2.history.epochs[i].train_loss);
    CHECK(r1.history.epochs[i].val_loss == r2.history.epochs[i].val_loss);
    CHECK(r1.history.epochs[i].lr == r2.history.epochs[i].lr);
  }
  CHECK(r1.weights.first.kernel == r2.weights.first.kernel);

  const double first = r1.history.epochs.front().train_loss;
  const double last = r1.history.epochs.back().train_loss;
  CHECK(last < 0.6 * first);

  // learning rate never increases
  for (size_t i = 1; i < r1.history.epochs.size(); ++i)
    CHECK(r1.history.epochs[i].lr <= r1.history.epochs[i - 1].lr);
}

TEST_CASE("loss is invariant to a common rescaling of data and value_scale") {
  const auto [scene, targets] = training_pair(48, 14);
  const PatchSet all = sample_patches(scene, targets, 4, 16, 4);
  const auto [tr, va] = split_train_val(all, 0.75, 3);

  PatchSet tr2 = tr, va2 = va;
  auto doubled = [](std::vector<Tensor>& ts) {
    for (auto& t : ts)
      for (float& v : t.data) v *= 2.0f;
  };
  doubled(tr2.inputs_a);
  doubled(tr2.inputs_b);
  doubled(tr2.targets);
  doubled(va2.inputs_a);
  doubled(va2.inputs_b);
  doubled(va2.targets);

  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.lr0 = 1e-3;
  tc.min_lr = 1e-6;
  tc.seed = 8;
  TrainConfig tc2 = tc;
  tc2.value_scale = 4000.0;

  const TrainResult a = train(config, tc, tr, va, nullptr);
  const TrainResult b = train(config, tc2, tr2, va2, nullptr);
  for (size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
    CHECK(a.history.epochs[i].val_loss == b.history.epochs[i].val_loss);
  }
}

TEST_CASE("degenerate targets drive the correction toward zero") {
  // targets equal the bilinear upsampling of the inputs
  const auto [scene, targets] = training_pair(48, 15);
  PatchSet all = sample_patches(scene, targets, 6, 16, 5);
  for (size_t i = 0; i < all.size(); ++i)
    all.targets[i] = bilinear_upsample(all.inputs_b[i], 2);

  const auto [tr, va] = split_train_val(all, 0.7, 4);
  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 4);
  TrainConfig tc;
  tc.max_epochs = 50;
  tc.lr0 = 2e-3;
  tc.min_lr = 2e-3 / 1024;
  tc.seed = 31;

  const TrainResult r = train(config, tc, tr, va, nullptr);
  const double first = r.history.epochs.front().val_loss;
  const double last = r.history.epochs.back().val_loss;
  CHECK(last < 0.2 * first);
}

TEST_CASE("exploding training reports NonFiniteLoss with the epoch") {
  const auto [scene, targets] = training_pair(48, 16);
  const PatchSet all = sample_patches(scene, targets, 4, 16, 6);
  const auto [tr, va] = split_train_val(all, 0.75, 5);

  const NetworkConfig config = NetworkConfig::for_scale(2, 1, 2);
  TrainConfig tc;
  tc.max_epochs = 30;
  tc.lr0 = 1e18;
  tc.min_lr = 1e15;
  tc.seed = 1;
  try {
    train(config, tc, tr, va, nullptr);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("patch file round trip") {
  const auto [scene, targets] = training_pair(48, 17);
  const PatchSet p = sample_patches(scene, targets, 5, 16, 7);
  const auto path = std::filesystem::temp_directory_path() / "s2sr_patches.s2pt";
  save_patches(p, path);
  const PatchSet r = load_patches(path);
  REQUIRE(r.size() == p.size());
  CHECK(r.patch_size == p.patch_size);
  CHECK(r.scale == p.scale);
  for (size_t i = 0; i < p.size(); ++i) {
    CHECK(r.inputs_a[i].data == p.inputs_a[i].data);
    CHECK(r.inputs_b[i].data == p.inputs_b[i].data);
    CHECK(r.targets[i].data == p.targets[i].data);
  }
}

TEST_CASE("history serializes as a readable table") {
  TrainHistory h;
  h.epochs.push_back({0, 0.5, 0.6, 1e-4});
  h.epochs.push_back({1, 0.4, 0.5, 1e-4});
  const std::string text = format_history(h);
  CHECK(text.find("epoch") != std::string::npos);
  CHECK(text.find("val_loss") != std::string::npos);
  CHECK(text.find("5.000000000e-01") != std::string::npos);
}
