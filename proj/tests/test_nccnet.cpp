#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "irncc/error.hpp"
#include "irncc/nccnet.hpp"
#include "test_support.hpp"

using namespace irncc;
using irncc::testkit::kink_free_patch;
using irncc::testkit::random_patch;
using irncc::testkit::rel_err;

namespace {

NccNetwork random_net(Rng& rng, int n, int side, NormMode mode) {
  NccNetwork net;
  net.norm_mode = mode;
  for (int k = 0; k < n; ++k) {
    net.filters.push_back(mode == NormMode::Mad ? kink_free_patch(rng, side) : random_patch(rng, side, side));
    net.weights.push_back(rng.uniform(0.2, 1.5) * (k % 2 ? -1 : 1));
  }
  return net;
}

// Hand-composed pipeline from the patchmath primitives.
double composed_forward(const NccNetwork& net, const Patch& p) {
  double out = 0;
  for (int k = 0; k < net.filter_count(); ++k) {
    const Patch pn = normalize(p, net.norm_mode);
    const Patch fn = normalize(net.filters[k], net.norm_mode);
    out += net.weights[k] * std::max(0.0, dot(pn, fn));
  }
  return out;
}

PatchSet toy_set(Rng& rng, int count) {
  PatchSet set;
  for (int i = 0; i < count; ++i) {
    Patch p = random_patch(rng, 15, 15, 0, 1);
    const bool pos = i % 2 == 0;
    if (pos)
      for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 15; ++c) p(r, c) += 6.0 * std::exp(-((r - 7) * (r - 7) + (c - 7) * (c - 7)) / 2.0);
    set.add(std::move(p), pos ? 1 : -1);
  }
  return set;
}

}  // namespace

TEST(Forward, SelfMatchAndAntiMatch) {
  Rng rng(1);
  const Patch p = random_patch(rng, 15, 15);
  NccNetwork net;
  net.filters = {normalize_std(p)};
  net.weights = {1.0};
  EXPECT_NEAR(forward(net, p), 1.0, 1e-12);
  Patch neg = net.filters[0];
  for (double& v : neg.values()) v = -v;
  net.filters = {neg};
  EXPECT_DOUBLE_EQ(forward(net, p), 0.0);
}

TEST(Forward, EqualsComposition) {
  Rng rng(2);
  for (NormMode mode : {NormMode::Std, NormMode::Mad, NormMode::None})
    for (int t = 0; t < 20; ++t) {
      const NccNetwork net = random_net(rng, 1 + t % 4, 15, mode);
      const Patch p = random_patch(rng, 15, 15);
      EXPECT_NEAR(forward(net, p), composed_forward(net, p), 1e-12);
    }
}

TEST(Forward, ModeInvariance) {
  Rng rng(3);
  for (NormMode mode : {NormMode::Std, NormMode::Mad}) {
    const NccNetwork net = random_net(rng, 3, 15, mode);
    const Patch p = random_patch(rng, 15, 15);
    Patch q = p;
    for (double& v : q.values()) v = 2.0 * v + 100.0;
    EXPECT_NEAR(forward(net, q), forward(net, p), 1e-9);
  }
  const NccNetwork none = random_net(rng, 2, 15, NormMode::None);
  const Patch p = random_patch(rng, 15, 15);
  Patch q = p;
  for (double& v : q.values()) v = 2.0 * v + 100.0;
  EXPECT_GT(std::abs(forward(none, q) - forward(none, p)), 1e-3);
}

TEST(Forward, FilterScaleIrrelevantInNormalizedModes) {
  Rng rng(4);
  NccNetwork net = random_net(rng, 2, 9, NormMode::Std);
  const Patch p = random_patch(rng, 9, 9);
  const double before = forward(net, p);
  for (double& v : net.filters[1].values()) v = 7.0 * v + 3.0;
  EXPECT_NEAR(forward(net, p), before, 1e-12);
}

TEST(Relu, Values) {
  EXPECT_EQ(relu(-0.5), 0.0);
  EXPECT_EQ(relu(0.7), 0.7);
  EXPECT_EQ(relu(0.0), 0.0);
}

TEST(L1Loss, Values) {
  EXPECT_DOUBLE_EQ(l1_loss(0.3, 1), 0.7);
  EXPECT_DOUBLE_EQ(l1_loss(-1, -1), 0.0);
  EXPECT_DOUBLE_EQ(l1_loss(0, -1), 1.0);
  EXPECT_THROW(l1_loss(0, 0.5), InvalidArgumentError);
}

TEST(Backward, FiniteDifferencesAllModes) {
  Rng rng(5);
  const double h = 1e-6;
  for (NormMode mode : {NormMode::Std, NormMode::Mad, NormMode::None}) {
    int checked = 0;
    while (checked < 3) {
      NccNetwork net = random_net(rng, 2, 7, mode);
      const Patch p = mode == NormMode::Mad ? kink_free_patch(rng, 7) : random_patch(rng, 7, 7);
      const std::vector<double> s = filter_scores(net, p);
      const double out = forward(net, p);
      bool near_kink = std::abs(out - 1.0) < 1e-3;
      for (double v : s) near_kink = near_kink || std::abs(v) < 1e-3;
      if (near_kink) continue;
      ++checked;
      const BackwardResult b = backward(net, p, 1.0);
      for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < net.filters[k].size(); ++i) {
          NccNetwork plus = net, minus = net;
          plus.filters[k][i] += h;
          minus.filters[k][i] -= h;
          const double fd = (l1_loss(forward(plus, p), 1) - l1_loss(forward(minus, p), 1)) / (2 * h);
          EXPECT_LT(rel_err(b.grads.filter_grads[k][i], fd), 1e-4) << to_string(mode) << " k=" << k << " i=" << i;
        }
        NccNetwork plus = net, minus = net;
        plus.weights[k] += h;
        minus.weights[k] -= h;
        const double fd = (l1_loss(forward(plus, p), 1) - l1_loss(forward(minus, p), 1)) / (2 * h);
        EXPECT_LT(rel_err(b.grads.weight_grads[k], fd), 1e-4);
      }
    }
  }
}

TEST(Backward, ZeroWeightsAndExactLabel) {
  Rng rng(6);
  NccNetwork net = random_net(rng, 2, 7, NormMode::Std);
  const Patch p = random_patch(rng, 7, 7);
  net.weights = {0.0, 0.0};
  for (const Patch& g : backward(net, p, 1).grads.filter_grads)
    for (double v : g.values()) EXPECT_EQ(v, 0.0);

  net.filters = {normalize_std(p)};
  net.weights = {1.0};
  ASSERT_NEAR(forward(net, p), 1.0, 1e-12);
  net.weights = {1.0 / forward(net, p)};
  const BackwardResult b = backward(net, p, 1);
  if (forward(net, p) == 1.0) {
    EXPECT_EQ(b.loss, 0.0);
    for (double v : b.grads.filter_grads[0].values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(b.grads.weight_grads[0], 0.0);
  }
}

TEST(Sgd, VanillaAndZeroGradient) {
  Rng rng(7);
  NccNetwork net = random_net(rng, 1, 3, NormMode::Std);
  const NccNetwork before = net;
  GradientSet g = GradientSet::zeros_like(net);
  for (double& v : g.filter_grads[0].values()) v = rng.uniform(-1, 1);
  g.weight_grads[0] = 0.5;
  TrainConfig cfg;
  cfg.momentum = 0;
  cfg.weight_decay = 0;
  cfg.learning_rate = 0.1;
  GradientSet vel = GradientSet::zeros_like(net);
  sgd_step(net, g, cfg, vel);
  for (std::size_t i = 0; i < 9; ++i)
    EXPECT_NEAR(net.filters[0][i], before.filters[0][i] - 0.1 * g.filter_grads[0][i], 1e-15);
  EXPECT_NEAR(net.weights[0], before.weights[0] - 0.05, 1e-15);

  NccNetwork still = before;
  GradientSet vel2 = GradientSet::zeros_like(still);
  sgd_step(still, GradientSet::zeros_like(still), cfg, vel2);
  EXPECT_EQ(still, before);
}

TEST(Sgd, TwoStepMomentumUnrolled) {
  NccNetwork net;
  net.filters = {Patch(1, 1, 0.0)};
  net.weights = {0.0};
  GradientSet g = GradientSet::zeros_like(net);
  g.filter_grads[0][0] = 2.0;
  g.weight_grads[0] = -3.0;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0;
  GradientSet vel = GradientSet::zeros_like(net);
  sgd_step(net, g, cfg, vel);
  sgd_step(net, g, cfg, vel);
  EXPECT_NEAR(net.filters[0][0], -0.01 * 2.0 * (2 + 0.9), 1e-15);
  EXPECT_NEAR(net.weights[0], 0.01 * 3.0 * (2 + 0.9), 1e-15);
}

TEST(Sgd, WeightDecayTerm) {
  NccNetwork net;
  net.filters = {Patch(1, 1, 2.0)};
  net.weights = {1.0};
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;
  cfg.weight_decay = 0.01;
  GradientSet vel = GradientSet::zeros_like(net);
  sgd_step(net, GradientSet::zeros_like(net), cfg, vel);
  EXPECT_NEAR(net.filters[0][0], 2.0 - 0.1 * 0.01 * 2.0, 1e-15);
  EXPECT_NEAR(vel.weight_grads[0], -0.1 * 0.01, 1e-15);
}

TEST(Init, ShapeBoundsDeterminism) {
  const NccNetwork a = init_network(4, 15, NormMode::Mad, 9);
  EXPECT_EQ(a, init_network(4, 15, NormMode::Mad, 9));
  EXPECT_NE(a, init_network(4, 15, NormMode::Mad, 10));
  ASSERT_EQ(a.filter_count(), 4);
  ASSERT_EQ(a.weights.size(), 4u);
  for (double w : a.weights) EXPECT_DOUBLE_EQ(w, 0.25);
  for (const Patch& f : a.filters)
    for (double v : f.values()) {
      EXPECT_GE(v, -0.05);
      EXPECT_LE(v, 0.05);
    }
  EXPECT_THROW(init_network(0, 15, NormMode::Std, 1), InvalidArgumentError);
  EXPECT_THROW(init_network(5, 15, NormMode::Std, 1), InvalidArgumentError);
  EXPECT_THROW(init_network(1, 14, NormMode::Std, 1), InvalidArgumentError);
}

TEST(Similarity, Examples) {
  Rng rng(8);
  const Patch f = random_patch(rng, 15, 15);
  Patch neg = f, aff = f;
  for (double& v : neg.values()) v = -v;
  for (double& v : aff.values()) v = 3 * v + 11;
  EXPECT_NEAR(filter_similarity(f, f), 1.0, 1e-12);
  EXPECT_NEAR(filter_similarity(f, neg), -1.0, 1e-12);
  EXPECT_NEAR(filter_similarity(f, aff), 1.0, 1e-9);
  EXPECT_THROW(filter_similarity(f, Patch(15, 15, 1.0)), DegeneratePatchError);
}

TEST(Train, SeparableToySet) {
  Rng rng(9);
  const PatchSet train_set = toy_set(rng, 400), held = toy_set(rng, 200);
  TrainConfig cfg;
  cfg.rng_seed = 4;
  const TrainResult r = train(init_network(1, 15, NormMode::Std, 3), train_set, cfg, &held);
  ASSERT_EQ(r.history.epochs.size(), 5u);
  EXPECT_GT(r.history.epochs.back().heldout_accuracy, 0.95);
}

TEST(Train, DeterministicAndZeroRate) {
  Rng rng(10);
  const PatchSet set = toy_set(rng, 120);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.rng_seed = 1;
  const NccNetwork init = init_network(2, 15, NormMode::Mad, 5);
  const TrainResult a = train(init, set, cfg), b = train(init, set, cfg);
  EXPECT_EQ(a.net.filters, b.net.filters);
  EXPECT_EQ(a.net.weights, b.net.weights);
  cfg.learning_rate = 0;
  cfg.max_epochs = 3;
  const TrainResult frozen = train(init, set, cfg);
  EXPECT_EQ(frozen.net.filters, init.filters);
  EXPECT_EQ(frozen.net.weights, init.weights);
  cfg.learning_rate = -1;
  EXPECT_THROW(train(init, set, cfg), InvalidArgumentError);
}

TEST(Train, DegenerateSamplesSkipped) {
  Rng rng(11);
  PatchSet set = toy_set(rng, 80);
  for (int i = 0; i < 7; ++i) set.add(Patch(15, 15, 5.0), -1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  const TrainResult r = train(init_network(1, 15, NormMode::Std, 1), set, cfg);
  EXPECT_EQ(r.history.epochs[0].skipped_degenerate, 7u);
  EXPECT_THROW(train(init_network(1, 15, NormMode::Std, 1), PatchSet{}, cfg), InvalidArgumentError);
}

TEST(Calibrate, MatchesExhaustiveSearch) {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> out(40);
    std::vector<int> lab(40);
    for (int i = 0; i < 40; ++i) {
      lab[i] = rng.uniform() < 0.4 ? 1 : -1;
      out[i] = std::round(rng.normal(lab[i] > 0 ? 0.5 : 0.0, 0.4) * 8) / 8;  // ties on purpose
    }
    const double thr = calibrate_threshold(out, lab);
    // Exhaustive oracle over every candidate cut, including all-positive.
    double best = -1;
    std::vector<double> cuts = {-1e9};
    for (double v : out) cuts.push_back(v);
    for (double c : cuts) {
      int ok = 0;
      for (int i = 0; i < 40; ++i) ok += ((out[i] > c) == (lab[i] > 0));
      best = std::max(best, ok / 40.0);
    }
    EXPECT_DOUBLE_EQ(accuracy_at(out, lab, thr).accuracy, best);
  }
}

TEST(NetworkFile, LosslessRoundTrip) {
  Rng rng(13);
  NccNetwork net = random_net(rng, 3, 5, NormMode::Mad);
  net.train_config = TrainConfig{};
  net.train_config->rng_seed = 77;
  std::stringstream ss;
  write_network(ss, net);
  EXPECT_EQ(read_network(ss), net);
  net.train_config.reset();
  std::stringstream ss2;
  write_network(ss2, net);
  EXPECT_EQ(read_network(ss2), net);
  std::istringstream bad("irncc-network 1\nnorm_mode std\nfilter_count 9\n");
  EXPECT_THROW(read_network(bad), Error);
}
