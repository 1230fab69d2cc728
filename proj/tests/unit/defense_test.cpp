// Copyright 2026 The TSBD Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradient_oracles.hpp"
#include "mask_oracle.hpp"
#include "reference_mlp.hpp"
#include "tsbd/binary_io.hpp"
#include "tsbd/checkpoint.hpp"
#include "tsbd/csv.hpp"
#include "tsbd/defense.hpp"
#include "tsbd/errors.hpp"
#include "tsbd/metrics.hpp"
#include "tsbd/training.hpp"

namespace tsbd {
namespace {

using testing::random_batch;
using testing::random_net;
using testing::mask_keys;
using testing::oracle_mask;
using testing::oracle_neurons;
using testing::random_case;
using testing::record_from;
using testing::MaskCase;

// ---- unlearning -----------------------------------------------------------

TEST(Unlearn, AlreadyBelowStopReturnsUnchanged) {
  Network net = random_net(3, {6, 5, 3});
  // Labels chosen to disagree with the network's predictions.
  Batch b = random_batch(4, 30, 6, 3);
  const auto pred = argmax_rows(forward(net, b).logits());
  for (std::size_t i = 0; i < b.size(); ++i) b.labels[i] = (pred[i] + 1) % 3;
  UnlearnConfig cfg;
  const auto r = unlearn(net, testing::labeled_from(b, 3), cfg);
  EXPECT_EQ(r.steps, 0u);
  EXPECT_TRUE(r.reached_stop);
  EXPECT_EQ(r.net, net);
  EXPECT_EQ(neuron_count(compute_nwc(net, r.net).nwc), net.hidden_neuron_count());
  for (double v : flatten_neurons(compute_nwc(net, r.net).nwc)) EXPECT_EQ(v, 0.0);
}

TEST(Unlearn, AscendsUntilStopAndRespectsCap) {
  Batch b = random_batch(5, 60, 6, 3);
  for (std::size_t i = 0; i < b.size(); ++i) b.labels[i] = static_cast<Label>(i % 3);
  const LabeledSet ds = testing::labeled_from(b, 3);
  TrainConfig tc;
  tc.epochs = 60;
  tc.lr = 0.2f;
  const Network trained = train(random_net(1, {6, 24, 3}), ds, tc).net;
  ASSERT_GT(accuracy(trained, ds), 0.6);

  UnlearnConfig cfg;
  cfg.lr = 0.05f;
  cfg.stop_accuracy = 0.4;  // ascent collapses onto one class, a third of the set
  const auto r = unlearn(trained, ds, cfg);
  EXPECT_TRUE(r.reached_stop);
  EXPECT_LE(accuracy(r.net, ds), 0.4);
  EXPECT_LE(r.accuracy_trace.back(), 0.4);
  for (std::size_t i = 0; i + 1 < r.accuracy_trace.size(); ++i) EXPECT_GT(r.accuracy_trace[i], 0.4);

  cfg.max_steps = 1;
  cfg.lr = 1e-6f;
  const auto capped = unlearn(trained, ds, cfg);
  EXPECT_EQ(capped.steps, 1u);
  EXPECT_FALSE(capped.reached_stop);
}

TEST(Unlearn, Errors) {
  const LabeledSet ds = testing::labeled_from(random_batch(5, 6, 6, 3), 3);
  const Network net = random_net(1, {6, 4, 3});
  UnlearnConfig cfg;
  EXPECT_THROW(unlearn(net, LabeledSet{}, cfg), DomainError);
  cfg.lr = 0.0f;
  EXPECT_THROW(unlearn(net, ds, cfg), DomainError);
}

// ---- NWC ------------------------------------------------------------------

TEST(Nwc, RowExample) {
  Layer a;
  a.weights = Tensor2D(1, 3, std::vector<float>{1.0f, -2.0f, 0.5f});
  a.biases = {0.0f};
  Layer out;
  out.weights = Tensor2D(1, 1, std::vector<float>{1.0f});
  out.biases = {0.0f};
  out.activation = Activation::kIdentity;
  Network before({a, out});
  Network after = before;
  after.layer(0).weights = Tensor2D(1, 3, std::vector<float>{1.5f, -1.0f, 0.5f});
  after.layer(0).biases = {9.0f};  // biases do not count
  const NwcRecord rec = compute_nwc(before, after);
  ASSERT_EQ(rec.nwc.size(), 1u);
  EXPECT_DOUBLE_EQ(rec.nwc[0][0], 1.5);
  EXPECT_EQ(rec.subweight_change[0].values()[0], 0.5f);
  EXPECT_EQ(rec.subweight_change[0].values()[1], 1.0f);
  EXPECT_EQ(rec.subweight_change[0].values()[2], 0.0f);
}

TEST(Nwc, BruteForceRecomputationOnRandomPairs) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Network a = random_net(seed, {9, 7, 5, 3});
    const Network b = random_net(seed + 100, {9, 7, 5, 3});
    const NwcRecord rec = compute_nwc(a, b);
    ASSERT_EQ(rec.nwc.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) {
      const Layer& la = a.layer(l);
      const Layer& lb = b.layer(l);
      for (std::size_t k = 0; k < la.neurons(); ++k) {
        double sum = 0.0;
        double row = 0.0;
        for (std::size_t i = 0; i < la.fan_in(); ++i) {
          const double d = std::fabs(static_cast<double>(lb.weights(k, i)) - la.weights(k, i));
          sum += d;
          row += rec.subweight_change[l](k, i);
          EXPECT_NEAR(rec.subweight_change[l](k, i), d, 1e-6 * std::max(1.0, d));
        }
        EXPECT_LE(testing::relative_error(rec.nwc[l][k], sum), 1e-5);
        EXPECT_LE(testing::relative_error(rec.nwc[l][k], row), 1e-5);
        EXPECT_GE(rec.nwc[l][k], 0.0);
      }
    }
  }
}

TEST(Nwc, DoublingTheDifferenceDoublesNwc) {
  const Network a = random_net(3, {5, 6, 4, 2});
  const Network b = random_net(4, {5, 6, 4, 2});
  auto fa = flatten(a);
  auto fb = flatten(b);
  std::vector<float> f2(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) f2[i] = fa[i] + 2.0f * (fb[i] - fa[i]);
  Network b2 = a;
  // Rebuild b as a + (b - a) from the same float differences so the factor is exact.
  std::vector<float> f1(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) f1[i] = fa[i] + (fb[i] - fa[i]);
  Network b1 = a;
  assign_flat(b1, f1);
  assign_flat(b2, f2);
  const auto n1 = flatten_neurons(compute_nwc(a, b1).nwc);
  const auto n2 = flatten_neurons(compute_nwc(a, b2).nwc);
  for (std::size_t i = 0; i < n1.size(); ++i) EXPECT_NEAR(n2[i], 2.0 * n1[i], 1e-5 * n2[i]);
  for (double v : flatten_neurons(compute_nwc(a, a).nwc)) EXPECT_EQ(v, 0.0);
}

TEST(Nwc, ShapeMismatch) {
  EXPECT_THROW(compute_nwc(random_net(1, {4, 5, 2}), random_net(1, {4, 6, 2})), DimensionError);
}

TEST(Nwc, CsvAndBinaryExports) {
  const NwcRecord rec = compute_nwc(random_net(1, {4, 3, 2, 2}), random_net(2, {4, 3, 2, 2}));
  const auto dir = testing::scratch_dir("nwc");
  write_nwc_csv(rec, dir / "nwc.csv");
  const CsvTable t = read_csv(dir / "nwc.csv");
  EXPECT_EQ(t.header(), (std::vector<std::string>{"layer", "neuron", "nwc"}));
  EXPECT_EQ(t.row_count(), 5u);
  save_subweight_changes(rec, dir / "sw.tsnw");
  EXPECT_EQ(load_subweight_changes(dir / "sw.tsnw"), rec.subweight_change);

  auto bytes = read_file_bytes(dir / "sw.tsnw");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TSNW");
  auto bad = bytes;
  bad[0] = 'Q';
  EXPECT_THROW(decode_subweight_changes(bad), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 1);
  EXPECT_THROW(decode_subweight_changes(bad), FormatError);
  bad = bytes;
  bad.back() = 0xFF;  // top byte of the last float: negative
  EXPECT_THROW(decode_subweight_changes(bad), FormatError);
}

// ---- mask selection -------------------------------------------------------

TEST(Mask, SpecExampleSelectionAndVariants) {
  const NwcRecord rec = [] {
    NwcRecord r = record_from({{{4, 1}, {0.5f, 0.5f}, {3, 2}, {1, 1}}});
    r.nwc[0] = {5, 1, 3, 2};
    return r;
  }();
  const ReinitMask v1 = select_reinit_mask(rec, 0.5, 0.5, ReinitVariant::kV1);
  EXPECT_EQ(v1.selected_neurons, (std::vector<NeuronId>{{0, 0}, {0, 2}}));
  EXPECT_EQ(v1.layers[0].bits, (std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 0, 0}));

  const ReinitMask v3 = select_reinit_mask(rec, 0.5, 0.5, ReinitVariant::kV3);
  EXPECT_EQ(v3.layers[0].bits, (std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0}));

  const ReinitMask v2 = select_reinit_mask(rec, 0.5, 0.5, ReinitVariant::kV2);
  EXPECT_EQ(v2.layers[0].bits, (std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0}));
}

TEST(Mask, TiesBreakByIndex) {
  const NwcRecord rec = record_from({{{1, 1}, {1, 1}, {1, 1}}, {{1, 1, 1}, {1, 1, 1}}});
  // nwc equal within each layer: layer 0 neurons sum to 2, layer 1 to 3.
  const ReinitMask m = select_reinit_mask(rec, 0.4, 0.5, ReinitVariant::kV3);
  EXPECT_EQ(m.selected_neurons, (std::vector<NeuronId>{{1, 0}, {1, 1}}));
  EXPECT_EQ(m.layers[1].bits, (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0}));
}

TEST(Mask, MatchesBruteForceOracleOnRandomRecords) {
  std::size_t cases = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    const MaskCase c = random_case(seed);
    for (RankingScope scope : {RankingScope::kGlobal, RankingScope::kPerLayer}) {
      const auto chosen = oracle_neurons(c.record, c.n_ratio, scope);
      for (ReinitVariant v : {ReinitVariant::kV1, ReinitVariant::kV2, ReinitVariant::kV3}) {
        const ReinitMask m = select_reinit_mask(c.record, c.n_ratio, c.m_ratio, v, scope);
        const std::set<NeuronId> got(m.selected_neurons.begin(), m.selected_neurons.end());
        ASSERT_EQ(got, chosen) << "seed " << seed;
        ASSERT_EQ(mask_keys(m), oracle_mask(c.record, chosen, c.m_ratio, v))
            << "seed " << seed << " variant " << to_string(v);
        ++cases;
      }
    }
  }
  EXPECT_GE(cases, 300u);
}

TEST(Mask, MonotoneInNeuronRatioAndNested) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const MaskCase c = random_case(seed + 500);
    std::set<NeuronId> prev;
    for (double n : {0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      const ReinitMask v3 = select_reinit_mask(c.record, n, c.m_ratio, ReinitVariant::kV3);
      const ReinitMask v1 = select_reinit_mask(c.record, n, c.m_ratio, ReinitVariant::kV1);
      const std::set<NeuronId> cur(v3.selected_neurons.begin(), v3.selected_neurons.end());
      EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      const auto k1 = mask_keys(v1);
      const auto k3 = mask_keys(v3);
      EXPECT_TRUE(std::includes(k1.begin(), k1.end(), k3.begin(), k3.end()));
      for (const auto& [l, r, col] : k3) EXPECT_TRUE(cur.count(NeuronId{l, r}));
      prev = cur;
    }
  }
}

TEST(Mask, Errors) {
  const NwcRecord rec = record_from({{{1, 2}}});
  EXPECT_THROW(select_reinit_mask(NwcRecord{}, 0.5, 0.5, ReinitVariant::kV3), DomainError);
  EXPECT_THROW(select_reinit_mask(rec, 1.5, 0.5, ReinitVariant::kV3), DomainError);
  EXPECT_THROW(select_reinit_mask(rec, 0.5, 0.0, ReinitVariant::kV3), DomainError);
  EXPECT_EQ(select_reinit_mask(rec, 0.0, 0.5, ReinitVariant::kV3).true_count(), 0u);
}

// ---- zero reinit ----------------------------------------------------------

TEST(ZeroReinit, TouchesExactlyTheMaskedEntries) {
  const Network net = random_net(6, {8, 6, 5, 3});
  const NwcRecord rec = compute_nwc(net, random_net(7, {8, 6, 5, 3}));
  const ReinitMask mask = select_reinit_mask(rec, 0.3, 0.6, ReinitVariant::kV3);
  const Network out = zero_reinit(net, mask);
  std::size_t zeros = 0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto a = net.layer(l).weights.values();
    const auto b = out.layer(l).weights.values();
    for (std::size_t j = 0; j < a.size(); ++j) {
      const bool masked = l < mask.layers.size() && mask.layers[l].bits[j];
      if (masked) {
        EXPECT_EQ(b[j], 0.0f);
        ++zeros;
      } else {
        EXPECT_EQ(std::bit_cast<std::uint32_t>(a[j]), std::bit_cast<std::uint32_t>(b[j]));
      }
    }
    EXPECT_EQ(net.layer(l).biases, out.layer(l).biases);
  }
  EXPECT_EQ(zeros, mask.true_count());
}

TEST(ZeroReinit, EmptyAndFullMasks) {
  const Network net = random_net(6, {8, 6, 5, 3});
  const NwcRecord rec = compute_nwc(net, random_net(7, {8, 6, 5, 3}));
  EXPECT_EQ(zero_reinit(net, select_reinit_mask(rec, 0.0, 0.5, ReinitVariant::kV3)), net);
  const Network full = zero_reinit(net, select_reinit_mask(rec, 1.0, 1.0, ReinitVariant::kV1));
  for (std::size_t l = 0; l < 2; ++l) {
    for (float w : full.layer(l).weights.values()) EXPECT_EQ(w, 0.0f);
  }
  EXPECT_EQ(full.layer(2), net.layer(2));
  EXPECT_THROW(zero_reinit(random_net(1, {8, 7, 5, 3}), select_reinit_mask(rec, 0.5, 0.5, ReinitVariant::kV1)),
               DimensionError);
}

// ---- regulated gradient ---------------------------------------------------

TEST(RegulatedGradient, OneParameterQuadratic) {
  const std::vector<float> theta{2.0f};
  const FlatGradientFn grad = [](std::span<const float> t) { return std::vector<float>(t.begin(), t.end()); };
  const auto g = regulated_gradient(theta, grad, 0.05, 0.7);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_NEAR(g[0], 2.035, 1e-6);
  EXPECT_NEAR(g[0], 2.0 + 0.7 * 0.05 * 1.0, 1e-6);
}

TEST(RegulatedGradient, ExactOnQuadraticForms) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(6);
    // A = B^T B + I, symmetric positive definite.
    std::vector<double> B(n * n), A(n * n, 0.0);
    for (double& v : B) v = rng.uniform(-0.5, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) A[i * n + j] += B[k * n + i] * B[k * n + j];
        if (i == j) A[i * n + j] += 1.0;
      }
    }
    auto mul = [&](std::span<const double> x) {
      std::vector<double> y(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) y[i] += A[i * n + j] * x[j];
      }
      return y;
    };
    std::vector<float> theta(n);
    for (float& t : theta) t = static_cast<float>(rng.uniform(-1.0, 1.0));
    const FlatGradientFn grad = [&](std::span<const float> t) {
      const std::vector<double> td(t.begin(), t.end());
      const auto y = mul(td);
      return std::vector<float>(y.begin(), y.end());
    };
    const double r = 0.05, alpha = 0.7, lambda = alpha * r;
    const auto got = regulated_gradient(theta, grad, r, alpha);

    // d/dθ [θᵀAθ/2 + λ‖Aθ‖] = Aθ + λ A (Aθ) / ‖Aθ‖
    const std::vector<double> td(theta.begin(), theta.end());
    const auto g = mul(td);
    const double norm = testing::l2(g);
    std::vector<double> dir(n);
    for (std::size_t i = 0; i < n; ++i) dir[i] = g[i] / norm;
    const auto hd = mul(dir);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(got[i], g[i] + lambda * hd[i], 1e-6) << seed;
  }
}

TEST(RegulatedGradient, AlphaZeroIsPlainGradientBitForBit) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network net = random_net(seed, {6, 8, 5, 3});
    const Batch b = random_batch(seed + 7, 10, 6, 3);
    const auto plain = backward(net, b);
    const auto reg = regulated_grad(net, b, 0.05, 0.0);
    EXPECT_EQ(reg.gradients, plain.gradients);
    EXPECT_EQ(reg.loss, plain.loss);
  }
}

TEST(RegulatedGradient, DegenerateNormReturnsFirstGradient) {
  const std::vector<float> theta{1.0f, 2.0f};
  int calls = 0;
  const FlatGradientFn grad = [&](std::span<const float>) {
    ++calls;
    return std::vector<float>{0.0f, 0.0f};
  };
  EXPECT_EQ(regulated_gradient(theta, grad, 0.05, 0.7), (std::vector<float>{0.0f, 0.0f}));
  EXPECT_EQ(calls, 1);
}

TEST(RegulatedGradient, Errors) {
  const std::vector<float> theta{1.0f};
  const FlatGradientFn grad = [](std::span<const float> t) { return std::vector<float>(t.begin(), t.end()); };
  EXPECT_THROW(regulated_gradient(theta, grad, 0.0, 0.5), DomainError);
  EXPECT_THROW(regulated_gradient(theta, grad, 0.05, 1.5), DomainError);
  const FlatGradientFn nan = [](std::span<const float>) { return std::vector<float>{NAN}; };
  EXPECT_THROW(regulated_gradient(theta, nan, 0.05, 0.5), DivergenceError);
}

// The approximation is a finite difference of a Hessian-vector product
// with step r, so r is treated like an FD step: small, and shrunk when the
// probe point would cross a ReLU boundary.
class FtObjective : public ::testing::TestWithParam<int> {};

TEST_P(FtObjective, ApproximationMatchesFiniteDifferences) {
  const auto c = testing::check_ft_objective(static_cast<std::uint64_t>(GetParam()), 0.005, 0.7, true);
  EXPECT_EQ(c.bad, 0u) << "worst " << c.worst << " at r " << c.r;
  EXPECT_GT(c.checked, 20u);
  EXPECT_LE(c.penalty_error, 5e-2) << "penalty share " << c.penalty_share;
}

INSTANTIATE_TEST_SUITE_P(SeededNets, FtObjective, ::testing::Range(1, 11));

// ---- fine-tuning and pipeline ---------------------------------------------

TEST(ActivenessFt, ZeroEpochsIsIdentity) {
  const Network net = random_net(3, {6, 5, 3});
  FtConfig cfg;
  cfg.epochs = 0;
  const auto r = activeness_ft(net, testing::labeled_from(random_batch(1, 20, 6, 3), 3), cfg);
  EXPECT_EQ(r.net, net);
  EXPECT_EQ(r.steps, 0u);
}

TEST(ActivenessFt, AlphaZeroEqualsPlainSgd) {
  const Network net = random_net(3, {6, 8, 3});
  const LabeledSet ds = testing::labeled_from(random_batch(1, 50, 6, 3), 3);
  FtConfig fc;
  fc.alpha = 0.0;
  fc.epochs = 4;
  fc.lr = 0.05f;
  fc.batch_size = 16;
  fc.seed = 9;
  TrainConfig tc;
  tc.epochs = 4;
  tc.lr = 0.05f;
  tc.batch_size = 16;
  tc.seed = 9;
  const auto ft = activeness_ft(net, ds, fc);
  const auto plain = train(net, ds, tc);
  EXPECT_EQ(encode_checkpoint(ft.net), encode_checkpoint(plain.net));
  EXPECT_EQ(ft.loss_trace, plain.loss_trace);
  EXPECT_EQ(ft.steps, 16u);
}

TEST(ActivenessFt, DeterministicAndErrors) {
  const Network net = random_net(3, {6, 8, 3});
  const LabeledSet ds = testing::labeled_from(random_batch(1, 40, 6, 3), 3);
  FtConfig cfg;
  cfg.epochs = 2;
  EXPECT_EQ(activeness_ft(net, ds, cfg).net, activeness_ft(net, ds, cfg).net);
  cfg.r = 0.0;
  EXPECT_THROW(activeness_ft(net, ds, cfg), DomainError);
  cfg.r = 0.05;
  cfg.alpha = -0.1;
  EXPECT_THROW(activeness_ft(net, ds, cfg), DomainError);
}

TEST(TsbdRun, NoSelectionAndNoFineTuningIsIdentity) {
  const Network net = random_net(3, {6, 8, 5, 3});
  const LabeledSet ds = testing::labeled_from(random_batch(1, 40, 6, 3), 3);
  TsbdConfig cfg;
  cfg.n_ratio = 0.0;
  cfg.ft.epochs = 0;
  cfg.unlearn.max_steps = 3;
  const auto r = tsbd_run(net, ds, cfg);
  EXPECT_EQ(r.mask.true_count(), 0u);
  EXPECT_EQ(r.reinitialized, net);
  EXPECT_EQ(r.defended, net);
}

TEST(TsbdRun, StageArtifactsCompose) {
  const Network net = random_net(3, {6, 8, 5, 3});
  const LabeledSet ds = testing::labeled_from(random_batch(1, 40, 6, 3), 3);
  const auto dir = testing::scratch_dir("stages");
  TsbdConfig cfg;
  cfg.unlearn.lr = 0.05f;
  cfg.unlearn.max_steps = 20;
  cfg.ft.epochs = 2;
  cfg.stage_dir = dir;
  const auto r = tsbd_run(net, ds, cfg);

  EXPECT_EQ(r.nwc.nwc, compute_nwc(net, r.unlearned).nwc);
  EXPECT_EQ(r.mask.layers, select_reinit_mask(r.nwc, 0.15, 0.7, ReinitVariant::kV3).layers);
  EXPECT_EQ(r.reinitialized, zero_reinit(net, r.mask));
  std::size_t zeros = 0;
  for (std::size_t l = 0; l < r.mask.layers.size(); ++l) {
    for (std::size_t j = 0; j < r.mask.layers[l].bits.size(); ++j) {
      if (r.mask.layers[l].bits[j]) zeros += r.reinitialized.layer(l).weights.values()[j] == 0.0f;
    }
  }
  EXPECT_EQ(zeros, r.mask.true_count());
  EXPECT_EQ(r.defended, activeness_ft(r.reinitialized, ds, cfg.ft).net);

  EXPECT_EQ(load_checkpoint(dir / "unlearned.tsbd"), r.unlearned);
  EXPECT_EQ(load_checkpoint(dir / "reinit.tsbd"), r.reinitialized);
  EXPECT_EQ(load_checkpoint(dir / "defended.tsbd"), r.defended);
}

TEST(TsbdRun, FailuresNameTheStage) {
  const Network net = random_net(3, {6, 8, 5, 3});
  LabeledSet ds = testing::labeled_from(random_batch(1, 40, 6, 3), 3);
  TsbdConfig cfg;
  cfg.ft.r = 0.0;
  cfg.unlearn.max_steps = 1;
  try {
    tsbd_run(net, ds, cfg);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "finetune");
  }
  ds.poisoned[0] = 1;
  EXPECT_THROW(tsbd_run(net, ds, cfg), StageError);
}

TEST(Variant, ParseAndPrint) {
  EXPECT_EQ(parse_variant("V2"), ReinitVariant::kV2);
  EXPECT_EQ(to_string(parse_variant("v1")), "v1");
  EXPECT_THROW(parse_variant("v4"), DomainError);
}

}  // namespace
}  // namespace tsbd
