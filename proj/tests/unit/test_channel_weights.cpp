// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/channel_weights.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

#include "fixture.hpp"
#include "oracles.hpp"
#include "polycam/tensor_ops.hpp"
#include "stub_models.hpp"

namespace polycam {
namespace {

using testing::FunctionModel;
using testing::mean_model;

Plane Quadrant() {
  Plane p(4, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) p(i, j) = 1.0f;
  }
  return p;
}

ActivationStack SingleLayer(std::vector<Plane> channels, std::size_t s = 1) {
  ActivationStack stack;
  stack.add("l", {s, std::move(channels)});
  return stack;
}

TEST(BuildMaskTest, BinaryMaskAtUnitSubsamplingIsUnchanged) {
  EXPECT_EQ(build_mask(Quadrant(), 1, MaskPolarity::Positive), Quadrant());
  Plane complement = Quadrant();
  for (float& v : complement.values()) v = 1.0f - v;
  EXPECT_EQ(build_mask(Quadrant(), 1, MaskPolarity::Negative), complement);
}

TEST(BuildMaskTest, ConstantChannelGivesZeroMask) {
  EXPECT_EQ(build_mask(Plane(2, 2, 3.0f), 2, MaskPolarity::Positive), Plane(4, 4));
}

TEST(BuildMaskTest, UpsamplesToInputResolution) {
  const Plane m = build_mask(Plane::from_rows({{0, 1}, {2, 3}}), 4, MaskPolarity::Positive);
  EXPECT_EQ(m.height(), 8u);
  EXPECT_EQ(m.width(), 8u);
  EXPECT_EQ(min_value(m), 0.0f);
  EXPECT_EQ(max_value(m), 1.0f);
}

class MeanModelWeightsTest : public ::testing::Test {
 protected:
  Geometry g{3, 4, 4};
  ImageTensor ones{g, 1.0f};
};

TEST_F(MeanModelWeightsTest, QuadrantExample) {
  const auto stack = SingleLayer({Quadrant()});
  const auto model = mean_model(g, stack, {{"l", 1}});
  EXPECT_NEAR(channel_weights(model, ones, stack, "l", 0, WeightKind::CIC).weights[0], 0.25, 1e-6);
  EXPECT_NEAR(channel_weights(model, ones, stack, "l", 0, WeightKind::CDC).weights[0], 0.25, 1e-6);
  EXPECT_NEAR(channel_weights(model, ones, stack, "l", 0, WeightKind::CVC).weights[0], 0.5, 1e-6);
}

TEST_F(MeanModelWeightsTest, DegenerateChannelsSkipTheForwardPass) {
  std::atomic<int> calls{0};
  const auto stack = SingleLayer({Plane(4, 4), Plane(4, 4, 2.5f)});
  FunctionModel model(
      {"count", g, 2, {{"l", 1}}},
      [&](const ImageTensor& x) {
        ++calls;
        const auto m = static_cast<float>(testing::mean_of(x));
        return Probabilities{m, 1.0f - m};
      },
      stack);
  for (auto kind : {WeightKind::CIC, WeightKind::CDC, WeightKind::CVC}) {
    const auto w = channel_weights(model, ones, stack, "l", 0, kind);
    EXPECT_EQ(w.weights, (std::vector<float>{0.0f, 0.0f}));
  }
  EXPECT_EQ(calls.load(), 0);
}

TEST_F(MeanModelWeightsTest, NearlyFullMaskInstantiatesTheVariationFormula) {
  Plane almost(4, 4, 1.0f);
  almost(3, 3) = 0.0f;
  const auto stack = SingleLayer({almost});
  const auto model = mean_model(g, stack, {{"l", 1}});
  // f(x) + f(x*m) - f(x*(1-m)) with f = mean: 1 + 15/16 - 1/16.
  EXPECT_NEAR(channel_weights(model, ones, stack, "l", 0, WeightKind::CVC).weights[0], 1.875, 1e-6);
}

TEST_F(MeanModelWeightsTest, MaskEndpoints) {
  const auto model = mean_model(g);
  EXPECT_NEAR(class_score(model, ones.masked(Plane(4, 4, 0.0f)), 0), 0.0, 1e-6);
  EXPECT_NEAR(class_score(model, ones.masked(Plane(4, 4, 1.0f)), 0), class_score(model, ones, 0), 1e-6);
}

TEST_F(MeanModelWeightsTest, UnknownLayerOrClassThrows) {
  const auto stack = SingleLayer({Quadrant()});
  const auto model = mean_model(g, stack, {{"l", 1}});
  EXPECT_THROW(channel_weights(model, ones, stack, "nope", 0, WeightKind::CIC), std::invalid_argument);
  EXPECT_THROW(channel_weights(model, ones, stack, "l", 2, WeightKind::CIC), std::invalid_argument);
}

TEST(WeightKindTest, ParsesNamesAndSymbols) {
  EXPECT_EQ(parse_weight_kind("cic"), WeightKind::CIC);
  EXPECT_EQ(parse_weight_kind("+"), WeightKind::CIC);
  EXPECT_EQ(parse_weight_kind("cdc"), WeightKind::CDC);
  EXPECT_EQ(parse_weight_kind("-"), WeightKind::CDC);
  EXPECT_EQ(parse_weight_kind("cvc"), WeightKind::CVC);
  EXPECT_EQ(parse_weight_kind("±"), WeightKind::CVC);
  EXPECT_THROW(parse_weight_kind("grad"), std::invalid_argument);
  EXPECT_EQ(to_string(WeightKind::CDC), "cdc");
}

// A softly nonlinear two-class model: f_0 = sigmoid(a . X).
struct RandomStub {
  Geometry g{3, 8, 8};
  std::vector<float> a;
  ActivationStack stack;

  explicit RandomStub(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 0.3f);
    std::uniform_real_distribution<float> u(0.0f, 2.0f);
    a.resize(3 * 64);
    for (float& v : a) v = n(rng);
    std::vector<Plane> channels;
    for (std::size_t k = 0; k < 6; ++k) {
      Plane p(4, 4);
      for (float& v : p.values()) v = u(rng) < 0.6f ? 0.0f : u(rng);
      channels.push_back(p);
    }
    channels.push_back(Plane(4, 4, 1.0f));
    stack.add("l", {2, channels});
  }

  FunctionModel model() const {
    auto weights = a;
    return FunctionModel(
        {"stub", g, 2, {{"l", 2}}},
        [weights](const ImageTensor& x) {
          double z = 0.0;
          for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x.values()[i];
          const auto p = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
          return Probabilities{p, 1.0f - p};
        },
        stack);
  }

  ImageTensor input(uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    ImageTensor x(g);
    for (float& v : x.values()) v = n(rng);
    return x;
  }
};

TEST(RandomStubWeightsTest, MatchLiteralFormulaAndSignInvariants) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const RandomStub stub(seed);
    const auto model = stub.model();
    const ImageTensor x = stub.input(seed + 1000);
    for (auto kind : {WeightKind::CIC, WeightKind::CDC, WeightKind::CVC}) {
      const auto got = channel_weights(model, x, stub.stack, "l", 0, kind);
      const auto want = oracle::weights(model, x, stub.stack.layer("l"), 0, kind);
      ASSERT_EQ(got.weights.size(), want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        EXPECT_NEAR(got.weights[k], want[k], 1e-6) << "seed " << seed << " kind " << to_string(kind) << " k " << k;
        if (kind == WeightKind::CIC) {
          EXPECT_GE(got.weights[k], 0.0f);
          EXPECT_LE(got.weights[k], 1.0f);
        } else {
          EXPECT_GE(got.weights[k], 0.0f);
        }
      }
      EXPECT_EQ(got.weights.back(), 0.0f) << "constant channel";
    }
  }
}

TEST(RandomStubWeightsTest, PermutingChannelsPermutesWeights) {
  const RandomStub stub(5);
  const auto model = stub.model();
  const ImageTensor x = stub.input(6);
  const auto& channels = stub.stack.layer("l").channels;
  const std::vector<std::size_t> perm{3, 0, 6, 5, 1, 4, 2};
  std::vector<Plane> shuffled;
  for (std::size_t p : perm) shuffled.push_back(channels[p]);
  const auto permuted_stack = SingleLayer(shuffled, 2);
  for (auto kind : {WeightKind::CIC, WeightKind::CDC, WeightKind::CVC}) {
    const auto base = channel_weights(model, x, stub.stack, "l", 0, kind).weights;
    const auto moved = channel_weights(model, x, permuted_stack, "l", 0, kind).weights;
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(moved[i], base[perm[i]]);
  }
}

TEST(RandomStubWeightsTest, TopKKeepsStrongestChannels) {
  const RandomStub stub(8);
  const auto model = stub.model();
  const ImageTensor x = stub.input(9);
  const auto& channels = stub.stack.layer("l").channels;
  const auto full = channel_weights(model, x, stub.stack, "l", 0, WeightKind::CIC).weights;
  const auto pruned = channel_weights(model, x, stub.stack, "l", 0, WeightKind::CIC, {2}).weights;
  std::vector<std::size_t> order(channels.size() - 1);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](auto a, auto b) { return max_value(channels[a]) > max_value(channels[b]); });
  std::size_t kept = 0;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const bool top = k == order[0] || k == order[1];
    if (top) {
      EXPECT_EQ(pruned[k], full[k]);
      ++kept;
    } else {
      EXPECT_EQ(pruned[k], 0.0f);
    }
  }
  EXPECT_EQ(kept, 2u);
}

TEST(FixtureWeightsTest, IndependentOfBatchSize) {
  const auto images = testing::fixture_images({3, 32, 32}, 1);
  std::vector<std::vector<float>> results;
  for (std::size_t batch : {1, 7, 32}) {
    const auto model = load_model(testing::fixture_model(), {batch, {}});
    const TapResult t = model->tap_activations(images[0].tensor);
    results.push_back(
        channel_weights(*model, images[0].tensor, t.activations, "block2_conv", 0, WeightKind::CVC).weights);
  }
  EXPECT_EQ(results[0], results[1]);
  EXPECT_EQ(results[0], results[2]);
}

}  // namespace
}  // namespace polycam
