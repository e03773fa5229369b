// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/saliency.hpp"

#include <gtest/gtest.h>

#include <random>

#include "fixture.hpp"
#include "oracles.hpp"
#include "polycam/faithfulness.hpp"
#include "polycam/tensor_ops.hpp"
#include "stub_models.hpp"

namespace polycam {
namespace {

using testing::mean_model;

WeightVector Weights(std::string layer, std::vector<float> w, WeightKind kind = WeightKind::CVC) {
  return {std::move(layer), 0, kind, std::move(w)};
}

TEST(SingleLayerCamTest, HandExample) {
  ActivationStack stack;
  stack.add("l", {1, {Plane::from_rows({{1, 0}, {0, 0}}), Plane::from_rows({{0, 0}, {0, 1}})}});
  const SaliencyMap m = single_layer_cam(stack, Weights("l", {0.2f, 0.8f}, WeightKind::CIC), "l");
  EXPECT_EQ(m.plane, Plane::from_rows({{0.2f, 0}, {0, 0.8f}}));
  EXPECT_EQ(m.method, "cam_cic");
  EXPECT_EQ(m.layer, "l");
  EXPECT_EQ(single_layer_cam(stack, Weights("l", {0, 0}), "l").plane, Plane(2, 2));
}

class TwoLayerStackTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    auto random_plane = [&](std::size_t n) {
      Plane p(n, n);
      for (float& v : p.values()) v = u(rng);
      return p;
    };
    stack.add("fine", {1, {random_plane(8), random_plane(8)}});
    stack.add("coarse", {4, {random_plane(2), random_plane(2), random_plane(2)}});
    weights = {Weights("fine", {0.7f, 0.3f}), Weights("coarse", {0.5f, -0.1f, 0.9f})};
  }
  ActivationStack stack;
  std::vector<WeightVector> weights;
  std::vector<std::string> layers{"fine", "coarse"};
};

TEST_F(TwoLayerStackTest, BaseCaseEqualsSingleLayerCam) {
  const std::vector<std::string> last{"coarse"};
  const auto maps = polycam_from_weights(stack, std::span(&weights[1], 1), last, true);
  ASSERT_EQ(maps.size(), 1u);
  EXPECT_EQ(maps[0].plane, single_layer_cam(stack, weights[1], "coarse").plane);
}

TEST_F(TwoLayerStackTest, RecursionMatchesOracleAndLadder) {
  for (bool with_lnorm : {true, false}) {
    const auto maps = polycam_from_weights(stack, weights, layers, with_lnorm);
    ASSERT_EQ(maps.size(), 2u);
    EXPECT_EQ(maps[0].layer, "coarse");
    EXPECT_EQ(maps[1].layer, "fine");
    EXPECT_EQ(maps[0].plane.height(), 2u);
    EXPECT_EQ(maps[1].plane.height(), 8u);
    const auto want = oracle::polycam({&stack.layer("fine"), &stack.layer("coarse")},
                                      {{0.7, 0.3}, {0.5, -0.1, 0.9}}, with_lnorm);
    EXPECT_LE(oracle::max_abs_diff(want[0], maps[0].plane), 1e-6);
    EXPECT_LE(oracle::max_abs_diff(want[1], maps[1].plane), 1e-6);
    EXPECT_EQ(maps[1].method, with_lnorm ? "pcam_pm" : "pcam_pm_nolnorm");
    EXPECT_EQ(maps[1].parameters.at("lnorm"), with_lnorm ? "true" : "false");
  }
}

TEST_F(TwoLayerStackTest, ConstantLocalLayerPassesCoarseMapThrough) {
  ActivationStack s = stack;
  s.add("fine", {1, {Plane(8, 8, 2.0f)}});
  std::vector<WeightVector> w{Weights("fine", {1.5f}), weights[1]};
  const auto maps = polycam_from_weights(s, w, layers, true);
  const Plane up = upsample_bilinear(maps[0].plane, 4);
  for (std::size_t k = 0; k < up.size(); ++k) EXPECT_NEAR(maps[1].plane.values()[k], up.values()[k], 1e-6);
}

TEST_F(TwoLayerStackTest, RejectsBadLayerOrder) {
  const std::vector<std::string> reversed{"coarse", "fine"};
  std::vector<WeightVector> w{weights[1], weights[0]};
  EXPECT_THROW(polycam_from_weights(stack, w, reversed, true), std::invalid_argument);
  EXPECT_THROW(polycam_from_weights(stack, std::span(weights.data(), 1), layers, true), std::invalid_argument);
}

TEST_F(TwoLayerStackTest, AllZeroLastMapWarnsAndPropagates) {
  std::vector<WeightVector> w{weights[0], Weights("coarse", {0, 0, 0})};
  const auto maps = polycam_from_weights(stack, w, layers, true);
  for (const auto& m : maps) {
    ASSERT_FALSE(m.warnings.empty());
    EXPECT_NE(m.warnings.front().find("degenerate-saliency"), std::string::npos);
    EXPECT_EQ(max_value(m.plane), 0.0f);
  }
}

class FixtureSaliencyTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = load_model(testing::fixture_model()).release();
    images_ = new std::vector<testing::FixtureImage>(testing::fixture_images(model_->info().input, 20));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete images_;
  }
  static OnnxModel* model_;
  static std::vector<testing::FixtureImage>* images_;
};

OnnxModel* FixtureSaliencyTest::model_ = nullptr;
std::vector<testing::FixtureImage>* FixtureSaliencyTest::images_ = nullptr;

TEST_F(FixtureSaliencyTest, ResolutionLadderAndNonnegativity) {
  const auto maps = polycam(*model_, images_->at(0).tensor, 0, WeightKind::CVC);
  ASSERT_EQ(maps.size(), 3u);
  const std::vector<std::size_t> dims{8, 16, 32};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(maps[i].plane.height(), dims[i]);
    EXPECT_EQ(maps[i].plane.width(), dims[i]);
    EXPECT_NO_THROW(validate_map(maps[i], model_->info().input));
    EXPECT_EQ(maps[i].model_id, "tiny_cnn");
  }
  EXPECT_EQ(maps.back().layer, "block1_conv");
}

TEST_F(FixtureSaliencyTest, MatchesLiteralRecursion) {
  const auto& taps = model_->info().taps;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& im = images_->at(i);
    const TapResult t = model_->tap_activations(im.tensor);
    std::vector<const LayerActivations*> layers;
    for (const auto& tap : taps) layers.push_back(&t.activations.layer(tap.name));
    for (auto kind : {WeightKind::CIC, WeightKind::CDC, WeightKind::CVC}) {
      std::vector<std::vector<double>> w;
      for (const auto* la : layers) w.push_back(oracle::weights(*model_, im.tensor, *la, im.label, kind));
      for (bool with_lnorm : {true, false}) {
        const auto got = polycam(*model_, im.tensor, im.label, kind, {}, with_lnorm);
        const auto want = oracle::polycam(layers, w, with_lnorm);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t l = 0; l < want.size(); ++l) {
          EXPECT_LE(oracle::max_rel_diff(want[l], got[l].plane), 1e-5)
              << "image " << i << " kind " << to_string(kind) << " lnorm " << with_lnorm << " map " << l;
        }
      }
    }
  }
}

TEST_F(FixtureSaliencyTest, ScoreCamIsCicAtLastTap) {
  const auto& im = images_->at(1);
  const SaliencyMap s = score_cam(*model_, im.tensor, im.label);
  EXPECT_EQ(s.method, "scorecam");
  EXPECT_EQ(s.layer, "block3_conv");
  const TapResult t = model_->tap_activations(im.tensor);
  const auto& la = t.activations.layer("block3_conv");
  const auto want = oracle::cam(la.channels, oracle::weights(*model_, im.tensor, la, im.label, WeightKind::CIC));
  EXPECT_LE(oracle::max_rel_diff(want, s.plane), 1e-5);
}

TEST_F(FixtureSaliencyTest, LnormAblationChangesMaps) {
  std::size_t differing = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& im = images_->at(i);
    const auto on = polycam(*model_, im.tensor, im.label, WeightKind::CVC, {}, true);
    const auto off = polycam(*model_, im.tensor, im.label, WeightKind::CVC, {}, false);
    EXPECT_EQ(on.front().plane, off.front().plane) << "last layer has no normalisation";
    if (!(on.back().plane == off.back().plane)) ++differing;
  }
  EXPECT_EQ(differing, 5u);
}

TEST_F(FixtureSaliencyTest, MapsAreClassSpecific) {
  std::size_t distinct = 0;
  for (const auto& im : *images_) {
    const std::size_t other = (im.label + 1) % 10;
    const auto a = polycam(*model_, im.tensor, im.label, WeightKind::CVC).back().plane;
    const auto b = polycam(*model_, im.tensor, other, WeightKind::CVC).back().plane;
    double l1 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) l1 += std::abs(a.values()[k] - b.values()[k]);
    if (l1 > 0.0) ++distinct;
  }
  EXPECT_GE(distinct * 10, images_->size() * 9);
}

TEST_F(FixtureSaliencyTest, RejectsUnorderedLayersAndBadClass) {
  const auto& x = images_->at(0).tensor;
  EXPECT_THROW(polycam(*model_, x, 0, WeightKind::CVC, {"block3_conv", "block1_conv"}), std::invalid_argument);
  EXPECT_THROW(polycam(*model_, x, 10, WeightKind::CVC), std::invalid_argument);
  EXPECT_THROW(polycam(*model_, x, 0, WeightKind::CVC, {"nope"}), std::invalid_argument);
}

TEST(OcclusionTest, FullImagePatchGivesConstantDrop) {
  const Geometry g{3, 6, 6};
  const auto model = mean_model(g);
  const ImageTensor x(g, 0.8f);
  const ImageTensor baseline(g, 0.2f);
  const SaliencyMap m = occlusion_map(model, x, 0, {6, 6}, {1, 1}, baseline);
  for (float v : m.plane.values()) EXPECT_NEAR(v, 0.6, 1e-6);
  // Occluding with a brighter baseline raises the score, so the drop clamps at zero.
  const SaliencyMap clamped = occlusion_map(model, baseline, 0, {6, 6}, {1, 1}, x);
  EXPECT_EQ(clamped.plane, Plane(6, 6));
}

TEST(OcclusionTest, UniformInputGivesUniformMap) {
  const Geometry g{3, 12, 12};
  const auto model = mean_model(g);
  const SaliencyMap m = occlusion_map(model, ImageTensor(g, 1.0f), 0, {4, 4}, {2, 2}, ImageTensor(g));
  const float first = m.plane.values().front();
  EXPECT_NEAR(first, 16.0 / 144.0, 1e-6);
  for (float v : m.plane.values()) EXPECT_NEAR(v, first, 1e-6);
}

TEST(OcclusionTest, DefaultGeometryHas21By21Positions) {
  const Geometry g{3, 224, 224};
  const auto model = mean_model(g);
  const SaliencyMap m = occlusion_map(model, ImageTensor(g, 1.0f), 0, {64, 64}, {8, 8}, ImageTensor(g));
  EXPECT_EQ(m.parameters.at("positions"), "441");
  EXPECT_EQ(m.plane.height(), 224u);
  EXPECT_EQ(m.plane.width(), 224u);
}

TEST(OcclusionTest, PatchLargerThanImageThrows) {
  const Geometry g{3, 8, 8};
  const auto model = mean_model(g);
  EXPECT_THROW(occlusion_map(model, ImageTensor(g), 0, {9, 9}, {1, 1}, ImageTensor(g)), std::invalid_argument);
  EXPECT_THROW(occlusion_map(model, ImageTensor(g), 0, {2, 2}, {4, 4}, ImageTensor(g)), std::invalid_argument);
}

TEST(RiseTest, SingleFullMaskIsProportionalToScore) {
  const Geometry g{3, 8, 8};
  const auto model = mean_model(g);
  const ImageTensor x(g, 0.4f);
  const Plane m = rise_aggregate(model, x, 0, 1, [&](std::size_t) { return Plane(8, 8, 1.0f); }, 1.0);
  for (float v : m.values()) EXPECT_NEAR(v, 0.4, 1e-6);
}

TEST(RiseTest, MasksAreDeterministicAndBounded) {
  const Geometry g{3, 32, 32};
  const RiseOptions opts{100, 7, 0.5, 42};
  for (std::size_t i = 0; i < 10; ++i) {
    const Plane a = rise_mask(g, opts, i);
    EXPECT_EQ(a, rise_mask(g, opts, i));
    EXPECT_EQ(a.height(), 32u);
    EXPECT_GE(min_value(a), 0.0f);
    EXPECT_LE(max_value(a), 1.0f);
  }
  EXPECT_FALSE(rise_mask(g, opts, 0) == rise_mask(g, opts, 1));
  const RiseOptions other{100, 7, 0.5, 43};
  EXPECT_FALSE(rise_mask(g, opts, 0) == rise_mask(g, other, 0));
}

TEST(RiseTest, FixedSeedRunsAreIdentical) {
  const Geometry g{3, 16, 16};
  const auto model = mean_model(g);
  const ImageTensor x(g, 1.0f);
  const RiseOptions opts{64, 4, 0.5, 3};
  EXPECT_EQ(rise_map(model, x, 0, opts).plane, rise_map(model, x, 0, opts).plane);
}

TEST(RiseTest, MeanModelMapApproachesUniform) {
  const Geometry g{3, 32, 32};
  const auto model = mean_model(g);
  const SaliencyMap m = rise_map(model, ImageTensor(g, 1.0f), 0, {2000, 7, 0.5, 11});
  EXPECT_GT(min_value(m.plane), 0.0f);
  EXPECT_LT(max_value(m.plane) / min_value(m.plane), 1.25);
  EXPECT_EQ(m.parameters.at("n_masks"), "2000");
}

TEST(RiseTest, RejectsBadParameters) {
  const Geometry g{3, 8, 8};
  const auto model = mean_model(g);
  EXPECT_THROW(rise_map(model, ImageTensor(g), 0, {0, 7, 0.5, 0}), std::invalid_argument);
  EXPECT_THROW(rise_map(model, ImageTensor(g), 0, {10, 7, 1.0, 0}), std::invalid_argument);
}

TEST(ValidateMapTest, RejectsNegativeAndNonDividingMaps) {
  const Geometry g{3, 8, 8};
  SaliencyMap ok{Plane(4, 4, 1.0f), "x", 0, "l", "m", {}, {}};
  EXPECT_NO_THROW(validate_map(ok, g));
  SaliencyMap negative = ok;
  negative.plane(0, 0) = -1.0f;
  EXPECT_THROW(validate_map(negative, g), std::invalid_argument);
  SaliencyMap odd{Plane(3, 3, 1.0f), "x", 0, "l", "m", {}, {}};
  EXPECT_THROW(validate_map(odd, g), std::invalid_argument);
  EXPECT_EQ(to_input_resolution(ok.plane, g).height(), 8u);
}

}  // namespace
}  // namespace polycam
