// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/robustness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixture.hpp"
#include "oracles.hpp"
#include "polycam/errors.hpp"
#include "polycam/saliency.hpp"
#include "stub_models.hpp"

namespace polycam {
namespace {

using testing::mean_model;

SaliencyMap FirstChannel(const Model&, const ImageTensor& x, std::size_t cls) {
  return {x.channel(0), "first-channel", cls, "input", "stub", {}, {}};
}

ImageTensor PositiveImage(const Geometry& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(1.0f, 2.0f);
  ImageTensor x(g);
  for (float& v : x.values()) v = u(rng);
  return x;
}

TEST(PerturbationTest, StayInsideTheBallAndAreSeeded) {
  const Geometry g{3, 6, 6};
  const ImageTensor x = PositiveImage(g, 1);
  const auto a = linf_perturbations(x, 10, 0.02, 5);
  const auto b = linf_perturbations(x, 10, 0.02, 5);
  const auto c = linf_perturbations(x, 10, 0.02, 6);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_FALSE(a[i] == c[i]);
    for (std::size_t k = 0; k < x.values().size(); ++k) {
      EXPECT_LE(std::abs(a[i].values()[k] - x.values()[k]), 0.02 + 1e-6);
    }
  }
  EXPECT_FALSE(a[0] == a[1]);
}

TEST(SensitivityTest, ZeroPerturbationGivesZero) {
  const Geometry g{3, 6, 6};
  const auto model = mean_model(g);
  const ImageTensor x = PositiveImage(g, 2);
  const std::vector<ImageTensor> same(4, x);
  EXPECT_EQ(max_relative_change(model, x, 0, FirstChannel, same), 0.0);
}

TEST(SensitivityTest, InputIndependentMapGivesZero) {
  const Geometry g{3, 6, 6};
  const auto model = mean_model(g);
  const SaliencyProcedure constant = [](const Model&, const ImageTensor&, std::size_t cls) {
    return SaliencyMap{Plane(6, 6, 0.5f), "const", cls, "input", "stub", {}, {}};
  };
  EXPECT_EQ(sensitivity_max(model, PositiveImage(g, 3), 0, constant), 0.0);
}

TEST(SensitivityTest, FirstChannelMatchesReplayOracle) {
  const Geometry g{3, 8, 8};
  const auto model = mean_model(g);
  const ImageTensor x = PositiveImage(g, 4);
  const SensitivityOptions opts{10, 0.02, 77};
  const double got = sensitivity_max(model, x, 0, FirstChannel, opts);

  const auto replay = linf_perturbations(x, 10, 0.02, 77);
  const oracle::Grid ref(x.channel(0));
  double norm = 0.0;
  for (double v : ref.v) norm += v * v;
  norm = std::sqrt(norm);
  double want = 0.0;
  for (const auto& p : replay) {
    double d = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        const double diff = static_cast<double>(p.at(0, i, j)) - ref.at(i, j);
        d += diff * diff;
      }
    }
    want = std::max(want, std::sqrt(d) / norm);
  }
  EXPECT_NEAR(got, want, 1e-9);
  EXPECT_GT(got, 0.0);
  EXPECT_EQ(got, sensitivity_max(model, x, 0, FirstChannel, opts));
}

TEST(SensitivityTest, ErrorsAndReport) {
  const Geometry g{3, 4, 4};
  const auto model = mean_model(g);
  const SaliencyProcedure zero = [](const Model&, const ImageTensor&, std::size_t cls) {
    return SaliencyMap{Plane(4, 4), "zero", cls, "input", "stub", {}, {}};
  };
  EXPECT_THROW(sensitivity_max(model, ImageTensor(g, 1.0f), 0, zero), DegenerateExplanationError);
  EXPECT_THROW(sensitivity_max(model, ImageTensor(g), 0, FirstChannel, {0, 0.02, 0}), std::invalid_argument);
  EXPECT_THROW(sensitivity_max(model, ImageTensor(g), 0, FirstChannel, {10, 0.0, 0}), std::invalid_argument);
  const auto report = make_sensitivity_report("m", {0.1, 0.2, 0.6});
  EXPECT_NEAR(report.mean, 0.3, 1e-12);
  EXPECT_EQ(report.sensitivities.size(), 3u);
}

std::vector<float> Shuffled(std::vector<float> v, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

TEST(SpearmanTest, SelfReversalAndConstant) {
  const std::vector<float> a{0.1f, 0.5f, 0.3f, 0.9f, 0.2f};
  EXPECT_NEAR(spearman(a, a).rho, 1.0, 1e-12);
  std::vector<float> reversed;
  for (float v : a) reversed.push_back(-v);
  EXPECT_NEAR(spearman(a, reversed).rho, -1.0, 1e-12);
  const std::vector<float> flat(5, 2.0f);
  const Similarity s = spearman(a, flat);
  EXPECT_EQ(s.rho, 0.0);
  EXPECT_TRUE(s.degenerate);
  EXPECT_FALSE(spearman(a, a).degenerate);
  EXPECT_THROW(spearman(a, std::vector<float>{1.0f}), std::invalid_argument);
}

TEST(SpearmanTest, MidRanksMatchCountingOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> a(60), b(60);
    for (auto& v : a) v = static_cast<float>(level(rng));
    for (auto& v : b) v = static_cast<float>(level(rng)) + 0.5f * static_cast<float>(level(rng) == 0);
    const std::vector<double> da(a.begin(), a.end());
    const std::vector<double> db(b.begin(), b.end());
    EXPECT_NEAR(spearman(a, b).rho, oracle::spearman(da, db), 1e-12);
  }
}

TEST(SpearmanTest, ShuffledLargeMapsAreUncorrelated) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> map(224 * 224);
  for (float& v : map) v = u(rng);
  for (uint64_t s = 0; s < 20; ++s) EXPECT_LT(std::abs(spearman(map, Shuffled(map, s)).rho), 0.1);
}

TEST(CascadeCheckTest, OriginalStageIsOneAndStagesFollowTheCascade) {
  std::vector<std::unique_ptr<OnnxModel>> owned;
  for (std::size_t s = 0; s < 5; ++s) owned.push_back(load_model(testing::cascade_model(s)));
  std::vector<const Model*> variants;
  for (const auto& m : owned) variants.push_back(m.get());
  const auto images = testing::fixture_images(owned[0]->info().input, 1);
  const SaliencyProcedure pcam = [](const Model& m, const ImageTensor& x, std::size_t c) {
    return polycam(m, x, c, WeightKind::CVC).back();
  };
  const auto trace = cascade_check(variants, images[0].tensor, images[0].label, pcam);
  ASSERT_EQ(trace.stages.size(), 5u);
  ASSERT_EQ(trace.similarity.size(), 5u);
  EXPECT_DOUBLE_EQ(trace.similarity[0], 1.0);
  for (std::size_t s = 0; s < 5; ++s) {
    EXPECT_EQ(trace.stages[s], "tiny_cnn_cascade_" + std::to_string(s));
    EXPECT_GE(trace.similarity[s], -1.0);
    EXPECT_LE(trace.similarity[s], 1.0);
  }
}

TEST(CascadeCheckTest, GeometryMismatchIsInvalidArgument) {
  const auto a = mean_model({3, 8, 8});
  const auto b = mean_model({3, 16, 16});
  const std::vector<const Model*> variants{&a, &b};
  EXPECT_THROW(cascade_check(variants, ImageTensor({3, 8, 8}, 1.0f), 0, FirstChannel), std::invalid_argument);
}

}  // namespace
}  // namespace polycam
