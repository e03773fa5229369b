// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polycam/model.hpp"
#include "polycam/saliency.hpp"

namespace polycam {

/// A saliency method bound to its parameters: (model, image, class) -> map.
using SaliencyProcedure = std::function<SaliencyMap(const Model&, const ImageTensor&, std::size_t)>;

struct SensitivityOptions {
  std::size_t n_perturb = 10;
  double radius = 0.02;
  uint64_t seed = 0;
};

struct SensitivityReport {
  std::string method;
  std::vector<double> sensitivities;
  double mean = 0.0;
};

/// n copies of x with i.i.d. uniform noise in [-radius, radius] per entry.
std::vector<ImageTensor> linf_perturbations(const ImageTensor& x, std::size_t n, double radius, uint64_t seed);

/// max_i ||phi(x_i) - phi(x)||_2 / ||phi(x)||_2 over the given perturbed inputs,
/// with maps compared at input resolution. Throws DegenerateExplanationError
/// when phi(x) is identically zero.
double max_relative_change(const Model& model, const ImageTensor& x, std::size_t cls, const SaliencyProcedure& method,
                           std::span<const ImageTensor> perturbed);

double sensitivity_max(const Model& model, const ImageTensor& x, std::size_t cls, const SaliencyProcedure& method,
                       const SensitivityOptions& options = {});

SensitivityReport make_sensitivity_report(std::string method, std::vector<double> values);

struct Similarity {
  double rho = 0.0;
  /// Set when either plane has zero rank variance; rho is then 0.
  bool degenerate = false;
};

/// Spearman rank correlation of the flattened planes with mid-ranked ties.
Similarity randomization_similarity(const SaliencyMap& original, const SaliencyMap& randomized);
Similarity spearman(std::span<const float> a, std::span<const float> b);

struct RandomizationTrace {
  std::vector<std::string> stages;
  std::vector<double> similarity;
  std::vector<bool> degenerate;
  /// Pass threshold applied to the final stage; the trend itself is not asserted.
  double threshold = 0.5;

  bool passes() const { return !similarity.empty() && similarity.back() < threshold; }
};

/// Map of `method` on every variant compared against the map on variants[0].
RandomizationTrace cascade_check(std::span<const Model* const> variants, const ImageTensor& x, std::size_t cls,
                                 const SaliencyProcedure& method);

}  // namespace polycam
