// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polycam/model.hpp"
#include "polycam/saliency.hpp"

namespace polycam {

enum class CurveMode { Insertion, Deletion };

std::string to_string(CurveMode mode);

struct CurveSample {
  double fraction = 0.0;
  double score = 0.0;
};

struct EvalCurve {
  CurveMode mode = CurveMode::Insertion;
  /// steps + 1 samples, fraction 0 first and 1 last.
  std::vector<CurveSample> samples;
  double auc = 0.0;
  /// Image key the curve was measured on (used by the CSV writer).
  std::string image;
  std::map<std::string, std::string> metadata;
};

struct BlurOptions {
  std::size_t kernel = 11;
  double sigma = 5.0;
};

/// Normalized 1D Gaussian taps of odd length `kernel`.
std::vector<double> gaussian_kernel(std::size_t kernel, double sigma);

/// Separable per-channel Gaussian blur with mirror (reflect-101) borders.
ImageTensor blur_baseline(const ImageTensor& x, const BlurOptions& options = {});

struct CurveSchedule {
  std::size_t steps = 224;
  std::size_t pixels_per_step = 224;
};

/// Pixel visiting order: saliency descending, ties by ascending flattened index.
std::vector<std::size_t> saliency_order(const Plane& plane);

/// Insertion starts from `baseline` and copies in the most salient pixels of `x`
/// (all colour channels together); deletion starts from `x` and replaces them
/// with `baseline`. The score is recorded before the first and after every step
/// and the AUC is the mean of those steps + 1 scores.
EvalCurve perturbation_curve(const Model& model, const ImageTensor& x, const Plane& saliency, std::size_t cls,
                             CurveMode mode, const CurveSchedule& schedule, const ImageTensor& baseline);

/// Convenience overload that blurs `x` for the baseline and accepts a coarse map.
EvalCurve perturbation_curve(const Model& model, const ImageTensor& x, const SaliencyMap& map, std::size_t cls,
                             CurveMode mode, const CurveSchedule& schedule, const BlurOptions& blur = {});

/// Insertion AUC minus deletion AUC.
double ins_del_score(const EvalCurve& insertion, const EvalCurve& deletion);

}  // namespace polycam
