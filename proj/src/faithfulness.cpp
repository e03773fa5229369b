// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polycam {

namespace {

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect101(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

std::string to_string(CurveMode mode) { return mode == CurveMode::Insertion ? "insertion" : "deletion"; }

std::vector<double> gaussian_kernel(std::size_t kernel, double sigma) {
  if (kernel == 0 || kernel % 2 == 0) throw std::invalid_argument("blur kernel size must be odd");
  if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
  std::vector<double> taps(kernel);
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

ImageTensor blur_baseline(const ImageTensor& x, const BlurOptions& options) {
  const auto taps = gaussian_kernel(options.kernel, options.sigma);
  if (options.kernel == 1) return x;
  const auto radius = static_cast<std::ptrdiff_t>(options.kernel / 2);
  const Geometry& g = x.geometry();
  ImageTensor out(g);
  std::vector<double> tmp(g.pixels());
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.height; ++i) {
      for (std::size_t j = 0; j < g.width; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] *
                 x.at(c, i, reflect101(static_cast<std::ptrdiff_t>(j) + k, g.width));
        }
        tmp[i * g.width + j] = acc;
      }
    }
    for (std::size_t i = 0; i < g.height; ++i) {
      for (std::size_t j = 0; j < g.width; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] *
                 tmp[reflect101(static_cast<std::ptrdiff_t>(i) + k, g.height) * g.width + j];
        }
        out.at(c, i, j) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

std::vector<std::size_t> saliency_order(const Plane& plane) {
  auto v = plane.values();
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

EvalCurve perturbation_curve(const Model& model, const ImageTensor& x, const Plane& saliency, std::size_t cls,
                             CurveMode mode, const CurveSchedule& schedule, const ImageTensor& baseline) {
  model.check_input(x);
  const Geometry& g = x.geometry();
  if (!(baseline.geometry() == g)) throw std::invalid_argument("perturbation_curve: baseline geometry differs");
  if (saliency.height() != g.height || saliency.width() != g.width) {
    throw std::invalid_argument("perturbation_curve: saliency map must be at input resolution");
  }
  if (schedule.steps == 0 || schedule.steps * schedule.pixels_per_step != g.pixels()) {
    throw std::invalid_argument("perturbation_curve: " + std::to_string(schedule.steps) + " steps of " +
                                std::to_string(schedule.pixels_per_step) + " pixels do not cover " +
                                std::to_string(g.pixels()) + " pixels");
  }
  const auto order = saliency_order(saliency);
  const ImageTensor& start = mode == CurveMode::Insertion ? baseline : x;
  const ImageTensor& source = mode == CurveMode::Insertion ? x : baseline;
  const std::size_t n = g.pixels();

  auto image_at = [&](std::size_t step) {
    ImageTensor img = start;
    const std::size_t changed = step * schedule.pixels_per_step;
    for (std::size_t r = 0; r < changed; ++r) {
      const std::size_t px = order[r];
      for (std::size_t c = 0; c < g.channels; ++c) img.values()[c * n + px] = source.values()[c * n + px];
    }
    return img;
  };
  const auto scores = score_generated(model, schedule.steps + 1, cls, image_at);

  EvalCurve curve;
  curve.mode = mode;
  curve.samples.reserve(scores.size());
  double sum = 0.0;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    curve.samples.push_back({static_cast<double>(s) / static_cast<double>(schedule.steps), scores[s]});
    sum += scores[s];
  }
  curve.auc = sum / static_cast<double>(scores.size());
  return curve;
}

EvalCurve perturbation_curve(const Model& model, const ImageTensor& x, const SaliencyMap& map, std::size_t cls,
                             CurveMode mode, const CurveSchedule& schedule, const BlurOptions& blur) {
  const Plane full = to_input_resolution(map.plane, x.geometry());
  EvalCurve curve = perturbation_curve(model, x, full, cls, mode, schedule, blur_baseline(x, blur));
  curve.metadata["method"] = map.method;
  curve.metadata["layer"] = map.layer;
  if (!full.same_shape(map.plane)) curve.metadata["ranking"] = "bilinear-upsampled";
  return curve;
}

double ins_del_score(const EvalCurve& insertion, const EvalCurve& deletion) {
  if (insertion.mode != CurveMode::Insertion || deletion.mode != CurveMode::Deletion) {
    throw std::invalid_argument("ins_del_score: expected an insertion and a deletion curve");
  }
  return insertion.auc - deletion.auc;
}

}  // namespace polycam
