// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polycam/tensor_ops.hpp"
#include "random.hpp"

namespace polycam {

void validate_map(const SaliencyMap& map, const Geometry& input) {
  const Plane& p = map.plane;
  if (input.height % p.height() != 0 || input.width % p.width() != 0 ||
      input.height / p.height() != input.width / p.width()) {
    throw std::invalid_argument("saliency map " + std::to_string(p.height()) + "x" + std::to_string(p.width()) +
                                " is not an integer subsampling of the input");
  }
  for (float v : p.values()) {
    if (!std::isfinite(v) || v < 0.0f) throw std::invalid_argument("saliency map has a negative or non-finite entry");
  }
}

Plane to_input_resolution(const Plane& plane, const Geometry& input) {
  if (plane.height() == input.height && plane.width() == input.width) return plane;
  if (input.height % plane.height() != 0 || input.width % plane.width() != 0 ||
      input.height / plane.height() != input.width / plane.width()) {
    throw std::invalid_argument("map does not divide the input geometry");
  }
  return upsample_bilinear(plane, input.height / plane.height());
}

std::string polycam_method_name(WeightKind kind) {
  switch (kind) {
    case WeightKind::CIC:
      return "pcam_plus";
    case WeightKind::CDC:
      return "pcam_minus";
    case WeightKind::CVC:
      return "pcam_pm";
  }
  return "pcam";
}

SaliencyMap single_layer_cam(const ActivationStack& acts, const WeightVector& w, const std::string& layer) {
  const LayerActivations& la = acts.layer(layer);
  SaliencyMap map{weighted_relu_sum(la.channels, w.weights), "cam_" + to_string(w.kind), w.cls, layer, {}, {}, {}};
  map.parameters["weight_kind"] = to_string(w.kind);
  map.parameters["subsampling"] = std::to_string(la.subsampling);
  return map;
}

std::vector<SaliencyMap> polycam_from_weights(const ActivationStack& acts, std::span<const WeightVector> weights,
                                              std::span<const std::string> layers, bool lnorm_enabled) {
  if (layers.empty()) throw std::invalid_argument("polycam: no layers");
  if (weights.size() != layers.size()) throw std::invalid_argument("polycam: one weight vector per layer required");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const std::size_t prev = acts.layer(layers[i - 1]).subsampling;
    const std::size_t cur = acts.layer(layers[i]).subsampling;
    if (cur <= prev || cur % prev != 0) {
      throw std::invalid_argument("polycam: layers must have strictly increasing, nested subsampling factors");
    }
  }

  const std::size_t last = layers.size() - 1;
  std::vector<SaliencyMap> maps;
  maps.reserve(layers.size());
  maps.push_back(single_layer_cam(acts, weights[last], layers[last]));
  const bool degenerate = std::ranges::all_of(maps.back().plane.values(), [](float v) { return v == 0.0f; });

  for (std::size_t i = last; i-- > 0;) {
    const LayerActivations& la = acts.layer(layers[i]);
    const std::size_t ratio = acts.layer(layers[i + 1]).subsampling / la.subsampling;
    Plane local = weighted_relu_sum(la.channels, weights[i].weights);
    if (lnorm_enabled) local = lnorm(local, ratio);
    Plane refined = hadamard(local, upsample_bilinear(maps.back().plane, ratio));
    maps.push_back({std::move(refined), {}, weights[i].cls, layers[i], {}, {}, {}});
  }

  const std::string method = polycam_method_name(weights.front().kind);
  for (auto& m : maps) {
    m.method = lnorm_enabled ? method : method + "_nolnorm";
    m.parameters["weight_kind"] = to_string(weights.front().kind);
    m.parameters["lnorm"] = lnorm_enabled ? "true" : "false";
    m.parameters["subsampling"] = std::to_string(acts.layer(m.layer).subsampling);
    m.parameters["layers"] = "";
    for (std::size_t i = 0; i < layers.size(); ++i) m.parameters["layers"] += (i ? "," : "") + layers[i];
    if (degenerate) m.warnings.push_back("degenerate-saliency: all-zero map at layer " + layers[last]);
  }
  return maps;
}

std::vector<SaliencyMap> polycam(const Model& model, const ImageTensor& x, std::size_t cls, WeightKind kind,
                                 std::vector<std::string> layers, bool lnorm_enabled, const WeightOptions& options) {
  const ModelInfo& info = model.info();
  if (cls >= info.classes) throw std::invalid_argument("polycam: class index out of range");
  if (layers.empty()) {
    for (const auto& t : info.taps) layers.push_back(t.name);
  }
  if (layers.empty()) throw std::invalid_argument("polycam: model has no tap layers");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (info.tap(layers[i]).subsampling <= info.tap(layers[i - 1]).subsampling) {
      throw std::invalid_argument("polycam: layers must be ordered by strictly increasing subsampling");
    }
  }
  const TapResult tapped = model.tap_activations(x);
  std::vector<WeightVector> weights;
  weights.reserve(layers.size());
  for (const auto& layer : layers) {
    weights.push_back(channel_weights(model, x, tapped.activations, layer, cls, kind, options));
  }
  auto maps = polycam_from_weights(tapped.activations, weights, layers, lnorm_enabled);
  for (auto& m : maps) {
    m.model_id = info.id;
    if (options.top_k) m.parameters["top_k"] = std::to_string(*options.top_k);
    if (std::stoul(m.parameters["subsampling"]) > 1) m.parameters["metrics_resolution"] = "bilinear-upsampled to input";
  }
  return maps;
}

SaliencyMap isolated_cam(const Model& model, const ImageTensor& x, std::size_t cls, WeightKind kind,
                         const std::string& layer, const WeightOptions& options) {
  const TapResult tapped = model.tap_activations(x);
  SaliencyMap map =
      single_layer_cam(tapped.activations, channel_weights(model, x, tapped.activations, layer, cls, kind, options), layer);
  map.model_id = model.info().id;
  return map;
}

SaliencyMap score_cam(const Model& model, const ImageTensor& x, std::size_t cls, const WeightOptions& options) {
  const auto& taps = model.info().taps;
  if (taps.empty()) throw std::invalid_argument("score_cam: model has no tap layers");
  SaliencyMap map = isolated_cam(model, x, cls, WeightKind::CIC, taps.back().name, options);
  map.method = "scorecam";
  return map;
}

SaliencyMap occlusion_map(const Model& model, const ImageTensor& x, std::size_t cls, Extent patch, Extent stride,
                          const ImageTensor& baseline) {
  model.check_input(x);
  if (!(baseline.geometry() == x.geometry())) throw std::invalid_argument("occlusion: baseline geometry differs");
  const Geometry& g = x.geometry();
  if (patch.height == 0 || patch.width == 0 || stride.height == 0 || stride.width == 0) {
    throw std::invalid_argument("occlusion: patch and stride must be positive");
  }
  if (patch.height > g.height || patch.width > g.width) {
    throw std::invalid_argument("occlusion: patch " + std::to_string(patch.height) + "x" + std::to_string(patch.width) +
                                " is larger than the image");
  }
  if (patch.height < stride.height || patch.width < stride.width) {
    throw std::invalid_argument("occlusion: patch must be at least as large as the stride");
  }
  const std::size_t rows = (g.height - patch.height) / stride.height + 1;
  const std::size_t cols = (g.width - patch.width) / stride.width + 1;
  const std::size_t positions = rows * cols;

  auto occluded = [&](std::size_t p) {
    ImageTensor img = x;
    const std::size_t y0 = (p / cols) * stride.height;
    const std::size_t x0 = (p % cols) * stride.width;
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t i = y0; i < y0 + patch.height; ++i) {
        for (std::size_t j = x0; j < x0 + patch.width; ++j) img.at(c, i, j) = baseline.at(c, i, j);
      }
    }
    return img;
  };
  const double full = class_score(model, x, cls);
  const auto scores = score_generated(model, positions, cls, occluded);

  std::vector<double> sum(g.pixels(), 0.0);
  std::vector<std::size_t> count(g.pixels(), 0);
  for (std::size_t p = 0; p < positions; ++p) {
    const double drop = full - scores[p];
    const std::size_t y0 = (p / cols) * stride.height;
    const std::size_t x0 = (p % cols) * stride.width;
    for (std::size_t i = y0; i < y0 + patch.height; ++i) {
      for (std::size_t j = x0; j < x0 + patch.width; ++j) {
        sum[i * g.width + j] += drop;
        ++count[i * g.width + j];
      }
    }
  }
  Plane plane(g.height, g.width);
  auto dst = plane.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = count[i] ? static_cast<float>(std::max(0.0, sum[i] / static_cast<double>(count[i]))) : 0.0f;
  }
  SaliencyMap map{std::move(plane), "occlusion", cls, "input", model.info().id, {}, {}};
  map.parameters["patch"] = std::to_string(patch.height) + "x" + std::to_string(patch.width);
  map.parameters["stride"] = std::to_string(stride.height) + "x" + std::to_string(stride.width);
  map.parameters["positions"] = std::to_string(positions);
  return map;
}

Plane rise_mask(const Geometry& input, const RiseOptions& options, std::size_t index) {
  if (options.grid == 0) throw std::invalid_argument("rise: grid must be positive");
  auto engine = detail::stream_engine(options.seed, index);
  const std::size_t g = options.grid;
  Plane cells(g, g);
  for (float& v : cells.values()) v = detail::uniform01(engine) < options.p ? 1.0f : 0.0f;
  const std::size_t cell_h = (input.height + g - 1) / g;
  const std::size_t cell_w = (input.width + g - 1) / g;
  const Plane up = resize_bilinear(cells, (g + 1) * cell_h, (g + 1) * cell_w);
  const auto dy = static_cast<std::size_t>(detail::uniform01(engine) * static_cast<double>(cell_h));
  const auto dx = static_cast<std::size_t>(detail::uniform01(engine) * static_cast<double>(cell_w));
  Plane mask(input.height, input.width);
  for (std::size_t i = 0; i < input.height; ++i) {
    for (std::size_t j = 0; j < input.width; ++j) mask(i, j) = up(i + dy, j + dx);
  }
  return mask;
}

Plane rise_aggregate(const Model& model, const ImageTensor& x, std::size_t cls, std::size_t count,
                     const std::function<Plane(std::size_t)>& mask, double p) {
  model.check_input(x);
  if (count == 0) throw std::invalid_argument("rise: at least one mask required");
  if (!(p > 0.0)) throw std::invalid_argument("rise: keep probability must be positive");
  const auto scores = score_generated(model, count, cls, [&](std::size_t i) { return x.masked(mask(i)); });
  const Geometry& g = x.geometry();
  std::vector<double> acc(g.pixels(), 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const Plane m = mask(i);
    auto v = m.values();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += static_cast<double>(scores[i]) * v[k];
  }
  Plane out(g.height, g.width);
  const double norm = static_cast<double>(count) * p;
  auto dst = out.values();
  for (std::size_t k = 0; k < acc.size(); ++k) dst[k] = static_cast<float>(std::max(0.0, acc[k] / norm));
  return out;
}

SaliencyMap rise_map(const Model& model, const ImageTensor& x, std::size_t cls, const RiseOptions& options) {
  if (options.n_masks == 0) throw std::invalid_argument("rise: n_masks must be at least 1");
  if (!(options.p > 0.0 && options.p < 1.0)) throw std::invalid_argument("rise: p must lie in (0, 1)");
  const Geometry g = x.geometry();
  Plane plane = rise_aggregate(
      model, x, cls, options.n_masks, [&](std::size_t i) { return rise_mask(g, options, i); }, options.p);
  SaliencyMap map{std::move(plane), "rise", cls, "input", model.info().id, {}, {}};
  map.parameters["n_masks"] = std::to_string(options.n_masks);
  map.parameters["grid"] = std::to_string(options.grid);
  map.parameters["p"] = std::to_string(options.p);
  map.parameters["seed"] = std::to_string(options.seed);
  return map;
}

}  // namespace polycam
