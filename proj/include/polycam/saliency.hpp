// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polycam/channel_weights.hpp"
#include "polycam/model.hpp"
#include "polycam/plane.hpp"

namespace polycam {

struct SaliencyMap {
  Plane plane;
  std::string method;
  std::size_t cls = 0;
  /// Layer whose resolution the plane has; "input" for perturbation methods.
  std::string layer;
  std::string model_id;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> warnings;
};

/// Throws std::invalid_argument unless the plane is finite, nonnegative and an
/// integer subsampling of the input geometry.
void validate_map(const SaliencyMap& map, const Geometry& input);

/// The plane bilinearly upsampled to input resolution.
Plane to_input_resolution(const Plane& plane, const Geometry& input);

std::string polycam_method_name(WeightKind kind);

/// ReLU(sum_k w_k A_k) at the layer's native resolution.
SaliencyMap single_layer_cam(const ActivationStack& acts, const WeightVector& w, const std::string& layer);

/// Recursion over precomputed weights. `layers` ordered by increasing
/// subsampling and `weights[i]` belongs to `layers[i]`. Result runs coarsest
/// to finest. With lnorm disabled the modulating map is used unnormalized.
std::vector<SaliencyMap> polycam_from_weights(const ActivationStack& acts, std::span<const WeightVector> weights,
                                              std::span<const std::string> layers, bool lnorm_enabled);

/// Taps `x`, scores every channel of every listed layer, and runs the recursion.
/// An empty `layers` means every tap of the model.
std::vector<SaliencyMap> polycam(const Model& model, const ImageTensor& x, std::size_t cls, WeightKind kind,
                                 std::vector<std::string> layers = {}, bool lnorm_enabled = true,
                                 const WeightOptions& options = {});

/// Single-layer CAM computed from scratch. With kind=CIC at the last tap this is Score-CAM.
SaliencyMap isolated_cam(const Model& model, const ImageTensor& x, std::size_t cls, WeightKind kind,
                         const std::string& layer, const WeightOptions& options = {});

SaliencyMap score_cam(const Model& model, const ImageTensor& x, std::size_t cls, const WeightOptions& options = {});

struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Sliding-patch occlusion. Each pixel receives the mean score drop over all
/// patch positions covering it, clamped at 0 after aggregation. Pixels not
/// covered by any position get 0.
SaliencyMap occlusion_map(const Model& model, const ImageTensor& x, std::size_t cls, Extent patch, Extent stride,
                          const ImageTensor& baseline);

struct RiseOptions {
  std::size_t n_masks = 6000;
  std::size_t grid = 7;
  double p = 0.5;
  uint64_t seed = 0;
};

/// The i-th random mask of a RISE run: a grid x grid Bernoulli(p) field,
/// bilinearly upsampled to (grid+1) cells and cropped at a random sub-cell shift.
Plane rise_mask(const Geometry& input, const RiseOptions& options, std::size_t index);

/// sum_i f_c(x ⊙ M_i) M_i / (count * p) for masks produced by `mask`.
Plane rise_aggregate(const Model& model, const ImageTensor& x, std::size_t cls, std::size_t count,
                     const std::function<Plane(std::size_t)>& mask, double p);

SaliencyMap rise_map(const Model& model, const ImageTensor& x, std::size_t cls, const RiseOptions& options = {});

}  // namespace polycam
