// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polycam/plane.hpp"

namespace polycam {

struct Geometry {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return height * width; }
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Network input in CHW order, already normalized.
class ImageTensor {
 public:
  ImageTensor(Geometry geometry, float fill = 0.0f);
  ImageTensor(Geometry geometry, std::vector<float> values);

  const Geometry& geometry() const { return geometry_; }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  float at(std::size_t channel, std::size_t row, std::size_t col) const {
    return values_[(channel * geometry_.height + row) * geometry_.width + col];
  }
  float& at(std::size_t channel, std::size_t row, std::size_t col) {
    return values_[(channel * geometry_.height + row) * geometry_.width + col];
  }

  Plane channel(std::size_t c) const;

  /// x ⊙ mask with the mask broadcast over colour channels.
  ImageTensor masked(const Plane& mask) const;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  Geometry geometry_;
  std::vector<float> values_;
};

struct TapLayer {
  std::string name;
  std::size_t subsampling = 1;
};

struct ModelInfo {
  std::string id;
  Geometry input;
  std::size_t classes = 0;
  /// Ordered from earliest (smallest subsampling) to latest.
  std::vector<TapLayer> taps;

  const TapLayer& tap(const std::string& name) const;
};

struct LayerActivations {
  std::size_t subsampling = 1;
  std::vector<Plane> channels;
};

/// Raw activations of every tapped layer from one forward pass.
class ActivationStack {
 public:
  void add(const std::string& name, LayerActivations layer);

  bool contains(const std::string& name) const { return layers_.contains(name); }
  const LayerActivations& layer(const std::string& name) const;
  /// Layer names in insertion order (earliest first for backend stacks).
  const std::vector<std::string>& names() const { return order_; }

 private:
  std::map<std::string, LayerActivations> layers_;
  std::vector<std::string> order_;
};

using Probabilities = std::vector<float>;

struct TapResult {
  Probabilities probabilities;
  ActivationStack activations;
};

/// Classifier interface consumed by every explanation and metric. Implementations
/// must allow concurrent const calls.
class Model {
 public:
  virtual ~Model() = default;

  virtual const ModelInfo& info() const = 0;

  /// One probability vector per image.
  virtual std::vector<Probabilities> predict_batch(std::span<const ImageTensor> batch) const = 0;

  /// Prediction plus tapped activations from a single forward pass.
  virtual TapResult tap_activations(const ImageTensor& x) const = 0;

  /// Preferred number of images per predict_batch call.
  virtual std::size_t batch_size() const { return 32; }

  void check_input(const ImageTensor& x) const;
};

/// Scores f_c for `count` images produced lazily by `make`. Only one batch of
/// images is alive per worker at any time; results come back in index order.
std::vector<float> score_generated(const Model& model, std::size_t count, std::size_t cls,
                                   const std::function<ImageTensor(std::size_t)>& make);

std::vector<float> class_scores(const Model& model, std::span<const ImageTensor> images, std::size_t cls);

float class_score(const Model& model, const ImageTensor& x, std::size_t cls);

std::size_t argmax(std::span<const float> values);

}  // namespace polycam
