// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "polycam/parallel.hpp"

namespace polycam {

ImageTensor::ImageTensor(Geometry geometry, float fill)
    : geometry_(geometry), values_(geometry.channels * geometry.height * geometry.width, fill) {
  if (geometry.channels == 0 || geometry.height == 0 || geometry.width == 0) {
    throw std::invalid_argument("ImageTensor dimensions must be positive");
  }
}

ImageTensor::ImageTensor(Geometry geometry, std::vector<float> values)
    : geometry_(geometry), values_(std::move(values)) {
  if (geometry.channels == 0 || geometry.height == 0 || geometry.width == 0) {
    throw std::invalid_argument("ImageTensor dimensions must be positive");
  }
  if (values_.size() != geometry.channels * geometry.height * geometry.width) {
    throw std::invalid_argument("ImageTensor value count does not match geometry");
  }
}

Plane ImageTensor::channel(std::size_t c) const {
  const std::size_t n = geometry_.pixels();
  return Plane(geometry_.height, geometry_.width,
               std::vector<float>(values_.begin() + static_cast<std::ptrdiff_t>(c * n),
                                  values_.begin() + static_cast<std::ptrdiff_t>((c + 1) * n)));
}

ImageTensor ImageTensor::masked(const Plane& mask) const {
  if (mask.height() != geometry_.height || mask.width() != geometry_.width) {
    throw std::invalid_argument("mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                                " does not match image " + std::to_string(geometry_.height) + "x" +
                                std::to_string(geometry_.width));
  }
  ImageTensor out(geometry_);
  const std::size_t n = geometry_.pixels();
  auto m = mask.values();
  for (std::size_t c = 0; c < geometry_.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) out.values_[c * n + i] = values_[c * n + i] * m[i];
  }
  return out;
}

const TapLayer& ModelInfo::tap(const std::string& name) const {
  for (const auto& t : taps) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("unknown tap layer '" + name + "'");
}

void ActivationStack::add(const std::string& name, LayerActivations layer) {
  if (!layers_.contains(name)) order_.push_back(name);
  layers_.insert_or_assign(name, std::move(layer));
}

const LayerActivations& ActivationStack::layer(const std::string& name) const {
  auto it = layers_.find(name);
  if (it == layers_.end()) throw std::invalid_argument("layer '" + name + "' not in activation stack");
  return it->second;
}

void Model::check_input(const ImageTensor& x) const {
  const Geometry& want = info().input;
  if (!(x.geometry() == want)) {
    throw std::invalid_argument("input geometry " + std::to_string(x.geometry().channels) + "x" +
                                std::to_string(x.geometry().height) + "x" + std::to_string(x.geometry().width) +
                                " does not match model " + std::to_string(want.channels) + "x" +
                                std::to_string(want.height) + "x" + std::to_string(want.width));
  }
}

std::vector<float> score_generated(const Model& model, std::size_t count, std::size_t cls,
                                   const std::function<ImageTensor(std::size_t)>& make) {
  if (cls >= model.info().classes) throw std::invalid_argument("class index out of range");
  std::vector<float> scores(count);
  const std::size_t batch = std::max<std::size_t>(1, model.batch_size());
  const std::size_t batches = (count + batch - 1) / batch;
  parallel_for(batches, [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(count, begin + batch);
    std::vector<ImageTensor> images;
    images.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) images.push_back(make(i));
    const auto probs = model.predict_batch(images);
    for (std::size_t i = begin; i < end; ++i) scores[i] = probs[i - begin][cls];
  });
  return scores;
}

std::vector<float> class_scores(const Model& model, std::span<const ImageTensor> images, std::size_t cls) {
  return score_generated(model, images.size(), cls, [&](std::size_t i) { return images[i]; });
}

float class_score(const Model& model, const ImageTensor& x, std::size_t cls) {
  if (cls >= model.info().classes) throw std::invalid_argument("class index out of range");
  return model.predict_batch(std::span(&x, 1)).front()[cls];
}

std::size_t argmax(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  return static_cast<std::size_t>(std::ranges::max_element(values) - values.begin());
}

}  // namespace polycam
