// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace polycam {

/// Dense 2D grid of floats in row-major order. Activation channels, masks and
/// saliency maps all share this carrier. Dimensions are always positive.
class Plane {
 public:
  Plane(std::size_t height, std::size_t width, float fill = 0.0f);
  Plane(std::size_t height, std::size_t width, std::vector<float> values);

  static Plane from_rows(std::initializer_list<std::initializer_list<float>> rows);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  float operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  float& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool same_shape(const Plane& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<float> values_;
};

}  // namespace polycam
