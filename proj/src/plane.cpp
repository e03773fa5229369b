// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/plane.hpp"

#include <stdexcept>
#include <string>

namespace polycam {

Plane::Plane(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), values_(height * width, fill) {
  if (height == 0 || width == 0) throw std::invalid_argument("Plane dimensions must be positive");
}

Plane::Plane(std::size_t height, std::size_t width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height == 0 || width == 0) throw std::invalid_argument("Plane dimensions must be positive");
  if (values_.size() != height * width) {
    throw std::invalid_argument("Plane expects " + std::to_string(height * width) + " values, got " +
                                std::to_string(values_.size()));
  }
}

Plane Plane::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  if (rows.size() == 0) throw std::invalid_argument("Plane::from_rows needs at least one row");
  const std::size_t width = rows.begin()->size();
  std::vector<float> values;
  values.reserve(rows.size() * width);
  for (const auto& row : rows) {
    if (row.size() != width) throw std::invalid_argument("Plane::from_rows rows differ in length");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Plane(rows.size(), width, std::move(values));
}

}  // namespace polycam
