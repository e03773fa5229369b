// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "polycam/model.hpp"
#include "polycam/plane.hpp"

namespace polycam {

inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

/// 8-bit RGB image, interleaved HWC.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<uint8_t> pixels;

  uint8_t& at(std::size_t row, std::size_t col, std::size_t c) { return pixels[(row * width + col) * 3 + c]; }
  uint8_t at(std::size_t row, std::size_t col, std::size_t c) const { return pixels[(row * width + col) * 3 + c]; }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Throws InputError when the file cannot be decoded.
RgbImage read_rgb(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

RgbImage resize_rgb(const RgbImage& image, std::size_t height, std::size_t width);

/// Bilinear resize (skipped at matching size), scale to [0, 1], then
/// per-channel (v - mean) / std with the ImageNet constants.
ImageTensor normalize_image(const RgbImage& image, const Geometry& target);

ImageTensor preprocess_image(const std::filesystem::path& path, const Geometry& target);

enum class OverlayMode {
  /// Alpha blend of the colour-mapped saliency over the image.
  Heatmap,
  /// Image multiplied by the saliency map.
  Mask,
};

/// `map` must be at image size with values in [0, 1] (values are clamped).
RgbImage render_overlay(const RgbImage& image, const Plane& map, double alpha, OverlayMode mode = OverlayMode::Heatmap);

/// Colour of the heatmap palette for a value in [0, 1].
std::array<uint8_t, 3> colormap(float value);

}  // namespace polycam
