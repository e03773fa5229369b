// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "polycam/plane.hpp"

namespace polycam {

/// Bilinear upsampling by an integer factor with half-pixel-center alignment:
/// output pixel i samples source coordinate (i + 0.5) / s - 0.5, clamped to
/// the border. Throws std::invalid_argument when s == 0.
Plane upsample_bilinear(const Plane& m, std::size_t s);

/// Half-pixel-center bilinear resampling to an arbitrary size.
Plane resize_bilinear(const Plane& m, std::size_t height, std::size_t width);

/// Mean over non-overlapping s x s blocks. Both dimensions must be divisible by s.
Plane downsample_avg(const Plane& m, std::size_t s);

/// Affine map of the value range onto [0, 1]; a constant plane maps to zeros.
Plane unit_normalize(const Plane& m);

/// Local normalisation: m divided by the bilinearly upsampled block means.
/// Divisor entries below 1e-12 in magnitude produce 0.
Plane lnorm(const Plane& m, std::size_t s);

/// ReLU(sum_k weights[k] * channels[k]).
Plane weighted_relu_sum(std::span<const Plane> channels, std::span<const float> weights);

/// Entrywise product.
Plane hadamard(const Plane& a, const Plane& b);

float max_value(const Plane& m);
float min_value(const Plane& m);

}  // namespace polycam
