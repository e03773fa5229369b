// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "polycam/model.hpp"
#include "polycam/plane.hpp"

namespace polycam {

/// Channel scoring rule.
///  - CIC: increase of confidence when only the channel's support is shown.
///  - CDC: decrease of confidence when the channel's support is hidden.
///  - CVC: the two combined.
enum class WeightKind { CIC, CDC, CVC };

std::string to_string(WeightKind kind);
/// Accepts "cic"/"cdc"/"cvc" and the "+", "-", "pm" shorthands.
WeightKind parse_weight_kind(const std::string& text);

enum class MaskPolarity { Positive, Negative };

struct WeightVector {
  std::string layer;
  std::size_t cls = 0;
  WeightKind kind = WeightKind::CVC;
  std::vector<float> weights;
};

struct WeightOptions {
  /// Keep only the K channels with the largest spatial maximum; the rest get
  /// weight 0 without a forward pass. Unset means every channel.
  std::optional<std::size_t> top_k;
};

/// unit_normalize(upsample_bilinear(a, s)) for Positive; one minus that for Negative.
Plane build_mask(const Plane& a, std::size_t s, MaskPolarity polarity);

/// True when every entry of the channel equals the first one.
bool is_degenerate(const Plane& a);

/// Per-channel weights for `layer` and class `cls`. f_c of the baseline image is
/// taken to be 0, so CIC needs no baseline pass. Constant channels get weight 0.
WeightVector channel_weights(const Model& model, const ImageTensor& x, const ActivationStack& acts,
                             const std::string& layer, std::size_t cls, WeightKind kind,
                             const WeightOptions& options = {});

}  // namespace polycam
