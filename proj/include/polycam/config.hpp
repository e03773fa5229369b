// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polycam/channel_weights.hpp"
#include "polycam/faithfulness.hpp"
#include "polycam/robustness.hpp"
#include "polycam/saliency.hpp"

namespace polycam {

enum class Method { PcamPlus, PcamMinus, PcamPm, Cam, ScoreCam, Occlusion, Rise };

/// Accepts "pcam+", "pcam-", "pcam±", "pcam+-", the slugs returned by
/// method_slug, and "cam", "scorecam", "occlusion", "rise".
Method parse_method(const std::string& text);
/// File-name-safe identifier, e.g. "pcam_pm".
std::string method_slug(Method method);
bool is_polycam(Method method);
/// Weight kind implied by a Poly-CAM variant.
WeightKind implied_weight_kind(Method method);

struct RunConfig {
  std::string model_path;
  /// Tap subset, earliest first. Empty selects every tap.
  std::vector<std::string> layers;
  Method method = Method::PcamPm;
  /// Unset selects the predicted top-1 class.
  std::optional<std::size_t> class_index;
  /// Only meaningful for Method::Cam and Poly-CAM variants (where it must agree).
  std::optional<WeightKind> weight_kind;
  /// Layer for Method::Cam; empty means the last tap.
  std::string cam_layer;
  bool lnorm = true;
  CurveSchedule schedule{224, 224};
  BlurOptions blur{11, 5.0};
  Extent occlusion_patch{64, 64};
  Extent occlusion_stride{8, 8};
  std::size_t rise_masks = 6000;
  std::size_t rise_grid = 7;
  double rise_p = 0.5;
  std::size_t batch_size = 32;
  std::optional<std::size_t> top_k;
  uint64_t seed = 0;
  std::size_t sensitivity_perturbations = 10;
  double sensitivity_radius = 0.02;
  double sanity_threshold = 0.5;
  double overlay_alpha = 0.5;
  std::string output_dir = "polycam_out";
  std::string resize_filter = "bilinear";

  /// Throws std::invalid_argument on contradictory or out-of-range settings.
  void validate() const;
  WeightKind resolved_weight_kind() const;
  RiseOptions rise() const;
  SensitivityOptions sensitivity() const;
};

/// The configured schedule when it covers the image exactly; the untouched
/// default (224 steps of 224 pixels) otherwise adapts to one row per step.
CurveSchedule resolve_schedule(const RunConfig& config, const Geometry& input);

std::string config_to_json(const RunConfig& config);
/// Keys absent from the document keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);

}  // namespace polycam
