// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/config.hpp"

#include <set>
#include <stdexcept>

#include "json.hpp"

namespace polycam {

using nlohmann::ordered_json;

Method parse_method(const std::string& text) {
  if (text == "pcam+" || text == "pcam_plus" || text == "pcamp") return Method::PcamPlus;
  if (text == "pcam-" || text == "pcam_minus" || text == "pcamm") return Method::PcamMinus;
  if (text == "pcam±" || text == "pcam+-" || text == "pcam_pm" || text == "pcampm") return Method::PcamPm;
  if (text == "cam") return Method::Cam;
  if (text == "scorecam") return Method::ScoreCam;
  if (text == "occlusion") return Method::Occlusion;
  if (text == "rise") return Method::Rise;
  throw std::invalid_argument("unknown method '" + text + "'");
}

std::string method_slug(Method method) {
  switch (method) {
    case Method::PcamPlus:
      return "pcam_plus";
    case Method::PcamMinus:
      return "pcam_minus";
    case Method::PcamPm:
      return "pcam_pm";
    case Method::Cam:
      return "cam";
    case Method::ScoreCam:
      return "scorecam";
    case Method::Occlusion:
      return "occlusion";
    case Method::Rise:
      return "rise";
  }
  return "unknown";
}

bool is_polycam(Method method) {
  return method == Method::PcamPlus || method == Method::PcamMinus || method == Method::PcamPm;
}

WeightKind implied_weight_kind(Method method) {
  switch (method) {
    case Method::PcamPlus:
    case Method::ScoreCam:
      return WeightKind::CIC;
    case Method::PcamMinus:
      return WeightKind::CDC;
    default:
      return WeightKind::CVC;
  }
}

void RunConfig::validate() const {
  if (weight_kind) {
    if (method == Method::Occlusion || method == Method::Rise || method == Method::ScoreCam) {
      throw std::invalid_argument("--weight-kind does not apply to method " + method_slug(method));
    }
    if (is_polycam(method) && *weight_kind != implied_weight_kind(method)) {
      throw std::invalid_argument("--weight-kind " + to_string(*weight_kind) + " contradicts method " +
                                  method_slug(method));
    }
  }
  if (!lnorm && !is_polycam(method)) throw std::invalid_argument("--no-lnorm only applies to Poly-CAM methods");
  if (!cam_layer.empty() && method != Method::Cam) throw std::invalid_argument("--cam-layer requires --method cam");
  if (schedule.steps == 0 || schedule.pixels_per_step == 0) throw std::invalid_argument("metric schedule must be positive");
  if (blur.kernel % 2 == 0) throw std::invalid_argument("blur kernel must be odd");
  if (!(blur.sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
  if (occlusion_patch.height < occlusion_stride.height || occlusion_patch.width < occlusion_stride.width ||
      occlusion_stride.height == 0 || occlusion_stride.width == 0) {
    throw std::invalid_argument("occlusion patch must be at least the (positive) stride");
  }
  if (rise_masks == 0 || rise_grid == 0) throw std::invalid_argument("RISE masks and grid must be positive");
  if (!(rise_p > 0.0 && rise_p < 1.0)) throw std::invalid_argument("RISE p must lie in (0, 1)");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (top_k && *top_k == 0) throw std::invalid_argument("top-k must be positive");
  if (sensitivity_perturbations == 0 || !(sensitivity_radius > 0.0)) {
    throw std::invalid_argument("sensitivity needs at least one perturbation and a positive radius");
  }
  if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0)) throw std::invalid_argument("overlay alpha must lie in [0, 1]");
  if (resize_filter != "bilinear") throw std::invalid_argument("only the bilinear resize filter is supported");
}

WeightKind RunConfig::resolved_weight_kind() const {
  if (method == Method::Cam) return weight_kind.value_or(WeightKind::CVC);
  return implied_weight_kind(method);
}

RiseOptions RunConfig::rise() const { return {rise_masks, rise_grid, rise_p, seed}; }

SensitivityOptions RunConfig::sensitivity() const { return {sensitivity_perturbations, sensitivity_radius, seed}; }

CurveSchedule resolve_schedule(const RunConfig& config, const Geometry& input) {
  const CurveSchedule& s = config.schedule;
  if (s.steps * s.pixels_per_step == input.pixels()) return s;
  if (s.steps == 224 && s.pixels_per_step == 224) return {input.height, input.width};
  throw std::invalid_argument("metric schedule of " + std::to_string(s.steps) + " x " +
                              std::to_string(s.pixels_per_step) + " pixels does not cover the " +
                              std::to_string(input.height) + "x" + std::to_string(input.width) + " input");
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  j["model"] = c.model_path;
  j["layers"] = c.layers;
  j["method"] = method_slug(c.method);
  j["class"] = c.class_index ? ordered_json(*c.class_index) : ordered_json("predicted-top1");
  j["weight_kind"] = to_string(c.resolved_weight_kind());
  j["cam_layer"] = c.cam_layer;
  j["lnorm"] = c.lnorm;
  j["steps"] = c.schedule.steps;
  j["pixels_per_step"] = c.schedule.pixels_per_step;
  j["blur_kernel"] = c.blur.kernel;
  j["blur_sigma"] = c.blur.sigma;
  j["occlusion_patch"] = {c.occlusion_patch.height, c.occlusion_patch.width};
  j["occlusion_stride"] = {c.occlusion_stride.height, c.occlusion_stride.width};
  j["rise_masks"] = c.rise_masks;
  j["rise_grid"] = c.rise_grid;
  j["rise_p"] = c.rise_p;
  j["batch_size"] = c.batch_size;
  j["top_k"] = c.top_k ? ordered_json(*c.top_k) : ordered_json("all");
  j["seed"] = c.seed;
  j["sensitivity_perturbations"] = c.sensitivity_perturbations;
  j["sensitivity_radius"] = c.sensitivity_radius;
  j["sanity_threshold"] = c.sanity_threshold;
  j["overlay_alpha"] = c.overlay_alpha;
  j["output_dir"] = c.output_dir;
  j["resize_filter"] = c.resize_filter;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
      "model", "layers", "method", "class", "weight_kind", "cam_layer", "lnorm", "steps", "pixels_per_step",
      "blur_kernel", "blur_sigma", "occlusion_patch", "occlusion_stride", "rise_masks", "rise_grid", "rise_p",
      "batch_size", "top_k", "seed", "sensitivity_perturbations", "sensitivity_radius", "sanity_threshold",
      "overlay_alpha", "output_dir", "resize_filter"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    if (j.contains("model")) c.model_path = j["model"].get<std::string>();
    if (j.contains("layers")) c.layers = j["layers"].get<std::vector<std::string>>();
    if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
    if (j.contains("class") && j["class"].is_number_unsigned()) c.class_index = j["class"].get<std::size_t>();
    if (j.contains("weight_kind")) {
      const WeightKind k = parse_weight_kind(j["weight_kind"].get<std::string>());
      // The echo always records the resolved kind; only a kind that differs
      // from the method's implied one is an explicit choice.
      if (c.method == Method::Cam || k != implied_weight_kind(c.method)) c.weight_kind = k;
    }
    if (j.contains("cam_layer")) c.cam_layer = j["cam_layer"].get<std::string>();
    if (j.contains("lnorm")) c.lnorm = j["lnorm"].get<bool>();
    if (j.contains("steps")) c.schedule.steps = j["steps"].get<std::size_t>();
    if (j.contains("pixels_per_step")) c.schedule.pixels_per_step = j["pixels_per_step"].get<std::size_t>();
    if (j.contains("blur_kernel")) c.blur.kernel = j["blur_kernel"].get<std::size_t>();
    if (j.contains("blur_sigma")) c.blur.sigma = j["blur_sigma"].get<double>();
    if (j.contains("occlusion_patch")) {
      const auto v = j["occlusion_patch"].get<std::vector<std::size_t>>();
      if (v.size() != 2) throw std::invalid_argument("occlusion_patch must have two entries");
      c.occlusion_patch = {v[0], v[1]};
    }
    if (j.contains("occlusion_stride")) {
      const auto v = j["occlusion_stride"].get<std::vector<std::size_t>>();
      if (v.size() != 2) throw std::invalid_argument("occlusion_stride must have two entries");
      c.occlusion_stride = {v[0], v[1]};
    }
    if (j.contains("rise_masks")) c.rise_masks = j["rise_masks"].get<std::size_t>();
    if (j.contains("rise_grid")) c.rise_grid = j["rise_grid"].get<std::size_t>();
    if (j.contains("rise_p")) c.rise_p = j["rise_p"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("top_k") && j["top_k"].is_number_unsigned()) c.top_k = j["top_k"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("sensitivity_perturbations")) {
      c.sensitivity_perturbations = j["sensitivity_perturbations"].get<std::size_t>();
    }
    if (j.contains("sensitivity_radius")) c.sensitivity_radius = j["sensitivity_radius"].get<double>();
    if (j.contains("sanity_threshold")) c.sanity_threshold = j["sanity_threshold"].get<double>();
    if (j.contains("overlay_alpha")) c.overlay_alpha = j["overlay_alpha"].get<double>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("resize_filter")) c.resize_filter = j["resize_filter"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config has a wrongly typed value: ") + e.what());
  }
  return c;
}

}  // namespace polycam
