// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/channel_weights.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "polycam/tensor_ops.hpp"

namespace polycam {

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::CIC:
      return "cic";
    case WeightKind::CDC:
      return "cdc";
    case WeightKind::CVC:
      return "cvc";
  }
  return "unknown";
}

WeightKind parse_weight_kind(const std::string& text) {
  if (text == "cic" || text == "CIC" || text == "+") return WeightKind::CIC;
  if (text == "cdc" || text == "CDC" || text == "-") return WeightKind::CDC;
  if (text == "cvc" || text == "CVC" || text == "pm" || text == "±" || text == "+-") return WeightKind::CVC;
  throw std::invalid_argument("unknown weight kind '" + text + "'");
}

Plane build_mask(const Plane& a, std::size_t s, MaskPolarity polarity) {
  Plane mask = unit_normalize(upsample_bilinear(a, s));
  if (polarity == MaskPolarity::Negative) {
    for (float& v : mask.values()) v = 1.0f - v;
  }
  return mask;
}

bool is_degenerate(const Plane& a) {
  const float first = a.values().front();
  return std::ranges::all_of(a.values(), [first](float v) { return v == first; });
}

WeightVector channel_weights(const Model& model, const ImageTensor& x, const ActivationStack& acts,
                             const std::string& layer, std::size_t cls, WeightKind kind,
                             const WeightOptions& options) {
  if (!acts.contains(layer)) throw std::invalid_argument("channel_weights: unknown layer '" + layer + "'");
  if (cls >= model.info().classes) throw std::invalid_argument("channel_weights: class index out of range");
  model.check_input(x);
  const LayerActivations& la = acts.layer(layer);
  const std::size_t channels = la.channels.size();

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < channels; ++k) {
    if (!is_degenerate(la.channels[k])) active.push_back(k);
  }
  if (options.top_k && *options.top_k < active.size()) {
    std::vector<float> peak(channels);
    for (std::size_t k : active) peak[k] = max_value(la.channels[k]);
    std::ranges::stable_sort(active, [&](std::size_t a, std::size_t b) { return peak[a] > peak[b]; });
    active.resize(*options.top_k);
    std::ranges::sort(active);
  }

  WeightVector out{layer, cls, kind, std::vector<float>(channels, 0.0f)};
  if (active.empty()) return out;

  const bool need_shown = kind != WeightKind::CDC;
  const bool need_hidden = kind != WeightKind::CIC;
  std::vector<float> shown;
  std::vector<float> hidden;
  if (need_shown) {
    shown = score_generated(model, active.size(), cls, [&](std::size_t i) {
      return x.masked(build_mask(la.channels[active[i]], la.subsampling, MaskPolarity::Positive));
    });
  }
  if (need_hidden) {
    hidden = score_generated(model, active.size(), cls, [&](std::size_t i) {
      return x.masked(build_mask(la.channels[active[i]], la.subsampling, MaskPolarity::Negative));
    });
  }
  const double full = need_hidden ? class_score(model, x, cls) : 0.0;

  for (std::size_t i = 0; i < active.size(); ++i) {
    double w = 0.0;
    switch (kind) {
      case WeightKind::CIC:
        w = shown[i];
        break;
      case WeightKind::CDC:
        w = std::max(0.0, full - hidden[i]);
        break;
      case WeightKind::CVC:
        w = std::max(0.0, full + shown[i] - hidden[i]);
        break;
    }
    out.weights[active[i]] = static_cast<float>(w);
  }
  return out;
}

}  // namespace polycam
