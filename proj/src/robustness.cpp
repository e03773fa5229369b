// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polycam/errors.hpp"
#include "polycam/parallel.hpp"
#include "random.hpp"

namespace polycam {

std::vector<ImageTensor> linf_perturbations(const ImageTensor& x, std::size_t n, double radius, uint64_t seed) {
  if (radius < 0.0) throw std::invalid_argument("perturbation radius must be nonnegative");
  std::vector<ImageTensor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto engine = detail::stream_engine(seed, i);
    ImageTensor p = x;
    for (float& v : p.values()) v = static_cast<float>(v + (2.0 * detail::uniform01(engine) - 1.0) * radius);
    out.push_back(std::move(p));
  }
  return out;
}

double max_relative_change(const Model& model, const ImageTensor& x, std::size_t cls, const SaliencyProcedure& method,
                           std::span<const ImageTensor> perturbed) {
  const Geometry& g = x.geometry();
  const Plane reference = to_input_resolution(method(model, x, cls).plane, g);
  double ref_norm = 0.0;
  for (float v : reference.values()) ref_norm += static_cast<double>(v) * v;
  ref_norm = std::sqrt(ref_norm);
  if (ref_norm == 0.0) throw DegenerateExplanationError("sensitivity: explanation of the unperturbed input is all zero");

  std::vector<double> change(perturbed.size(), 0.0);
  parallel_for(perturbed.size(), [&](std::size_t i) {
    const Plane phi = to_input_resolution(method(model, perturbed[i], cls).plane, g);
    double d = 0.0;
    auto a = phi.values();
    auto b = reference.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double diff = static_cast<double>(a[k]) - b[k];
      d += diff * diff;
    }
    change[i] = std::sqrt(d) / ref_norm;
  });
  return change.empty() ? 0.0 : *std::ranges::max_element(change);
}

double sensitivity_max(const Model& model, const ImageTensor& x, std::size_t cls, const SaliencyProcedure& method,
                       const SensitivityOptions& options) {
  if (options.n_perturb == 0) throw std::invalid_argument("sensitivity: n_perturb must be at least 1");
  if (!(options.radius > 0.0)) throw std::invalid_argument("sensitivity: radius must be positive");
  const auto perturbed = linf_perturbations(x, options.n_perturb, options.radius, options.seed);
  return max_relative_change(model, x, cls, method, perturbed);
}

SensitivityReport make_sensitivity_report(std::string method, std::vector<double> values) {
  SensitivityReport r{std::move(method), std::move(values), 0.0};
  if (!r.sensitivities.empty()) {
    r.mean = std::accumulate(r.sensitivities.begin(), r.sensitivities.end(), 0.0) /
             static_cast<double>(r.sensitivities.size());
  }
  return r;
}

namespace {

std::vector<double> mid_ranks(std::span<const float> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Similarity spearman(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("spearman: sizes differ or empty");
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return {0.0, true};
  return {std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0), false};
}

Similarity randomization_similarity(const SaliencyMap& original, const SaliencyMap& randomized) {
  if (!original.plane.same_shape(randomized.plane)) {
    throw std::invalid_argument("randomization_similarity: map dimensions differ");
  }
  return spearman(original.plane.values(), randomized.plane.values());
}

RandomizationTrace cascade_check(std::span<const Model* const> variants, const ImageTensor& x, std::size_t cls,
                                 const SaliencyProcedure& method) {
  if (variants.empty()) throw std::invalid_argument("cascade_check: no model variants");
  const ModelInfo& first = variants.front()->info();
  for (const Model* m : variants) {
    const ModelInfo& info = m->info();
    bool same_taps = info.taps.size() == first.taps.size();
    for (std::size_t t = 0; same_taps && t < info.taps.size(); ++t) {
      same_taps = info.taps[t].name == first.taps[t].name && info.taps[t].subsampling == first.taps[t].subsampling;
    }
    if (!(info.input == first.input) || info.classes != first.classes || !same_taps) {
      throw std::invalid_argument("cascade_check: variant '" + info.id + "' differs in geometry or taps");
    }
  }
  std::vector<SaliencyMap> maps;
  maps.reserve(variants.size());
  for (const Model* m : variants) maps.push_back(method(*m, x, cls));

  RandomizationTrace trace;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const Similarity s = randomization_similarity(maps.front(), maps[i]);
    trace.stages.push_back(variants[i]->info().id);
    trace.similarity.push_back(s.rho);
    trace.degenerate.push_back(s.degenerate);
  }
  return trace;
}

}  // namespace polycam
