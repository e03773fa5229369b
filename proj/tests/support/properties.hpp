// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized operator properties, shared by the unit tests and the
// acceptance runner.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "polycam/tensor_ops.hpp"

namespace polycam::testing {

struct PropertyOutcome {
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::string first_failure;
};

using PropertyReport = std::map<std::string, PropertyOutcome>;

inline bool close_to(double got, double want, double tol = 1e-6) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

struct RandomPlane {
  Plane plane;
  std::size_t s;
  std::string kind;
};

/// Dimensions are multiples of s. Every tenth plane is an extreme case.
inline RandomPlane random_plane(std::mt19937_64& rng, std::size_t index) {
  std::uniform_int_distribution<std::size_t> factor(1, 4);
  std::uniform_int_distribution<std::size_t> blocks(1, 6);
  const std::size_t s = factor(rng);
  const std::size_t h = s * blocks(rng);
  const std::size_t w = s * blocks(rng);
  Plane p(h, w);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::string kind;
  switch (index % 10) {
    case 0:
      kind = "zero";
      break;
    case 1: {
      kind = "single-entry";
      std::uniform_int_distribution<std::size_t> pos(0, p.size() - 1);
      const double magnitudes[] = {1e-30, 1e-6, 1.0, 1e6, 1e30};
      p.values()[pos(rng)] = static_cast<float>(magnitudes[index / 10 % 5]);
      break;
    }
    case 2:
      kind = "sparse";
      for (float& v : p.values()) v = unit(rng) < 0.2 ? static_cast<float>(unit(rng) * 10.0) : 0.0f;
      break;
    case 3:
      kind = "wide-range";
      for (float& v : p.values()) v = static_cast<float>(std::pow(10.0, unit(rng) * 12.0 - 6.0));
      break;
    default:
      kind = "uniform";
      for (float& v : p.values()) v = static_cast<float>(unit(rng) * 4.0);
      break;
  }
  return {std::move(p), s, kind};
}

inline bool all_finite(const Plane& p) {
  for (float v : p.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline PropertyReport run_operator_properties(std::size_t count, uint64_t seed) {
  PropertyReport report;
  auto record = [&](const std::string& name, bool ok, const std::string& detail) {
    auto& o = report[name];
    ++o.checked;
    if (!ok) {
      if (o.failed == 0) o.first_failure = detail;
      ++o.failed;
    }
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t n = 0; n < count; ++n) {
    const auto [m, s, kind] = random_plane(rng, n);
    const std::string where = "plane " + std::to_string(n) + " (" + kind + ", " + std::to_string(m.height()) + "x" +
                              std::to_string(m.width()) + ", s=" + std::to_string(s) + ")";

    // Scale invariance.
    const double alpha = std::pow(10.0, unit(rng) * 4.0 - 2.0);
    Plane scaled = m;
    for (float& v : scaled.values()) v = static_cast<float>(v * alpha);
    const Plane ln = lnorm(m, s);
    const Plane ln_scaled = lnorm(scaled, s);
    bool ok = true;
    for (std::size_t k = 0; k < ln.size() && ok; ++k) ok = close_to(ln_scaled.values()[k], ln.values()[k]);
    record("lnorm scale invariance", ok, where);

    // Constant plane maps to ones.
    const float c = static_cast<float>(0.01 + unit(rng) * 100.0);
    const Plane constant(m.height(), m.width(), c);
    const Plane ones = lnorm(constant, s);
    ok = true;
    for (float v : ones.values()) ok = ok && close_to(v, 1.0);
    record("lnorm constant to ones", ok, where);

    // Block-mean recovery: rescale every block of a positive plane to mean c.
    Plane blocky(m.height(), m.width());
    for (float& v : blocky.values()) v = static_cast<float>(0.1 + unit(rng));
    for (std::size_t bi = 0; bi < m.height() / s; ++bi) {
      for (std::size_t bj = 0; bj < m.width() / s; ++bj) {
        double sum = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
          for (std::size_t j = 0; j < s; ++j) sum += blocky(bi * s + i, bj * s + j);
        }
        const double scale = c * static_cast<double>(s * s) / sum;
        for (std::size_t i = 0; i < s; ++i) {
          for (std::size_t j = 0; j < s; ++j) {
            blocky(bi * s + i, bj * s + j) = static_cast<float>(blocky(bi * s + i, bj * s + j) * scale);
          }
        }
      }
    }
    const Plane rec = lnorm(blocky, s);
    ok = true;
    for (std::size_t k = 0; k < rec.size() && ok; ++k) ok = close_to(rec.values()[k], blocky.values()[k] / c);
    record("lnorm block-mean recovery", ok, where);

    // Upsample then average-pool a constant.
    const Plane small(m.height() / s, m.width() / s, c);
    const Plane round_trip = downsample_avg(upsample_bilinear(small, s), s);
    ok = true;
    for (float v : round_trip.values()) ok = ok && close_to(v, c);
    record("upsample-downsample constant identity", ok, where);

    // Unit-normalize bounds.
    const Plane u = unit_normalize(m);
    const float lo = min_value(m);
    const float hi = max_value(m);
    ok = true;
    for (float v : u.values()) ok = ok && v >= 0.0f && v <= 1.0f;
    if (hi > lo) {
      for (std::size_t k = 0; k < m.size(); ++k) {
        if (m.values()[k] == lo) ok = ok && u.values()[k] == 0.0f;
        if (m.values()[k] == hi) ok = ok && u.values()[k] == 1.0f;
      }
    } else {
      for (float v : u.values()) ok = ok && v == 0.0f;
    }
    record("unit-normalize bounds", ok, where);

    // Bilinear parity with the tent-kernel oracle.
    const Plane up = upsample_bilinear(m, s);
    const oracle::Grid ref = oracle::bilinear(oracle::Grid(m), s);
    ok = up.height() == ref.h && up.width() == ref.w;
    for (std::size_t k = 0; ok && k < ref.v.size(); ++k) ok = close_to(up.values()[k], ref.v[k]);
    record("bilinear oracle parity", ok, where);

    // Positive homogeneity of the weighted ReLU sum.
    std::vector<Plane> channels{m, ln, u};
    std::vector<float> weights{static_cast<float>(unit(rng) * 2.0 - 1.0), static_cast<float>(unit(rng) * 2.0 - 1.0),
                               static_cast<float>(unit(rng) * 2.0 - 1.0)};
    std::vector<float> doubled;
    for (float w : weights) doubled.push_back(2.0f * w);
    const Plane once = weighted_relu_sum(channels, weights);
    const Plane twice = weighted_relu_sum(channels, doubled);
    ok = true;
    for (std::size_t k = 0; k < once.size() && ok; ++k) ok = close_to(twice.values()[k], 2.0 * once.values()[k]);
    record("weighted-relu-sum homogeneity", ok, where);
    ok = true;
    for (float v : once.values()) ok = ok && v >= 0.0f;
    record("weighted-relu-sum nonnegative", ok, where);

    // Nothing non-finite escapes.
    ok = all_finite(ln) && all_finite(ln_scaled) && all_finite(ones) && all_finite(u) && all_finite(up) &&
         all_finite(once) && all_finite(twice) && all_finite(downsample_avg(m, s)) &&
         all_finite(hadamard(m, u));
    record("finite outputs", ok, where);
  }
  return report;
}

}  // namespace polycam::testing
