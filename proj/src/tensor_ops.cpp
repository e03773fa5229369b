// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace polycam {

namespace {

constexpr double kDivisorEpsilon = 1e-12;

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Source taps for every output index along one axis.
std::vector<Tap> half_pixel_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

void require_divisible(const Plane& m, std::size_t s, const char* op) {
  if (s == 0) throw std::invalid_argument(std::string(op) + ": factor must be positive");
  if (m.height() % s != 0 || m.width() % s != 0) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(m.height()) + "x" +
                                std::to_string(m.width()) + " is not divisible by " + std::to_string(s));
  }
}

}  // namespace

Plane resize_bilinear(const Plane& m, std::size_t height, std::size_t width) {
  if (height == m.height() && width == m.width()) return m;
  const auto rows = half_pixel_taps(m.height(), height);
  const auto cols = half_pixel_taps(m.width(), width);
  Plane out(height, width);
  for (std::size_t i = 0; i < height; ++i) {
    const Tap& r = rows[i];
    for (std::size_t j = 0; j < width; ++j) {
      const Tap& c = cols[j];
      const double top = (1.0 - c.frac) * m(r.lo, c.lo) + c.frac * m(r.lo, c.hi);
      const double bottom = (1.0 - c.frac) * m(r.hi, c.lo) + c.frac * m(r.hi, c.hi);
      out(i, j) = static_cast<float>((1.0 - r.frac) * top + r.frac * bottom);
    }
  }
  return out;
}

Plane upsample_bilinear(const Plane& m, std::size_t s) {
  if (s == 0) throw std::invalid_argument("upsample_bilinear: factor must be positive");
  if (s == 1) return m;
  return resize_bilinear(m, m.height() * s, m.width() * s);
}

Plane downsample_avg(const Plane& m, std::size_t s) {
  require_divisible(m, s, "downsample_avg");
  if (s == 1) return m;
  const std::size_t h = m.height() / s;
  const std::size_t w = m.width() / s;
  const double area = static_cast<double>(s * s);
  Plane out(h, w);
  for (std::size_t bi = 0; bi < h; ++bi) {
    for (std::size_t bj = 0; bj < w; ++bj) {
      double sum = 0.0;
      for (std::size_t i = bi * s; i < (bi + 1) * s; ++i) {
        for (std::size_t j = bj * s; j < (bj + 1) * s; ++j) sum += m(i, j);
      }
      out(bi, bj) = static_cast<float>(sum / area);
    }
  }
  return out;
}

float max_value(const Plane& m) { return *std::ranges::max_element(m.values()); }

float min_value(const Plane& m) { return *std::ranges::min_element(m.values()); }

Plane unit_normalize(const Plane& m) {
  const auto [lo_it, hi_it] = std::ranges::minmax_element(m.values());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  Plane out(m.height(), m.width());
  if (!(range > 0.0)) return out;
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::clamp((src[i] - lo) / range, 0.0, 1.0));
  }
  return out;
}

Plane lnorm(const Plane& m, std::size_t s) {
  require_divisible(m, s, "lnorm");
  const Plane divisor = upsample_bilinear(downsample_avg(m, s), s);
  Plane out(m.height(), m.width());
  auto src = m.values();
  auto div = divisor.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double d = div[i];
    dst[i] = std::abs(d) < kDivisorEpsilon ? 0.0f : static_cast<float>(src[i] / d);
  }
  return out;
}

Plane weighted_relu_sum(std::span<const Plane> channels, std::span<const float> weights) {
  if (channels.empty()) throw std::invalid_argument("weighted_relu_sum: no channels");
  if (channels.size() != weights.size()) {
    throw std::invalid_argument("weighted_relu_sum: " + std::to_string(channels.size()) + " channels but " +
                                std::to_string(weights.size()) + " weights");
  }
  const Plane& first = channels.front();
  for (const Plane& c : channels) {
    if (!c.same_shape(first)) throw std::invalid_argument("weighted_relu_sum: channel dimensions differ");
  }
  std::vector<double> acc(first.size(), 0.0);
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    auto v = channels[k].values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
  Plane out(first.height(), first.width());
  auto dst = out.values();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = acc[i] > 0.0 ? static_cast<float>(acc[i]) : 0.0f;
  return out;
}

Plane hadamard(const Plane& a, const Plane& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("hadamard: dimensions differ");
  Plane out(a.height(), a.width());
  auto x = a.values();
  auto y = b.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = x[i] * y[i];
  return out;
}

}  // namespace polycam
