// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "graph.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "onnx.pb.h"
#include "polycam/errors.hpp"

namespace polycam::onnx_runtime {

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

int64_t Node::attr_int(const std::string& key, int64_t fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.i;
}

float Node::attr_float(const std::string& key, float fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.f;
}

std::string Node::attr_string(const std::string& key, const std::string& fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.s;
}

std::vector<int64_t> Node::attr_ints(const std::string& key, std::vector<int64_t> fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.ints;
}

namespace {

using OpFn = std::function<std::vector<Tensor>(const Node&, const std::vector<const Tensor*>&)>;

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw InferenceError(node.op_type + " node '" + node.name + "': " + what);
}

Tensor convert_tensor(const onnx::TensorProto& proto) {
  Tensor t;
  t.shape.assign(proto.dims().begin(), proto.dims().end());
  const std::size_t n = t.numel();
  switch (proto.data_type()) {
    case onnx::TensorProto::FLOAT:
      if (proto.has_raw_data()) {
        if (proto.raw_data().size() != n * sizeof(float)) throw LoadError("tensor '" + proto.name() + "' size mismatch");
        t.data.resize(n);
        std::memcpy(t.data.data(), proto.raw_data().data(), n * sizeof(float));
      } else {
        t.data.assign(proto.float_data().begin(), proto.float_data().end());
      }
      if (t.data.size() != n) throw LoadError("tensor '" + proto.name() + "' size mismatch");
      break;
    case onnx::TensorProto::INT64:
      t.is_int = true;
      if (proto.has_raw_data()) {
        if (proto.raw_data().size() != n * sizeof(int64_t)) throw LoadError("tensor '" + proto.name() + "' size mismatch");
        t.ints.resize(n);
        std::memcpy(t.ints.data(), proto.raw_data().data(), n * sizeof(int64_t));
      } else {
        t.ints.assign(proto.int64_data().begin(), proto.int64_data().end());
      }
      if (t.ints.size() != n) throw LoadError("tensor '" + proto.name() + "' size mismatch");
      break;
    default:
      throw LoadError("tensor '" + proto.name() + "' has unsupported data type " + std::to_string(proto.data_type()));
  }
  return t;
}

ValueInfo convert_value_info(const onnx::ValueInfoProto& proto) {
  ValueInfo info{proto.name(), {}};
  if (proto.type().has_tensor_type() && proto.type().tensor_type().has_shape()) {
    for (const auto& d : proto.type().tensor_type().shape().dim()) {
      info.dims.push_back(d.has_dim_value() ? d.dim_value() : -1);
    }
  }
  return info;
}

// ---------------------------------------------------------------- kernels

Tensor float_tensor(std::vector<int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 0.0f);
  return t;
}

const Tensor& require_float(const Node& node, const Tensor* t) {
  if (t == nullptr) fail(node, "missing input");
  if (t->is_int) fail(node, "expected float tensor");
  return *t;
}

struct SpatialParams {
  int64_t kh, kw, sh, sw, dh, dw, pt, pl, pb, pr;
};

SpatialParams spatial_params(const Node& node, int64_t in_h, int64_t in_w, int64_t kh, int64_t kw) {
  const auto strides = node.attr_ints("strides", {1, 1});
  const auto dilations = node.attr_ints("dilations", {1, 1});
  auto pads = node.attr_ints("pads", {0, 0, 0, 0});
  if (strides.size() != 2 || dilations.size() != 2 || pads.size() != 4) fail(node, "only 2D spatial ops are supported");
  SpatialParams p{kh, kw, strides[0], strides[1], dilations[0], dilations[1], pads[0], pads[1], pads[2], pads[3]};
  const std::string auto_pad = node.attr_string("auto_pad", "NOTSET");
  if (auto_pad == "VALID") {
    p.pt = p.pl = p.pb = p.pr = 0;
  } else if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
    auto split = [&](int64_t in, int64_t k, int64_t s, int64_t d, int64_t& lo, int64_t& hi) {
      const int64_t out = (in + s - 1) / s;
      const int64_t total = std::max<int64_t>(0, (out - 1) * s + (k - 1) * d + 1 - in);
      lo = auto_pad == "SAME_UPPER" ? total / 2 : total - total / 2;
      hi = total - lo;
    };
    split(in_h, kh, p.sh, p.dh, p.pt, p.pb);
    split(in_w, kw, p.sw, p.dw, p.pl, p.pr);
  } else if (auto_pad != "NOTSET") {
    fail(node, "unsupported auto_pad " + auto_pad);
  }
  return p;
}

int64_t pooled_extent(int64_t in, int64_t k, int64_t s, int64_t d, int64_t lo, int64_t hi, bool ceil_mode) {
  const int64_t span = in + lo + hi - d * (k - 1) - 1;
  if (span < 0) return 0;
  int64_t out = ceil_mode ? (span + s - 1) / s + 1 : span / s + 1;
  // A ceil-mode window must start inside the (left-)padded input.
  if (ceil_mode && (out - 1) * s >= in + lo) --out;
  return out;
}

std::vector<Tensor> op_conv(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& x = require_float(node, in.at(0));
  const Tensor& w = require_float(node, in.at(1));
  const Tensor* b = in.size() > 2 ? in[2] : nullptr;
  if (x.rank() != 4 || w.rank() != 4) fail(node, "expected 4D input and weight");
  const int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const int64_t m = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int64_t group = node.attr_int("group", 1);
  if (group <= 0 || c % group != 0 || m % group != 0 || w.shape[1] != c / group) fail(node, "channel/group mismatch");
  if (b != nullptr && (b->is_int || b->numel() != static_cast<std::size_t>(m))) fail(node, "bias size mismatch");
  const SpatialParams p = spatial_params(node, h, wd, kh, kw);
  const int64_t oh = pooled_extent(h, kh, p.sh, p.dh, p.pt, p.pb, false);
  const int64_t ow = pooled_extent(wd, kw, p.sw, p.dw, p.pl, p.pr, false);
  if (oh <= 0 || ow <= 0) fail(node, "empty output");
  Tensor y = float_tensor({n, m, oh, ow});

  const int64_t cg = c / group, mg = m / group;
  const int64_t patch = cg * kh * kw;
  const int64_t out_px = oh * ow;
  const bool pointwise = kh == 1 && kw == 1 && p.sh == 1 && p.sw == 1 && p.pt == 0 && p.pl == 0 && p.pb == 0 &&
                         p.pr == 0;
  std::vector<float> col(pointwise ? 0 : static_cast<std::size_t>(patch * out_px));
  for (int64_t img = 0; img < n; ++img) {
    for (int64_t g = 0; g < group; ++g) {
      const float* src = x.data.data() + (img * c + g * cg) * h * wd;
      const float* cols = src;
      if (!pointwise) {
        for (int64_t ci = 0; ci < cg; ++ci) {
          for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
              float* row = col.data() + ((ci * kh + ki) * kw + kj) * out_px;
              for (int64_t oy = 0; oy < oh; ++oy) {
                const int64_t iy = oy * p.sh - p.pt + ki * p.dh;
                for (int64_t ox = 0; ox < ow; ++ox) {
                  const int64_t ix = ox * p.sw - p.pl + kj * p.dw;
                  row[oy * ow + ox] =
                      (iy >= 0 && iy < h && ix >= 0 && ix < wd) ? src[(ci * h + iy) * wd + ix] : 0.0f;
                }
              }
            }
          }
        }
        cols = col.data();
      }
      float* dst = y.data.data() + (img * m + g * mg) * out_px;
      const float* weights = w.data.data() + g * mg * patch;
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(mg), static_cast<int>(out_px),
                  static_cast<int>(patch), 1.0f, weights, static_cast<int>(patch), cols, static_cast<int>(out_px),
                  0.0f, dst, static_cast<int>(out_px));
      if (b != nullptr) {
        for (int64_t oc = 0; oc < mg; ++oc) {
          const float bias = b->data[static_cast<std::size_t>(g * mg + oc)];
          float* plane = dst + oc * out_px;
          for (int64_t i = 0; i < out_px; ++i) plane[i] += bias;
        }
      }
    }
  }
  return {std::move(y)};
}

std::vector<Tensor> op_pool(const Node& node, const std::vector<const Tensor*>& in, bool is_max) {
  const Tensor& x = require_float(node, in.at(0));
  if (x.rank() != 4) fail(node, "expected 4D input");
  const auto kernel = node.attr_ints("kernel_shape", {});
  if (kernel.size() != 2) fail(node, "kernel_shape must be 2D");
  const int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const SpatialParams p = spatial_params(node, h, wd, kernel[0], kernel[1]);
  const bool ceil_mode = node.attr_int("ceil_mode", 0) != 0;
  const bool include_pad = node.attr_int("count_include_pad", 0) != 0;
  const int64_t oh = pooled_extent(h, p.kh, p.sh, p.dh, p.pt, p.pb, ceil_mode);
  const int64_t ow = pooled_extent(wd, p.kw, p.sw, p.dw, p.pl, p.pr, ceil_mode);
  if (oh <= 0 || ow <= 0) fail(node, "empty output");
  Tensor y = float_tensor({n, c, oh, ow});
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const float* src = x.data.data() + plane * h * wd;
    float* dst = y.data.data() + plane * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        double acc = is_max ? -std::numeric_limits<double>::infinity() : 0.0;
        int64_t count = 0;
        int64_t padded = 0;
        for (int64_t ki = 0; ki < p.kh; ++ki) {
          const int64_t iy = oy * p.sh - p.pt + ki * p.dh;
          for (int64_t kj = 0; kj < p.kw; ++kj) {
            const int64_t ix = ox * p.sw - p.pl + kj * p.dw;
            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) {
              if (iy < h + p.pb && ix < wd + p.pr) ++padded;
              continue;
            }
            const double v = src[iy * wd + ix];
            acc = is_max ? std::max(acc, v) : acc + v;
            ++count;
          }
        }
        if (!is_max) {
          const int64_t denom = include_pad ? count + padded : count;
          acc = denom > 0 ? acc / static_cast<double>(denom) : 0.0;
        } else if (count == 0) {
          acc = 0.0;
        }
        dst[oy * ow + ox] = static_cast<float>(acc);
      }
    }
  }
  return {std::move(y)};
}

std::vector<Tensor> op_global_avg_pool(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& x = require_float(node, in.at(0));
  if (x.rank() != 4) fail(node, "expected 4D input");
  const int64_t planes = x.shape[0] * x.shape[1];
  const int64_t area = x.shape[2] * x.shape[3];
  Tensor y = float_tensor({x.shape[0], x.shape[1], 1, 1});
  for (int64_t i = 0; i < planes; ++i) {
    const float* src = x.data.data() + i * area;
    double sum = 0.0;
    for (int64_t j = 0; j < area; ++j) sum += src[j];
    y.data[static_cast<std::size_t>(i)] = static_cast<float>(sum / static_cast<double>(area));
  }
  return {std::move(y)};
}

std::vector<Tensor> op_flatten(const Node& node, const std::vector<const Tensor*>& in) {
  Tensor y = *in.at(0);
  int64_t axis = node.attr_int("axis", 1);
  const auto rank = static_cast<int64_t>(y.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis > rank) fail(node, "axis out of range");
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < rank; ++i) (i < axis ? outer : inner) *= y.shape[static_cast<std::size_t>(i)];
  y.shape = {outer, inner};
  return {std::move(y)};
}

std::vector<Tensor> op_reshape(const Node& node, const std::vector<const Tensor*>& in) {
  Tensor y = *in.at(0);
  const Tensor* shape = in.at(1);
  if (shape == nullptr || !shape->is_int) fail(node, "shape must be an int64 tensor");
  std::vector<int64_t> dims = shape->ints;
  int64_t known = 1;
  int infer = -1;
  const bool allow_zero = node.attr_int("allowzero", 0) != 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0 && !allow_zero) {
      if (i >= y.shape.size()) fail(node, "zero dim out of range");
      dims[i] = y.shape[i];
    }
    if (dims[i] == -1) {
      if (infer >= 0) fail(node, "more than one inferred dim");
      infer = static_cast<int>(i);
    } else {
      known *= dims[i];
    }
  }
  const auto total = static_cast<int64_t>(y.numel());
  if (infer >= 0) {
    if (known == 0 || total % known != 0) fail(node, "cannot infer dimension");
    dims[static_cast<std::size_t>(infer)] = total / known;
  } else if (known != total) {
    fail(node, "element count mismatch");
  }
  y.shape = dims;
  return {std::move(y)};
}

std::vector<Tensor> op_gemm(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& a = require_float(node, in.at(0));
  const Tensor& b = require_float(node, in.at(1));
  const Tensor* c = in.size() > 2 ? in[2] : nullptr;
  if (a.rank() != 2 || b.rank() != 2) fail(node, "expected 2D operands");
  const bool ta = node.attr_int("transA", 0) != 0;
  const bool tb = node.attr_int("transB", 0) != 0;
  const float alpha = node.attr_float("alpha", 1.0f);
  const float beta = node.attr_float("beta", 1.0f);
  const int64_t m = ta ? a.shape[1] : a.shape[0];
  const int64_t k = ta ? a.shape[0] : a.shape[1];
  const int64_t kb = tb ? b.shape[1] : b.shape[0];
  const int64_t n = tb ? b.shape[0] : b.shape[1];
  if (k != kb) fail(node, "inner dimensions differ");
  Tensor y = float_tensor({m, n});
  if (c != nullptr && beta != 0.0f) {
    if (c->is_int) fail(node, "bias must be float");
    const std::size_t cn = c->numel();
    const int64_t c_rows = c->rank() == 2 ? c->shape[0] : 1;
    const int64_t c_cols = c->rank() == 0 ? 1 : c->shape.back();
    if (!(cn == 1 || (c_cols == n && (c_rows == 1 || c_rows == m)) || (c_cols == 1 && c_rows == m))) {
      fail(node, "bias not broadcastable");
    }
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        const int64_t ci = c_rows == 1 ? 0 : i;
        const int64_t cj = c_cols == 1 ? 0 : j;
        y.data[static_cast<std::size_t>(i * n + j)] =
            beta * (cn == 1 ? c->data[0] : c->data[static_cast<std::size_t>(ci * c_cols + cj)]);
      }
    }
  }
  // One GEMM per output row keeps results independent of the batch size.
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = ta ? a.data.data() + i : a.data.data() + i * k;
    const int inc_a = ta ? static_cast<int>(a.shape[1]) : 1;
    cblas_sgemv(CblasRowMajor, tb ? CblasNoTrans : CblasTrans, static_cast<int>(b.shape[0]),
                static_cast<int>(b.shape[1]), alpha, b.data.data(), static_cast<int>(b.shape[1]), arow, inc_a, 1.0f,
                y.data.data() + i * n, 1);
  }
  return {std::move(y)};
}

std::vector<Tensor> op_matmul(const Node& node, const std::vector<const Tensor*>& in) {
  const Tensor& a = require_float(node, in.at(0));
  const Tensor& b = require_float(node, in.at(1));
  if (a.rank() != 2 || b.rank() != 2) fail(node, "only 2D MatMul is supported");
  Node gemm = node;
  gemm.attributes.clear();
  Attribute zero;
  zero.f = 0.0f;
  gemm.attributes["beta"] = zero;
  return op_gemm(gemm, {&a, &b});
}

std::vector<int64_t> broadcast_shape(const Node& node, const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  std::vector<int64_t> out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) fail(node, "shapes are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

std::vector<Tensor> op_binary(const Node& node, const std::vector<const Tensor*>& in,
                              const std::function<float(float, float)>& fn) {
  const Tensor& a = require_float(node, in.at(0));
  const Tensor& b = require_float(node, in.at(1));
  if (a.shape == b.shape) {
    Tensor y = float_tensor(a.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = fn(a.data[i], b.data[i]);
    return {std::move(y)};
  }
  const auto shape = broadcast_shape(node, a.shape, b.shape);
  const std::size_t rank = shape.size();
  auto strides_for = [&](const std::vector<int64_t>& s) {
    std::vector<int64_t> st(rank, 0);
    int64_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
      const std::size_t r = i + (rank - s.size());
      st[r] = s[i] == 1 ? 0 : acc;
      acc *= s[i];
    }
    return st;
  };
  const auto sa = strides_for(a.shape);
  const auto sb = strides_for(b.shape);
  Tensor y = float_tensor(shape);
  std::vector<int64_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < y.data.size(); ++flat) {
    int64_t ia = 0, ib = 0;
    for (std::size_t r = 0; r < rank; ++r) {
      ia += idx[r] * sa[r];
      ib += idx[r] * sb[r];
    }
    y.data[flat] = fn(a.data[static_cast<std::size_t>(ia)], b.data[static_cast<std::size_t>(ib)]);
    for (std::size_t r = rank; r-- > 0;) {
      if (++idx[r] < shape[r]) break;
      idx[r] = 0;
    }
  }
  return {std::move(y)};
}

std::vector<Tensor> op_unary(const Node& node, const std::vector<const Tensor*>& in,
                             const std::function<float(float)>& fn) {
  Tensor y = require_float(node, in.at(0));
  for (float& v : y.data) v = fn(v);
  return {std::move(y)};
}

std::vector<Tensor> op_batch_norm(const Node& node, const std::vector<const Tensor*>& in) {
  Tensor y = require_float(node, in.at(0));
  const Tensor& scale = require_float(node, in.at(1));
  const Tensor& bias = require_float(node, in.at(2));
  const Tensor& mean = require_float(node, in.at(3));
  const Tensor& var = require_float(node, in.at(4));
  const double eps = node.attr_float("epsilon", 1e-5f);
  if (y.rank() < 2) fail(node, "expected at least 2D input");
  const int64_t n = y.shape[0], c = y.shape[1];
  const auto inner = static_cast<int64_t>(y.numel()) / (n * c);
  for (int64_t ch = 0; ch < c; ++ch) {
    const auto k = static_cast<std::size_t>(ch);
    const double s = scale.data[k] / std::sqrt(static_cast<double>(var.data[k]) + eps);
    const double shift = bias.data[k] - mean.data[k] * s;
    for (int64_t img = 0; img < n; ++img) {
      float* p = y.data.data() + (img * c + ch) * inner;
      for (int64_t i = 0; i < inner; ++i) p[i] = static_cast<float>(p[i] * s + shift);
    }
  }
  return {std::move(y)};
}

std::vector<Tensor> op_softmax(const Node& node, const std::vector<const Tensor*>& in, int64_t opset) {
  Tensor y = require_float(node, in.at(0));
  const auto rank = static_cast<int64_t>(y.rank());
  int64_t axis = node.attr_int("axis", opset >= 13 ? -1 : 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(node, "axis out of range");
  // Before opset 13 the input is coerced to 2D at `axis`; from 13 on the
  // reduction runs along `axis` alone.
  int64_t outer = 1, len = 1, inner = 1;
  for (int64_t i = 0; i < rank; ++i) {
    const int64_t d = y.shape[static_cast<std::size_t>(i)];
    if (opset >= 13) {
      (i < axis ? outer : (i == axis ? len : inner)) *= d;
    } else {
      (i < axis ? outer : len) *= d;
    }
  }
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in_i = 0; in_i < inner; ++in_i) {
      float* base = y.data.data() + o * len * inner + in_i;
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < len; ++j) mx = std::max(mx, static_cast<double>(base[j * inner]));
      double sum = 0.0;
      for (int64_t j = 0; j < len; ++j) sum += std::exp(base[j * inner] - mx);
      for (int64_t j = 0; j < len; ++j) base[j * inner] = static_cast<float>(std::exp(base[j * inner] - mx) / sum);
    }
  }
  return {std::move(y)};
}

std::vector<Tensor> op_identity(const Node&, const std::vector<const Tensor*>& in) { return {*in.at(0)}; }

const std::map<std::string, OpFn>& op_table() {
  static const std::map<std::string, OpFn> table = [] {
    std::map<std::string, OpFn> t;
    t["Conv"] = op_conv;
    t["MaxPool"] = [](const Node& n, const auto& in) { return op_pool(n, in, true); };
    t["AveragePool"] = [](const Node& n, const auto& in) { return op_pool(n, in, false); };
    t["GlobalAveragePool"] = op_global_avg_pool;
    t["Flatten"] = op_flatten;
    t["Reshape"] = op_reshape;
    t["Gemm"] = op_gemm;
    t["MatMul"] = op_matmul;
    t["Add"] = [](const Node& n, const auto& in) { return op_binary(n, in, std::plus<float>()); };
    t["Sub"] = [](const Node& n, const auto& in) { return op_binary(n, in, std::minus<float>()); };
    t["Mul"] = [](const Node& n, const auto& in) { return op_binary(n, in, std::multiplies<float>()); };
    t["Div"] = [](const Node& n, const auto& in) { return op_binary(n, in, std::divides<float>()); };
    t["Relu"] = [](const Node& n, const auto& in) { return op_unary(n, in, [](float v) { return v > 0 ? v : 0.0f; }); };
    t["LeakyRelu"] = [](const Node& n, const auto& in) {
      const float alpha = n.attr_float("alpha", 0.01f);
      return op_unary(n, in, [alpha](float v) { return v > 0 ? v : alpha * v; });
    };
    t["Sigmoid"] = [](const Node& n, const auto& in) {
      return op_unary(n, in, [](float v) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))); });
    };
    t["BatchNormalization"] = op_batch_norm;
    t["Softmax"] = [](const Node& n, const auto& in) { return op_softmax(n, in, n.opset); };
    t["Identity"] = op_identity;
    t["Dropout"] = op_identity;
    t["Constant"] = [](const Node& n, const auto&) -> std::vector<Tensor> {
      auto it = n.attributes.find("value");
      if (it == n.attributes.end() || !it->second.tensor) fail(n, "only tensor-valued Constant is supported");
      return {*it->second.tensor};
    };
    return t;
  }();
  return table;
}

}  // namespace

Graph Graph::load(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw LoadError("cannot open model file " + path.string());
  onnx::ModelProto model;
  if (!model.ParseFromIstream(&file)) throw LoadError("malformed ONNX model " + path.string());
  if (!model.has_graph()) throw LoadError("ONNX model has no graph: " + path.string());

  Graph g;
  for (const auto& op : model.opset_import()) {
    if (op.domain().empty() || op.domain() == "ai.onnx") g.opset_ = op.version();
  }
  if (g.opset_ < 11) throw LoadError("opset " + std::to_string(g.opset_) + " < 11 in " + path.string());

  const auto& graph = model.graph();
  for (const auto& init : graph.initializer()) g.initializers_.emplace(init.name(), convert_tensor(init));
  for (const auto& input : graph.input()) {
    if (!g.initializers_.contains(input.name())) g.inputs_.push_back(convert_value_info(input));
  }
  for (const auto& output : graph.output()) g.outputs_.push_back(convert_value_info(output));

  const auto& table = op_table();
  std::set<std::string> defined;
  for (const auto& v : g.inputs_) defined.insert(v.name);
  for (const auto& [name, _] : g.initializers_) defined.insert(name);
  for (const auto& proto : graph.node()) {
    if (!proto.domain().empty() && proto.domain() != "ai.onnx") {
      throw LoadError("unsupported operator domain '" + proto.domain() + "'");
    }
    Node node;
    node.op_type = proto.op_type();
    node.name = proto.name();
    node.opset = g.opset_;
    if (!table.contains(node.op_type)) throw LoadError("unsupported ONNX operator " + node.op_type);
    for (const auto& i : proto.input()) {
      if (!i.empty() && !defined.contains(i)) {
        throw LoadError("node '" + node.name + "' consumes undefined value '" + i + "'");
      }
      node.inputs.push_back(i);
    }
    for (const auto& o : proto.output()) {
      node.outputs.push_back(o);
      defined.insert(o);
    }
    for (const auto& a : proto.attribute()) {
      Attribute attr;
      attr.i = a.i();
      attr.f = a.f();
      attr.s = a.s();
      attr.ints.assign(a.ints().begin(), a.ints().end());
      attr.floats.assign(a.floats().begin(), a.floats().end());
      if (a.has_t()) attr.tensor = std::make_shared<Tensor>(convert_tensor(a.t()));
      node.attributes.emplace(a.name(), std::move(attr));
    }
    g.nodes_.push_back(std::move(node));
  }
  for (const auto& out : g.outputs_) {
    if (!defined.contains(out.name)) throw LoadError("graph output '" + out.name + "' is never produced");
  }
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    for (const auto& name : g.nodes_[i].inputs) g.last_use_[name] = i;
  }
  return g;
}

std::vector<Tensor> Graph::run(const std::string& input_name, Tensor input,
                               const std::vector<std::string>& wanted) const {
  std::unordered_map<std::string, Tensor> env;
  env.emplace(input_name, std::move(input));
  const std::set<std::string> keep(wanted.begin(), wanted.end());
  const auto& table = op_table();

  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (name.empty()) return nullptr;
    if (auto it = env.find(name); it != env.end()) return &it->second;
    if (auto it = initializers_.find(name); it != initializers_.end()) return &it->second;
    throw InferenceError("value '" + name + "' is not available");
  };

  // Nodes after the last one producing a wanted value are skipped.
  std::size_t stop = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& o : nodes_[i].outputs) {
      if (keep.contains(o)) stop = i + 1;
    }
  }

  for (std::size_t i = 0; i < stop; ++i) {
    const Node& node = nodes_[i];
    std::vector<const Tensor*> args;
    args.reserve(node.inputs.size());
    for (const auto& name : node.inputs) args.push_back(lookup(name));
    std::vector<Tensor> results = table.at(node.op_type)(node, args);
    for (const auto& name : node.inputs) {
      auto it = last_use_.find(name);
      if (it != last_use_.end() && it->second == i && !keep.contains(name)) env.erase(name);
    }
    for (std::size_t k = 0; k < node.outputs.size() && k < results.size(); ++k) {
      env.insert_or_assign(node.outputs[k], std::move(results[k]));
    }
  }

  std::vector<Tensor> out;
  out.reserve(wanted.size());
  for (const auto& name : wanted) {
    auto it = env.find(name);
    if (it == env.end()) throw InferenceError("graph did not produce '" + name + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace polycam::onnx_runtime
