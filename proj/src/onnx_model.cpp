// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/onnx_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "onnx/graph.hpp"
#include "polycam/errors.hpp"

namespace polycam {

namespace {

constexpr const char* kInputName = "input";
constexpr const char* kTapPrefix = "tap:";

struct TapOutput {
  std::string output;
  TapLayer layer;
  std::size_t channels;
};

}  // namespace

struct OnnxModel::Impl {
  onnx_runtime::Graph graph;
  ModelInfo info;
  std::string primary;
  bool softmax = false;
  std::vector<TapOutput> taps;
  std::size_t batch_size = 32;

  onnx_runtime::Tensor pack(std::span<const ImageTensor> batch) const {
    onnx_runtime::Tensor t;
    const Geometry& g = info.input;
    t.shape = {static_cast<int64_t>(batch.size()), static_cast<int64_t>(g.channels), static_cast<int64_t>(g.height),
               static_cast<int64_t>(g.width)};
    t.data.reserve(t.numel());
    for (const auto& img : batch) t.data.insert(t.data.end(), img.values().begin(), img.values().end());
    return t;
  }

  std::vector<Probabilities> to_probabilities(const onnx_runtime::Tensor& out, std::size_t n) const {
    if (out.numel() != n * info.classes) throw InferenceError("primary output has unexpected size");
    std::vector<Probabilities> probs(n, Probabilities(info.classes));
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = out.data.data() + i * info.classes;
      if (softmax) {
        const double mx = *std::max_element(row, row + info.classes);
        double sum = 0.0;
        for (std::size_t k = 0; k < info.classes; ++k) sum += std::exp(row[k] - mx);
        for (std::size_t k = 0; k < info.classes; ++k) probs[i][k] = static_cast<float>(std::exp(row[k] - mx) / sum);
      } else {
        std::copy(row, row + info.classes, probs[i].begin());
      }
      for (float v : probs[i]) {
        if (!std::isfinite(v)) throw InferenceError("non-finite model output");
      }
    }
    return probs;
  }

  std::vector<onnx_runtime::Tensor> run(onnx_runtime::Tensor input, const std::vector<std::string>& wanted) const {
    try {
      return graph.run(kInputName, std::move(input), wanted);
    } catch (const InferenceError&) {
      throw;
    } catch (const std::exception& e) {
      throw InferenceError(std::string("inference failed: ") + e.what());
    }
  }
};

OnnxModel::OnnxModel(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
OnnxModel::~OnnxModel() = default;

const ModelInfo& OnnxModel::info() const { return impl_->info; }
std::size_t OnnxModel::batch_size() const { return impl_->batch_size; }
bool OnnxModel::applies_softmax() const { return impl_->softmax; }

std::vector<Probabilities> OnnxModel::predict_batch(std::span<const ImageTensor> batch) const {
  if (batch.empty()) throw std::invalid_argument("predict_batch: empty batch");
  for (const auto& x : batch) check_input(x);
  auto out = impl_->run(impl_->pack(batch), {impl_->primary});
  return impl_->to_probabilities(out.front(), batch.size());
}

TapResult OnnxModel::tap_activations(const ImageTensor& x) const {
  check_input(x);
  std::vector<std::string> wanted{impl_->primary};
  for (const auto& t : impl_->taps) wanted.push_back(t.output);
  auto out = impl_->run(impl_->pack(std::span(&x, 1)), wanted);
  TapResult result{impl_->to_probabilities(out.front(), 1).front(), {}};
  const Geometry& g = impl_->info.input;
  for (std::size_t t = 0; t < impl_->taps.size(); ++t) {
    const TapOutput& tap = impl_->taps[t];
    const auto& tensor = out[t + 1];
    const std::size_t h = g.height / tap.layer.subsampling;
    const std::size_t w = g.width / tap.layer.subsampling;
    if (tensor.numel() != tap.channels * h * w) throw InferenceError("tap '" + tap.layer.name + "' changed shape");
    LayerActivations layer{tap.layer.subsampling, {}};
    layer.channels.reserve(tap.channels);
    for (std::size_t k = 0; k < tap.channels; ++k) {
      auto begin = tensor.data.begin() + static_cast<std::ptrdiff_t>(k * h * w);
      layer.channels.emplace_back(h, w, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(h * w)));
    }
    result.activations.add(tap.layer.name, std::move(layer));
  }
  return result;
}

std::unique_ptr<OnnxModel> load_model(const std::filesystem::path& path, const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw LoadError("model file not found: " + path.string());
  auto impl = std::make_unique<OnnxModel::Impl>();
  impl->graph = onnx_runtime::Graph::load(path);
  impl->batch_size = std::max<std::size_t>(1, options.batch_size);
  ModelInfo& info = impl->info;
  info.id = options.id.empty() ? path.stem().string() : options.id;

  const auto& inputs = impl->graph.inputs();
  auto input = std::ranges::find_if(inputs, [](const auto& v) { return v.name == kInputName; });
  if (input == inputs.end() || inputs.size() != 1) {
    throw LoadError(path.string() + ": expected exactly one graph input named \"input\"");
  }
  if (input->dims.size() != 4 || input->dims[1] <= 0 || input->dims[2] <= 0 || input->dims[3] <= 0) {
    throw LoadError(path.string() + ": input must be 4D with static channel and spatial dimensions");
  }
  info.input = {static_cast<std::size_t>(input->dims[1]), static_cast<std::size_t>(input->dims[2]),
                static_cast<std::size_t>(input->dims[3])};

  std::vector<std::string> tap_names;
  for (const auto& out : impl->graph.outputs()) {
    if (out.name == "logits" || out.name == "probabilities") {
      if (!impl->primary.empty()) throw LoadError(path.string() + ": more than one primary output");
      impl->primary = out.name;
      impl->softmax = out.name == "logits";
    } else if (out.name.starts_with(kTapPrefix)) {
      tap_names.push_back(out.name);
    }
  }
  if (impl->primary.empty()) throw LoadError(path.string() + ": no output named \"logits\" or \"probabilities\"");

  // Probe pass: discovers class count and tap geometry.
  std::vector<std::string> wanted{impl->primary};
  wanted.insert(wanted.end(), tap_names.begin(), tap_names.end());
  ImageTensor probe(info.input);
  std::vector<onnx_runtime::Tensor> outs;
  try {
    outs = impl->run(impl->pack(std::span(&probe, 1)), wanted);
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": probe inference failed: " + e.what());
  }
  const auto& primary = outs.front();
  if (primary.numel() < 2 || primary.shape.empty() || primary.shape[0] != 1) {
    throw LoadError(path.string() + ": primary output must be [batch, classes] with at least 2 classes");
  }
  info.classes = primary.numel();

  for (std::size_t t = 0; t < tap_names.size(); ++t) {
    const auto& shape = outs[t + 1].shape;
    const std::string layer = tap_names[t].substr(std::string(kTapPrefix).size());
    if (shape.size() != 4) {
      throw LoadError(path.string() + ": tap '" + layer + "' is " + std::to_string(shape.size()) + "D, expected 4D");
    }
    const auto h = static_cast<std::size_t>(shape[2]);
    const auto w = static_cast<std::size_t>(shape[3]);
    if (h == 0 || w == 0 || info.input.height % h != 0 || info.input.width % w != 0 ||
        info.input.height / h != info.input.width / w) {
      throw LoadError(path.string() + ": tap '" + layer + "' has " + std::to_string(h) + "x" + std::to_string(w) +
                      " planes, which is not an integer subsampling of the input");
    }
    impl->taps.push_back({tap_names[t], {layer, info.input.height / h}, static_cast<std::size_t>(shape[1])});
  }
  std::ranges::stable_sort(impl->taps, {}, [](const TapOutput& t) { return t.layer.subsampling; });
  for (std::size_t t = 1; t < impl->taps.size(); ++t) {
    if (impl->taps[t].layer.subsampling == impl->taps[t - 1].layer.subsampling) {
      throw LoadError(path.string() + ": taps '" + impl->taps[t - 1].layer.name + "' and '" + impl->taps[t].layer.name +
                      "' share subsampling factor " + std::to_string(impl->taps[t].layer.subsampling));
    }
  }
  for (const auto& t : impl->taps) info.taps.push_back(t.layer);
  return std::unique_ptr<OnnxModel>(new OnnxModel(std::move(impl)));
}

}  // namespace polycam
