// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "polycam/model.hpp"

namespace polycam {

struct LoadOptions {
  /// Images per inference call during perturbation passes.
  std::size_t batch_size = 32;
  /// Overrides the model identifier (default: file stem).
  std::string id;
};

/// Classifier backed by an ONNX file: one 4D float input named "input", a
/// primary output "logits" or "probabilities", and optional extra outputs
/// "tap:<layer>" exposing intermediate activations.
class OnnxModel final : public Model {
 public:
  ~OnnxModel() override;
  OnnxModel(const OnnxModel&) = delete;
  OnnxModel& operator=(const OnnxModel&) = delete;

  const ModelInfo& info() const override;
  std::vector<Probabilities> predict_batch(std::span<const ImageTensor> batch) const override;
  TapResult tap_activations(const ImageTensor& x) const override;
  std::size_t batch_size() const override;

  /// True when the graph emits logits and softmax is applied by the backend.
  bool applies_softmax() const;

 private:
  struct Impl;
  explicit OnnxModel(std::unique_ptr<Impl> impl);
  friend std::unique_ptr<OnnxModel> load_model(const std::filesystem::path&, const LoadOptions&);

  std::unique_ptr<Impl> impl_;
};

/// Throws LoadError on a missing file, malformed graph, unsupported operator,
/// or tap geometry that violates the subsampling contract.
std::unique_ptr<OnnxModel> load_model(const std::filesystem::path& path, const LoadOptions& options = {});

}  // namespace polycam
