// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal ONNX graph interpreter covering the operator set used by
// convolutional image classifiers (VGG / ResNet style exports).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace polycam::onnx_runtime {

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;
  std::vector<int64_t> ints;
  bool is_int = false;

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
};

struct Attribute {
  int64_t i = 0;
  float f = 0.0f;
  std::string s;
  std::vector<int64_t> ints;
  std::vector<float> floats;
  std::shared_ptr<Tensor> tensor;
};

struct Node {
  std::string op_type;
  std::string name;
  int64_t opset = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;

  bool has(const std::string& key) const { return attributes.contains(key); }
  int64_t attr_int(const std::string& key, int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::string attr_string(const std::string& key, const std::string& fallback) const;
  std::vector<int64_t> attr_ints(const std::string& key, std::vector<int64_t> fallback) const;
};

struct ValueInfo {
  std::string name;
  /// -1 marks a symbolic or missing dimension.
  std::vector<int64_t> dims;
};

class Graph {
 public:
  /// Parses and validates a model file. Throws polycam::LoadError.
  static Graph load(const std::filesystem::path& path);

  const std::vector<ValueInfo>& inputs() const { return inputs_; }
  const std::vector<ValueInfo>& outputs() const { return outputs_; }
  int64_t opset() const { return opset_; }

  /// Evaluates the graph and returns the requested values in order.
  std::vector<Tensor> run(const std::string& input_name, Tensor input, const std::vector<std::string>& wanted) const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, Tensor> initializers_;
  std::vector<ValueInfo> inputs_;
  std::vector<ValueInfo> outputs_;
  std::unordered_map<std::string, std::size_t> last_use_;
  int64_t opset_ = 0;
};

}  // namespace polycam::onnx_runtime
