// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polycam/image_io.hpp"
#include "polycam/onnx_model.hpp"

#ifndef POLYCAM_FIXTURE_DIR
#error "POLYCAM_FIXTURE_DIR must be defined"
#endif

namespace polycam::testing {

inline std::filesystem::path fixture_dir() { return POLYCAM_FIXTURE_DIR; }

inline std::filesystem::path fixture_model() { return fixture_dir() / "tiny_cnn.onnx"; }

inline std::filesystem::path cascade_model(std::size_t stage) {
  return fixture_dir() / ("tiny_cnn_cascade_" + std::to_string(stage) + ".onnx");
}

inline nlohmann::json fixture_manifest() {
  std::ifstream in(fixture_dir() / "manifest.json");
  return nlohmann::json::parse(in);
}

struct FixtureImage {
  std::filesystem::path path;
  std::size_t label = 0;
  ImageTensor tensor;
};

inline std::vector<FixtureImage> fixture_images(const Geometry& g, std::size_t limit = 100) {
  std::vector<FixtureImage> out;
  const auto manifest = fixture_manifest();
  for (const auto& entry : manifest.at("images")) {
    if (out.size() == limit) break;
    const auto path = fixture_dir() / "images" / entry.at("file").get<std::string>();
    out.push_back({path, entry.at("label").get<std::size_t>(), preprocess_image(path, g)});
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace polycam::testing
