// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>
#include <string>

#include "polycam/errors.hpp"

namespace polycam {

namespace {

cv::Mat to_mat(const RgbImage& image) {
  cv::Mat rgb(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3,
              const_cast<uint8_t*>(image.pixels.data()));
  return rgb;
}

RgbImage from_mat(const cv::Mat& rgb) {
  RgbImage out{static_cast<std::size_t>(rgb.rows), static_cast<std::size_t>(rgb.cols), {}};
  out.pixels.resize(out.height * out.width * 3);
  cv::Mat dst(rgb.rows, rgb.cols, CV_8UC3, out.pixels.data());
  rgb.copyTo(dst);
  return out;
}

}  // namespace

RgbImage read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb);
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(image), bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write PNG " + path.string());
}

RgbImage resize_rgb(const RgbImage& image, std::size_t height, std::size_t width) {
  if (image.height == height && image.width == width) return image;
  cv::Mat out;
  cv::resize(to_mat(image), out, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

ImageTensor normalize_image(const RgbImage& image, const Geometry& target) {
  if (target.channels != 3) throw std::invalid_argument("preprocess: only 3-channel models are supported");
  cv::Mat unit;
  to_mat(image).convertTo(unit, CV_32FC3, 1.0 / 255.0);
  if (image.height != target.height || image.width != target.width) {
    cv::Mat resized;
    cv::resize(unit, resized, cv::Size(static_cast<int>(target.width), static_cast<int>(target.height)), 0, 0,
               cv::INTER_LINEAR);
    unit = resized;
  }
  ImageTensor x(target);
  for (std::size_t i = 0; i < target.height; ++i) {
    const auto* row = unit.ptr<cv::Vec3f>(static_cast<int>(i));
    for (std::size_t j = 0; j < target.width; ++j) {
      for (std::size_t c = 0; c < 3; ++c) x.at(c, i, j) = (row[j][static_cast<int>(c)] - kImageNetMean[c]) / kImageNetStd[c];
    }
  }
  return x;
}

ImageTensor preprocess_image(const std::filesystem::path& path, const Geometry& target) {
  return normalize_image(read_rgb(path), target);
}

std::array<uint8_t, 3> colormap(float value) {
  static const std::vector<cv::Vec3b> lut = [] {
    cv::Mat ramp(1, 256, CV_8UC1);
    for (int i = 0; i < 256; ++i) ramp.at<uint8_t>(0, i) = static_cast<uint8_t>(i);
    cv::Mat colored;
    cv::applyColorMap(ramp, colored, cv::COLORMAP_VIRIDIS);
    std::vector<cv::Vec3b> table(256);
    for (int i = 0; i < 256; ++i) table[static_cast<std::size_t>(i)] = colored.at<cv::Vec3b>(0, i);
    return table;
  }();
  const auto idx = static_cast<std::size_t>(std::lround(std::clamp(value, 0.0f, 1.0f) * 255.0f));
  const cv::Vec3b bgr = lut[idx];
  return {bgr[2], bgr[1], bgr[0]};
}

RgbImage render_overlay(const RgbImage& image, const Plane& map, double alpha, OverlayMode mode) {
  if (map.height() != image.height || map.width() != image.width) {
    throw std::invalid_argument("render_overlay: map " + std::to_string(map.height()) + "x" +
                                std::to_string(map.width()) + " does not match image " + std::to_string(image.height) +
                                "x" + std::to_string(image.width));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("render_overlay: alpha must lie in [0, 1]");
  RgbImage out = image;
  for (std::size_t i = 0; i < image.height; ++i) {
    for (std::size_t j = 0; j < image.width; ++j) {
      const float v = std::clamp(map(i, j), 0.0f, 1.0f);
      if (mode == OverlayMode::Mask) {
        for (std::size_t c = 0; c < 3; ++c) {
          out.at(i, j, c) = static_cast<uint8_t>(std::lround(image.at(i, j, c) * static_cast<double>(v)));
        }
      } else {
        const auto color = colormap(v);
        for (std::size_t c = 0; c < 3; ++c) {
          const double blended = (1.0 - alpha) * image.at(i, j, c) + alpha * color[c];
          out.at(i, j, c) = static_cast<uint8_t>(std::lround(blended));
        }
      }
    }
  }
  return out;
}

}  // namespace polycam
