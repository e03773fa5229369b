// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polycam/faithfulness.hpp"

namespace polycam {

/// RFC-4180 CSV writer with a mandatory header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(const std::string& text);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::size_t value);
  void end_row();
  /// Flushes and closes; throws on I/O failure.
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool row_open_ = false;
};

/// Shortest round-trip decimal form.
std::string format_double(double v);
std::string csv_escape(const std::string& text);

struct MetricFiles {
  std::filesystem::path auc;
  std::filesystem::path details;
};

/// Writes "<ins|del>_auc_<model>_<method>.csv" (image, auc) and
/// "<ins|del>_details_<model>_<method>.csv" (image, score per step) under `dir`.
/// Every curve must have `mode`.
MetricFiles write_metric_csv(std::span<const EvalCurve> curves, CurveMode mode, const std::filesystem::path& dir,
                             const std::string& model, const std::string& method);

}  // namespace polycam
