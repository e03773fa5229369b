// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/metrics_csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace polycam {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

std::string csv_escape(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
  for (std::size_t i = 0; i < header.size(); ++i) buffer_ += (i ? "," : "") + csv_escape(header[i]);
  buffer_ += "\r\n";
}

CsvWriter& CsvWriter::cell(const std::string& text) {
  if (row_open_) buffer_ += ',';
  buffer_ += csv_escape(text);
  row_open_ = true;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }
CsvWriter& CsvWriter::cell(std::size_t value) { return cell(std::to_string(value)); }

void CsvWriter::end_row() {
  buffer_ += "\r\n";
  row_open_ = false;
}

void CsvWriter::close() {
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path_.string() + " for writing");
  out << buffer_;
  if (!out.flush()) throw std::runtime_error("write failed for " + path_.string());
}

MetricFiles write_metric_csv(std::span<const EvalCurve> curves, CurveMode mode, const std::filesystem::path& dir,
                             const std::string& model, const std::string& method) {
  const std::string prefix = mode == CurveMode::Insertion ? "ins" : "del";
  MetricFiles files{dir / (prefix + "_auc_" + model + "_" + method + ".csv"),
                    dir / (prefix + "_details_" + model + "_" + method + ".csv")};
  std::vector<std::string> header{"image"};
  if (!curves.empty()) {
    for (std::size_t s = 0; s < curves.front().samples.size(); ++s) header.push_back("step_" + std::to_string(s));
  }
  CsvWriter auc(files.auc, {"image", "auc"});
  CsvWriter details(files.details, header);
  for (const auto& c : curves) {
    if (c.mode != mode) throw std::invalid_argument("write_metric_csv: mixed insertion and deletion curves");
    if (c.samples.size() + 1 != header.size()) throw std::invalid_argument("write_metric_csv: curves differ in length");
    auc.cell(c.image).cell(c.auc).end_row();
    details.cell(c.image);
    for (const auto& s : c.samples) details.cell(s.score);
    details.end_row();
  }
  auc.close();
  details.close();
  return files;
}

}  // namespace polycam
