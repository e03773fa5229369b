// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polycam/plane.hpp"
#include "polycam/saliency.hpp"

namespace polycam {

/// NPY v1.0, 2D little-endian float32, C order.
std::vector<uint8_t> encode_npy(const Plane& plane);
/// Accepts v1.0 and v2.0 headers of 2D "<f4" arrays; 3D and 4D arrays with
/// leading unit dimensions are squeezed. Throws InputError otherwise.
Plane decode_npy(std::span<const uint8_t> bytes);
/// Raw float32 payload and shape of an NPY array of any rank.
std::vector<float> decode_npy_array(std::span<const uint8_t> bytes, std::vector<std::size_t>& shape);

struct ZipEntry {
  std::string name;
  std::vector<uint8_t> data;
};

/// Stored (uncompressed) zip with fixed timestamps, so output bytes depend on
/// the entries only.
std::vector<uint8_t> build_zip(std::span<const ZipEntry> entries);
/// Reads stored and deflated entries in directory order.
std::vector<ZipEntry> read_zip(std::span<const uint8_t> bytes);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

struct KeyedMap {
  /// Usually the image file name including its extension.
  std::string key;
  SaliencyMap map;
};

inline constexpr const char* kArchiveMetadataEntry = "metadata.json";

/// npz-compatible archive: one "<key>.npy" entry per map plus a
/// "metadata.json" entry describing each map.
void write_map_archive(std::span<const KeyedMap> maps, const std::filesystem::path& path);

struct ArchiveContents {
  std::map<std::string, Plane> planes;
  std::string metadata_json;
};

ArchiveContents read_map_archive(const std::filesystem::path& path);

}  // namespace polycam
