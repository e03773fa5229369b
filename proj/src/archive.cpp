// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/archive.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include "json.hpp"
#include <regex>
#include <set>
#include <stdexcept>

#include "polycam/errors.hpp"

namespace polycam {

namespace {

static_assert(std::endian::native == std::endian::little, "archive writer assumes a little-endian host");

constexpr uint8_t kNpyMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
// MS-DOS date for 1980-01-01.
constexpr uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

void put16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint16_t get16(std::span<const uint8_t> b, std::size_t at) {
  if (at + 2 > b.size()) throw InputError("zip: truncated data");
  return static_cast<uint16_t>(b[at] | (b[at + 1] << 8));
}

uint32_t get32(std::span<const uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw InputError("zip: truncated data");
  return static_cast<uint32_t>(b[at]) | (static_cast<uint32_t>(b[at + 1]) << 8) |
         (static_cast<uint32_t>(b[at + 2]) << 16) | (static_cast<uint32_t>(b[at + 3]) << 24);
}

uint32_t crc_of(std::span<const uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - done, 1u << 30));
    crc = crc32(crc, data.data() + done, chunk);
    done += chunk;
  }
  return static_cast<uint32_t>(crc);
}

std::vector<uint8_t> inflate_raw(std::span<const uint8_t> in, std::size_t expected) {
  std::vector<uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw InputError("zip: inflate init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw InputError("zip: corrupt deflate stream");
  return out;
}

}  // namespace

std::vector<uint8_t> encode_npy(const Plane& plane) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(plane.height()) + ", " +
                       std::to_string(plane.width()) + "), }";
  // Magic (6) + version (2) + length (2) + header, padded so the payload is 64-byte aligned.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::vector<uint8_t> out(std::begin(kNpyMagic), std::end(kNpyMagic));
  out.push_back(1);
  out.push_back(0);
  put16(out, static_cast<uint16_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const auto values = plane.values();
  const auto* raw = reinterpret_cast<const uint8_t*>(values.data());
  out.insert(out.end(), raw, raw + values.size() * sizeof(float));
  return out;
}

std::vector<float> decode_npy_array(std::span<const uint8_t> bytes, std::vector<std::size_t>& shape) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kNpyMagic, 6) != 0) throw InputError("npy: bad magic string");
  const uint8_t major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = get16(bytes, 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    header_len = get32(bytes, 8);
    offset = 12;
  } else {
    throw InputError("npy: unsupported version " + std::to_string(major));
  }
  if (offset + header_len > bytes.size()) throw InputError("npy: truncated header");
  const std::string header(reinterpret_cast<const char*>(bytes.data() + offset), header_len);
  if (header.find("'descr': '<f4'") == std::string::npos) throw InputError("npy: only '<f4' arrays are supported");
  if (header.find("'fortran_order': False") == std::string::npos) throw InputError("npy: Fortran order not supported");
  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('shape':\s*\(([^)]*)\))"))) throw InputError("npy: missing shape");
  shape.clear();
  const std::string dims = m[1];
  const std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    shape.push_back(std::stoul(it->str()));
  }
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  const std::size_t payload = offset + header_len;
  if (bytes.size() - payload != count * sizeof(float)) throw InputError("npy: payload size does not match shape");
  std::vector<float> values(count);
  std::memcpy(values.data(), bytes.data() + payload, count * sizeof(float));
  return values;
}

Plane decode_npy(std::span<const uint8_t> bytes) {
  std::vector<std::size_t> shape;
  auto values = decode_npy_array(bytes, shape);
  while (shape.size() > 2 && shape.front() == 1) shape.erase(shape.begin());
  if (shape.size() != 2) throw InputError("npy: expected a 2D array");
  return Plane(shape[0], shape[1], std::move(values));
}

std::vector<uint8_t> build_zip(std::span<const ZipEntry> entries) {
  std::vector<uint8_t> out;
  std::vector<uint8_t> directory;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.name).second) throw std::invalid_argument("zip: duplicate entry '" + e.name + "'");
    if (e.data.size() > 0xFFFFFFFFu || out.size() > 0xFFFFFFFFu) throw std::runtime_error("zip: entry exceeds 4 GiB");
    const uint32_t crc = crc_of(e.data);
    const auto size = static_cast<uint32_t>(e.data.size());
    const auto offset = static_cast<uint32_t>(out.size());
    const auto name_len = static_cast<uint16_t>(e.name.size());

    put32(out, 0x04034b50);
    put16(out, 20);
    put16(out, 0);
    put16(out, 0);
    put16(out, 0);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), e.data.begin(), e.data.end());

    put32(directory, 0x02014b50);
    put16(directory, 20);
    put16(directory, 20);
    put16(directory, 0);
    put16(directory, 0);
    put16(directory, 0);
    put16(directory, kDosDate);
    put32(directory, crc);
    put32(directory, size);
    put32(directory, size);
    put16(directory, name_len);
    put16(directory, 0);
    put16(directory, 0);
    put16(directory, 0);
    put16(directory, 0);
    put32(directory, 0);
    put32(directory, offset);
    directory.insert(directory.end(), e.name.begin(), e.name.end());
  }
  const auto dir_offset = static_cast<uint32_t>(out.size());
  out.insert(out.end(), directory.begin(), directory.end());
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<uint16_t>(entries.size()));
  put16(out, static_cast<uint16_t>(entries.size()));
  put32(out, static_cast<uint32_t>(directory.size()));
  put32(out, dir_offset);
  put16(out, 0);
  return out;
}

std::vector<ZipEntry> read_zip(std::span<const uint8_t> bytes) {
  if (bytes.size() < 22) throw InputError("zip: file too small");
  std::size_t eocd = bytes.size() - 22;
  while (get32(bytes, eocd) != 0x06054b50) {
    if (eocd == 0 || bytes.size() - eocd > 22 + 0xFFFF) throw InputError("zip: end of central directory not found");
    --eocd;
  }
  const uint16_t count = get16(bytes, eocd + 10);
  std::size_t at = get32(bytes, eocd + 16);
  std::vector<ZipEntry> entries;
  entries.reserve(count);
  for (uint16_t i = 0; i < count; ++i) {
    if (get32(bytes, at) != 0x02014b50) throw InputError("zip: bad central directory entry");
    const uint16_t method = get16(bytes, at + 10);
    const uint32_t crc = get32(bytes, at + 16);
    const uint32_t compressed = get32(bytes, at + 20);
    const uint32_t size = get32(bytes, at + 24);
    const uint16_t name_len = get16(bytes, at + 28);
    const uint16_t extra_len = get16(bytes, at + 30);
    const uint16_t comment_len = get16(bytes, at + 32);
    const uint32_t local = get32(bytes, at + 42);
    if (at + 46 + name_len > bytes.size()) throw InputError("zip: truncated central directory");
    std::string name(reinterpret_cast<const char*>(bytes.data() + at + 46), name_len);
    at += 46 + name_len + extra_len + comment_len;

    if (get32(bytes, local) != 0x04034b50) throw InputError("zip: bad local header for " + name);
    const std::size_t data_at = local + 30 + get16(bytes, local + 26) + get16(bytes, local + 28);
    if (data_at + compressed > bytes.size()) throw InputError("zip: truncated entry " + name);
    const auto raw = bytes.subspan(data_at, compressed);
    std::vector<uint8_t> data;
    if (method == 0) {
      data.assign(raw.begin(), raw.end());
    } else if (method == 8) {
      data = inflate_raw(raw, size);
    } else {
      throw InputError("zip: unsupported compression method " + std::to_string(method) + " in " + name);
    }
    if (crc_of(data) != crc) throw InputError("zip: CRC mismatch in " + name);
    entries.push_back({std::move(name), std::move(data)});
  }
  return entries;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_map_archive(std::span<const KeyedMap> maps, const std::filesystem::path& path) {
  std::vector<ZipEntry> entries;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [key, map] : maps) {
    for (float v : map.plane.values()) {
      if (!std::isfinite(v) || v < 0.0f) {
        throw std::invalid_argument("archive " + path.string() + ": map '" + key + "' has a negative or non-finite entry");
      }
    }
    entries.push_back({key + ".npy", encode_npy(map.plane)});
    nlohmann::ordered_json m;
    m["method"] = map.method;
    m["class"] = map.cls;
    m["layer"] = map.layer;
    m["model"] = map.model_id;
    m["shape"] = {map.plane.height(), map.plane.width()};
    m["parameters"] = map.parameters;
    m["warnings"] = map.warnings;
    meta[key] = std::move(m);
  }
  const std::string text = meta.dump(2) + "\n";
  entries.push_back({kArchiveMetadataEntry, std::vector<uint8_t>(text.begin(), text.end())});
  try {
    write_file(path, build_zip(entries));
  } catch (const std::exception& e) {
    throw std::runtime_error("writing archive " + path.string() + ": " + e.what());
  }
}

ArchiveContents read_map_archive(const std::filesystem::path& path) {
  ArchiveContents out;
  for (auto& e : read_zip(read_file(path))) {
    if (e.name == kArchiveMetadataEntry) {
      out.metadata_json.assign(e.data.begin(), e.data.end());
    } else if (e.name.ends_with(".npy")) {
      out.planes.emplace(e.name.substr(0, e.name.size() - 4), decode_npy(e.data));
    }
  }
  return out;
}

}  // namespace polycam
