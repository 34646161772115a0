// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cxrgan/array.h"

namespace cxrgan {

/// Versioned binary container of named arrays plus string metadata.
///
/// Layout (little-endian): "CXRGANCK", u32 version, u32 metadata count,
/// {u32 key length, key, u32 value length, value}*, u32 array count,
/// {u32 name length, name, u32 rank, i32 dims[rank], f64 data[numel]}*.
/// Entries are written in name order so equal contents give equal bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, const Array& value) { arrays_[name] = value; }
  bool has(const std::string& name) const { return arrays_.count(name) > 0; }
  const Array& get(const std::string& name) const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  bool has_meta(const std::string& key) const { return meta_.count(key) > 0; }
  const std::string& meta(const std::string& key) const;

  std::vector<char> serialize() const;
  static Checkpoint deserialize(const std::vector<char>& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::map<std::string, Array> arrays_;
  std::map<std::string, std::string> meta_;
};

/// Writes to a sibling temporary file and renames it into place, so a failed
/// run never leaves a truncated output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& contents);
std::vector<char> read_file(const std::filesystem::path& path);

}  // namespace cxrgan
