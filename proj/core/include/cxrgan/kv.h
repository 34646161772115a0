// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Flat key=value configuration: one pair per line, '#' starts a comment,
// surrounding whitespace is ignored. No sections, no nesting.

namespace cxrgan::kv {

using Map = std::map<std::string, std::string>;

Map parse(const std::string& text);
Map read_file(const std::filesystem::path& path);
std::string format(const Map& values);

// Typed field extraction. Each reads `key` from `values` if present and
// stores it in `out`; malformed values append a message to `errors`.
void get(const Map& values, const std::string& key, int& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, long& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, double& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, bool& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, std::uint64_t& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, std::string& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, std::vector<int>& out, std::vector<std::string>& errors);
void get(const Map& values, const std::string& key, std::vector<double>& out, std::vector<std::string>& errors);

/// Keys in `values` that are not in `known`, reported as errors.
void reject_unknown(const Map& values, const std::vector<std::string>& known, std::vector<std::string>& errors);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
std::string join(const std::vector<int>& v);
std::string join(const std::vector<double>& v);

}  // namespace cxrgan::kv
