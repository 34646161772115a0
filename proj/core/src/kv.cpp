// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/kv.h"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "cxrgan/checkpoint.h"
#include "cxrgan/error.h"

namespace cxrgan::kv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

template <class T>
void get_number(const Map& values, const std::string& key, T& out, std::vector<std::string>& errors,
                const char* kind) {
  auto it = values.find(key);
  if (it == values.end()) return;
  T v{};
  if (!parse_number(it->second, v)) {
    errors.push_back(key + ": expected " + kind + ", got '" + it->second + "'");
    return;
  }
  out = v;
}

}  // namespace

Map parse(const std::string& text) {
  Map out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

Map read_file(const std::filesystem::path& path) {
  std::vector<char> bytes;
  try {
    bytes = cxrgan::read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  return parse(std::string(bytes.begin(), bytes.end()));
}

std::string format(const Map& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

void get(const Map& values, const std::string& key, int& out, std::vector<std::string>& errors) {
  get_number(values, key, out, errors, "an integer");
}
void get(const Map& values, const std::string& key, long& out, std::vector<std::string>& errors) {
  get_number(values, key, out, errors, "an integer");
}
void get(const Map& values, const std::string& key, std::uint64_t& out, std::vector<std::string>& errors) {
  get_number(values, key, out, errors, "a non-negative integer");
}
void get(const Map& values, const std::string& key, double& out, std::vector<std::string>& errors) {
  get_number(values, key, out, errors, "a real number");
}

void get(const Map& values, const std::string& key, bool& out, std::vector<std::string>& errors) {
  auto it = values.find(key);
  if (it == values.end()) return;
  if (it->second == "true" || it->second == "1") {
    out = true;
  } else if (it->second == "false" || it->second == "0") {
    out = false;
  } else {
    errors.push_back(key + ": expected true or false, got '" + it->second + "'");
  }
}

void get(const Map& values, const std::string& key, std::string& out, std::vector<std::string>&) {
  auto it = values.find(key);
  if (it != values.end()) out = it->second;
}

void get(const Map& values, const std::string& key, std::vector<int>& out, std::vector<std::string>& errors) {
  auto it = values.find(key);
  if (it == values.end()) return;
  std::vector<int> v;
  for (const auto& part : split_commas(it->second)) {
    int x = 0;
    if (!parse_number(part, x)) {
      errors.push_back(key + ": expected a comma-separated integer list, got '" + it->second + "'");
      return;
    }
    v.push_back(x);
  }
  out = std::move(v);
}

void get(const Map& values, const std::string& key, std::vector<double>& out, std::vector<std::string>& errors) {
  auto it = values.find(key);
  if (it == values.end()) return;
  std::vector<double> v;
  for (const auto& part : split_commas(it->second)) {
    double x = 0;
    if (!parse_number(part, x)) {
      errors.push_back(key + ": expected a comma-separated list of reals, got '" + it->second + "'");
      return;
    }
    v.push_back(x);
  }
  out = std::move(v);
}

void reject_unknown(const Map& values, const std::vector<std::string>& known, std::vector<std::string>& errors) {
  for (const auto& [k, _] : values) {
    if (std::find(known.begin(), known.end(), k) == known.end()) errors.push_back("unknown config key '" + k + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

}  // namespace cxrgan::kv
