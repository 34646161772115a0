// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/checkpoint.h"

#include <cstring>
#include <fstream>

#include "cxrgan/error.h"

namespace cxrgan {
namespace {

constexpr char kMagic[8] = {'C', 'X', 'R', 'G', 'A', 'N', 'C', 'K'};

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<char> take() { return std::move(out_); }

 private:
  std::vector<char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& in) : in_(in) {}
  template <class T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(in_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw DataError("checkpoint is truncated");
  }
  const std::vector<char>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

const Array& Checkpoint::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw DataError("checkpoint has no array named '" + name + "'");
  return it->second;
}

std::vector<std::string> Checkpoint::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : arrays_)
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  return out;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw DataError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

std::vector<char> Checkpoint::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod(kVersion);
  w.pod(static_cast<std::uint32_t>(meta_.size()));
  for (const auto& [k, v] : meta_) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& [name, a] : arrays_) {
    w.str(name);
    w.pod(static_cast<std::uint32_t>(a.rank()));
    for (int d : a.shape()) w.pod(static_cast<std::int32_t>(d));
    w.raw(a.raw(), a.size() * sizeof(double));
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::vector<char>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError("not a cxrgan checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto nmeta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    c.meta_[k] = r.str();
  }
  const auto narrays = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < narrays; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8) throw DataError("checkpoint array '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.pod<std::int32_t>();
      if (d <= 0) throw DataError("checkpoint array '" + name + "' has invalid shape");
    }
    Array a(shape);
    r.raw(a.raw(), a.size() * sizeof(double));
    c.arrays_.emplace(std::move(name), std::move(a));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  write_file_atomic(path, std::vector<char>(contents.begin(), contents.end()));
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace cxrgan
