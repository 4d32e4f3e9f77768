// Copyright 2026 The BITRec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bitrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

namespace bitrec {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'B', 'I', 'T', 'R'};

template <class T>
constexpr std::uint32_t dtype_code() {
  return std::is_same_v<T, float> ? 0u : 1u;
}

class Writer {
 public:
  template <class U>
  void put(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(U));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string file) : data_(std::move(data)), file_(std::move(file)) {}

  template <class U>
  U get() {
    U v;
    bytes(&v, sizeof(U));
    return v;
  }
  void bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) {
      throw CheckpointTruncatedError(file_ + ": truncated checkpoint (needed " +
                                     std::to_string(n) + " more bytes at offset " +
                                     std::to_string(pos_) + ")");
    }
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& file() const { return file_; }

 private:
  std::vector<char> data_;
  std::string file_;
  std::size_t pos_ = 0;
};

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::uint32_t dtype = 0;
};

}  // namespace

template <class T>
void save_checkpoint(const ParameterStore<T>& store, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, e] : store.entries()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.value.rank()));
    for (auto extent : e.value.shape()) w.put<std::uint64_t>(extent);
    w.put<std::uint32_t>(dtype_code<T>());
  }
  for (const auto& [name, e] : store.entries()) w.bytes(e.value.data(), e.value.size() * sizeof(T));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

template <class T>
ParameterStore<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path.string());

  char magic[4];
  if (r.remaining() < sizeof magic) {
    throw CheckpointFormatError(r.file() + ": not a checkpoint (file too short)");
  }
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointFormatError(r.file() + ": bad magic bytes, not a checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError(r.file() + ": checkpoint version " + std::to_string(version) +
                                 ", this build reads version " +
                                 std::to_string(kCheckpointVersion));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<ManifestEntry> manifest(count);
  for (auto& m : manifest) {
    const auto len = r.get<std::uint32_t>();
    if (len > r.remaining()) throw CheckpointTruncatedError(r.file() + ": truncated manifest");
    m.name.resize(len);
    r.bytes(m.name.data(), len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointFormatError(r.file() + ": implausible rank for " + m.name);
    for (std::uint32_t k = 0; k < rank; ++k) m.shape.push_back(r.get<std::uint64_t>());
    m.dtype = r.get<std::uint32_t>();
    if (m.dtype > 1) throw CheckpointFormatError(r.file() + ": unknown dtype for " + m.name);
    if (m.dtype != dtype_code<T>()) {
      throw CheckpointFormatError(r.file() + ": tensor " + m.name + " has dtype " +
                                  (m.dtype == 0 ? "f32" : "f64") + ", expected " +
                                  (dtype_code<T>() == 0 ? "f32" : "f64"));
    }
  }
  ParameterStore<T> store;
  for (const auto& m : manifest) {
    if (shape_numel(m.shape) > r.remaining() / sizeof(T)) {
      throw CheckpointTruncatedError(r.file() + ": truncated payload for tensor " + m.name);
    }
    Tensor<T> t(m.shape);
    r.bytes(t.data(), t.size() * sizeof(T));
    store.add(m.name, std::move(t));
  }
  if (r.remaining() != 0) {
    throw CheckpointFormatError(r.file() + ": " + std::to_string(r.remaining()) +
                                " trailing bytes after the last tensor");
  }
  return store;
}

template <class T>
void load_checkpoint_into(const std::filesystem::path& path, ParameterStore<T>& expected) {
  auto loaded = load_checkpoint<T>(path);
  for (const auto& [name, e] : expected.entries()) {
    if (!loaded.contains(name)) {
      throw CheckpointShapeError(path.string() + ": tensor " + name + " missing from checkpoint");
    }
    const auto& got = loaded.value(name);
    if (got.shape() != e.value.shape()) {
      throw CheckpointShapeError(path.string() + ": tensor " + name + " has shape " +
                                 shape_string(got.shape()) + " but the model expects " +
                                 shape_string(e.value.shape()));
    }
  }
  for (const auto& [name, e] : loaded.entries()) {
    if (!expected.contains(name)) {
      throw CheckpointShapeError(path.string() + ": unexpected tensor " + name +
                                 " not used by the configured model");
    }
  }
  for (auto& [name, e] : expected.entries()) e.value = loaded.value(name);
}

template void save_checkpoint(const ParameterStore<float>&, const std::filesystem::path&);
template void save_checkpoint(const ParameterStore<double>&, const std::filesystem::path&);
template ParameterStore<float> load_checkpoint(const std::filesystem::path&);
template ParameterStore<double> load_checkpoint(const std::filesystem::path&);
template void load_checkpoint_into(const std::filesystem::path&, ParameterStore<float>&);
template void load_checkpoint_into(const std::filesystem::path&, ParameterStore<double>&);

}  // namespace bitrec
