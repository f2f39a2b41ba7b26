/* Copyright 2026 The ctcocr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "ctcocr/nn/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctcocr/errors.h"

namespace ctcocr::nn {
namespace {

constexpr char kMagic[8] = {'C', 'T', 'C', 'O', 'C', 'K', 'P', 'T'};

std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void Bytes(const void* p, size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void Need(size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("checkpoint truncated");
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  std::string String(size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  size_t pos_ = 0;
};

}  // namespace

const NamedArray* Checkpoint::Find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::uint8_t> Checkpoint::Serialize() const {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  const std::string meta = metadata.dump();
  w.U64(meta.size());
  w.Bytes(meta.data(), meta.size());
  w.U32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.U32(static_cast<std::uint32_t>(a.name.size()));
    w.Bytes(a.name.data(), a.name.size());
    w.U32(static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) w.U32(static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < a.values.size(); ++i) w.F64(a.values[i]);
  }
  w.U64(Fnv1a(w.out()));
  return std::move(w.out());
}

Checkpoint Checkpoint::Deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.String(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 8) throw FormatError("checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.subspan(bytes.size() - 8));
  if (tail.U64() != Fnv1a(body)) throw FormatError("checkpoint checksum mismatch");

  Checkpoint ckpt;
  const std::uint64_t meta_len = r.U64();
  r.Need(meta_len);
  try {
    ckpt.metadata = nlohmann::ordered_json::parse(r.String(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.String(r.U32());
    const std::uint32_t rank = r.U32();
    if (rank > 8) throw FormatError("implausible array rank in checkpoint");
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      a.shape.push_back(static_cast<int>(r.U32()));
      n *= static_cast<std::uint64_t>(a.shape.back());
    }
    r.Need(n * 8);
    a.values.resize(static_cast<Eigen::Index>(n));
    for (std::uint64_t k = 0; k < n; ++k) a.values[static_cast<Eigen::Index>(k)] = r.F64();
    ckpt.arrays.push_back(std::move(a));
  }
  if (r.pos() != body.size()) throw FormatError("trailing bytes in checkpoint");
  return ckpt;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  const auto bytes = Serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

std::vector<NamedArray> CaptureArrays(const Model& model) {
  std::vector<NamedArray> out;
  for (const ParamArray* p : model.Params()) out.push_back({p->name, p->shape, p->values});
  return out;
}

void RestoreArrays(Model& model, std::span<const NamedArray> arrays) {
  for (ParamArray* p : model.Params()) {
    const NamedArray* found = nullptr;
    for (const auto& a : arrays) {
      if (a.name == p->name) {
        found = &a;
        break;
      }
    }
    if (!found) throw ConfigError("checkpoint lacks array " + p->name);
    if (found->shape != p->shape) {
      throw ConfigError("shape mismatch for " + p->name);
    }
    p->values = found->values;
  }
}

}  // namespace ctcocr::nn
