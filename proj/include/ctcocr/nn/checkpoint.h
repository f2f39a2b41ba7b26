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

#ifndef CTCOCR_NN_CHECKPOINT_H_
#define CTCOCR_NN_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctcocr/nn/model.h"
#include "ctcocr/types.h"
#include "json.hpp"

namespace ctcocr::nn {

// Binary layout, all integers little-endian:
//   "CTCOCKPT" | u32 version | u64 n | n bytes of JSON metadata |
//   u32 array count | per array: u32 name length, name bytes, u32 rank,
//   rank x u32 dims, prod(dims) x f64 values | u64 FNV-1a of all prior bytes
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  Vector values;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* Find(const std::string& name) const;

  std::vector<std::uint8_t> Serialize() const;
  // Throws kFormat on corruption and kConfig on a version mismatch.
  static Checkpoint Deserialize(std::span<const std::uint8_t> bytes);
  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);
};

// Copies every parameter and buffer of `model`.
std::vector<NamedArray> CaptureArrays(const Model& model);
// Overwrites `model` arrays by name; throws kConfig on a missing array or a
// shape mismatch.
void RestoreArrays(Model& model, std::span<const NamedArray> arrays);

}  // namespace ctcocr::nn

#endif  // CTCOCR_NN_CHECKPOINT_H_
