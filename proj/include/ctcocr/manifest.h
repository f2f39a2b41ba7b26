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

#ifndef CTCOCR_MANIFEST_H_
#define CTCOCR_MANIFEST_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctcocr/imaging.h"

namespace ctcocr::train {

enum class Unit { kWord, kLine };
enum class Split { kTrain, kVal, kTest };

std::string_view UnitName(Unit unit);
Unit ParseUnit(std::string_view name);
std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct ManifestEntry {
  // Absolute, or relative to the manifest's directory.
  std::filesystem::path image;
  std::u32string text;
  Split split = Split::kTrain;
};

// UTF-8 text, one `path<TAB>ground truth<TAB>split` record per line. Blank
// lines are ignored.
struct Manifest {
  std::vector<ManifestEntry> entries;
  Unit unit = Unit::kWord;
  std::filesystem::path base_dir;

  // Throws kFormat on malformed records (including an empty train text) and
  // kIo when the file cannot be read.
  static Manifest Parse(std::string_view text, Unit unit,
                        const std::filesystem::path& base_dir);
  static Manifest Load(const std::filesystem::path& path, Unit unit);
  std::string Serialize() const;
  void Save(const std::filesystem::path& path) const;

  std::filesystem::path Resolve(const ManifestEntry& entry) const;
  std::vector<ManifestEntry> Select(Split split) const;
};

// Preprocessed images and texts of a manifest split, in manifest order.
struct Dataset {
  std::vector<imaging::GrayImage> images;
  std::vector<std::u32string> texts;

  size_t size() const { return texts.size(); }
};

Dataset LoadDataset(const Manifest& manifest, Split split);

}  // namespace ctcocr::train

#endif  // CTCOCR_MANIFEST_H_
