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

#include "ctcocr/manifest.h"

#include <fstream>
#include <sstream>

#include "ctcocr/errors.h"
#include "ctcocr/utf8.h"

namespace ctcocr::train {

std::string_view UnitName(Unit unit) { return unit == Unit::kWord ? "word" : "line"; }

Unit ParseUnit(std::string_view name) {
  if (name == "word") return Unit::kWord;
  if (name == "line") return Unit::kLine;
  throw ConfigError("unit must be 'word' or 'line', got '" + std::string(name) + "'");
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw FormatError("split must be train, val or test, got '" + std::string(name) + "'");
}

Manifest Manifest::Parse(std::string_view text, Unit unit,
                         const std::filesystem::path& base_dir) {
  Manifest m;
  m.unit = unit;
  m.base_dir = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": expected path<TAB>text<TAB>split");
    }
    ManifestEntry e;
    e.image = line.substr(0, tab1);
    if (e.image.empty()) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": empty path");
    }
    try {
      e.text = DecodeUtf8(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
      e.split = ParseSplit(std::string_view(line).substr(tab2 + 1));
    } catch (const Error& err) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + err.what());
    }
    if (e.split == Split::kTrain && e.text.empty()) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": train entries need a non-empty ground truth");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest Manifest::Load(const std::filesystem::path& path, Unit unit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str(), unit, path.parent_path());
}

std::string Manifest::Serialize() const {
  std::string out;
  for (const auto& e : entries) {
    out += e.image.generic_string();
    out += '\t';
    out += EncodeUtf8(e.text);
    out += '\t';
    out += SplitName(e.split);
    out += '\n';
  }
  return out;
}

void Manifest::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << Serialize();
  if (!out) throw IoError("short write to " + path.string());
}

std::filesystem::path Manifest::Resolve(const ManifestEntry& entry) const {
  return entry.image.is_absolute() ? entry.image : base_dir / entry.image;
}

std::vector<ManifestEntry> Manifest::Select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

Dataset LoadDataset(const Manifest& manifest, Split split) {
  Dataset d;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    d.images.push_back(imaging::Preprocess(imaging::LoadImage(manifest.Resolve(e))));
    d.texts.push_back(e.text);
  }
  return d;
}

}  // namespace ctcocr::train
