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

#include "ctcocr/alphabet.h"

#include <cstdio>

#include "ctcocr/errors.h"
#include "ctcocr/utf8.h"

namespace ctcocr::ctc {

Alphabet::Alphabet(std::u32string labels, int blank_index)
    : labels_(std::move(labels)), blank_(blank_index) {
  if (blank_ < 0 || blank_ > static_cast<int>(labels_.size())) {
    throw InvalidInput("blank index " + std::to_string(blank_index) +
                       " outside [0, " + std::to_string(labels_.size()) + "]");
  }
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    const int cls = i < blank_ ? i : i + 1;
    if (!class_of_.emplace(labels_[i], cls).second) {
      throw InvalidInput("duplicate label '" + EncodeUtf8(labels_[i]) +
                         "' in alphabet");
    }
  }
}

char32_t Alphabet::LabelOf(int cls) const {
  if (cls < 0 || cls >= size() || cls == blank_) {
    throw InvalidInput("class index " + std::to_string(cls) +
                       " is not a label of an alphabet of size " +
                       std::to_string(size()));
  }
  return labels_[cls < blank_ ? cls : cls - 1];
}

std::optional<int> Alphabet::ClassOf(char32_t c) const {
  auto it = class_of_.find(c);
  if (it == class_of_.end()) return std::nullopt;
  return it->second;
}

Labelling Alphabet::Encode(std::u32string_view text) const {
  Labelling out;
  out.reserve(text.size());
  for (char32_t c : text) {
    auto cls = ClassOf(c);
    if (!cls) {
      char code[16];
      std::snprintf(code, sizeof(code), "U+%04X", static_cast<unsigned>(c));
      throw InvalidInput("character '" + EncodeUtf8(c) + "' (" + code +
                         ") is not in the alphabet");
    }
    out.push_back(*cls);
  }
  return out;
}

std::u32string Alphabet::Decode(const Labelling& labelling) const {
  std::u32string out;
  out.reserve(labelling.size());
  for (int cls : labelling) out.push_back(LabelOf(cls));
  return out;
}

}  // namespace ctcocr::ctc
