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

#ifndef CTCOCR_ALPHABET_H_
#define CTCOCR_ALPHABET_H_

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctcocr::ctc {

// A labelling or a path is a sequence of class indices into the augmented
// alphabet L' (labels plus blank). A Labelling never contains the blank class.
using Labelling = std::vector<int>;
using Path = std::vector<int>;

// Output alphabet L with the blank label spliced in at `blank_index` to form
// L'. Class k != blank maps to label (k < blank ? k : k - 1).
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::u32string labels, int blank_index = 0);

  // |L'|
  int size() const { return static_cast<int>(labels_.size()) + 1; }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  int blank() const { return blank_; }
  const std::u32string& labels() const { return labels_; }

  bool IsBlank(int cls) const { return cls == blank_; }
  char32_t LabelOf(int cls) const;
  std::optional<int> ClassOf(char32_t c) const;
  bool Contains(char32_t c) const { return ClassOf(c).has_value(); }

  // Throws kInvalidInput on a character outside L.
  Labelling Encode(std::u32string_view text) const;
  std::u32string Decode(const Labelling& labelling) const;

  friend bool operator==(const Alphabet& a, const Alphabet& b) {
    return a.labels_ == b.labels_ && a.blank_ == b.blank_;
  }

 private:
  std::u32string labels_;
  int blank_ = 0;
  std::unordered_map<char32_t, int> class_of_;
};

}  // namespace ctcocr::ctc

#endif  // CTCOCR_ALPHABET_H_
