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

#ifndef CTCOCR_PIPELINE_H_
#define CTCOCR_PIPELINE_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctcocr/imaging.h"
#include "ctcocr/manifest.h"
#include "ctcocr/metrics.h"
#include "ctcocr/trainer.h"

namespace ctcocr::pipeline {

struct Box {
  int x = 0, y = 0, width = 0, height = 0;
  int order_index = 0;
  train::Unit unit = train::Unit::kWord;
  std::optional<int> line_id;
  friend bool operator==(const Box&, const Box&) = default;
};

// One record per line, whitespace separated:
//   x y w h order_index unit [line_id]
// Blank lines and lines starting with '#' are ignored.
struct DetectionSet {
  std::vector<Box> boxes;

  // Throws kFormat on malformed records or duplicate order indices.
  static DetectionSet Parse(std::string_view text);
  static DetectionSet Load(const std::filesystem::path& path);
  std::string Serialize() const;
};

struct BoxResult {
  Box box;
  std::u32string text;
  std::optional<std::string> error;  // set when the box was skipped
};

struct PageResult {
  std::u32string text;
  std::vector<BoxResult> per_box;  // in reading order
};

using CropRecognizer = std::function<std::u32string(const imaging::GrayImage&)>;

// Crops every box from `page` (any size, grey-scale), preprocesses it and
// transcribes it in order_index order. Word boxes sharing a line_id (all
// word boxes when none has one) are joined with one space, lines with a
// newline. A box leaving the page is recorded with an error and skipped.
PageResult RecognizePage(const imaging::GrayImage& page, const DetectionSet& detections,
                         const CropRecognizer& recognize);
// Throws kConfig when a box unit differs from the model unit.
PageResult RecognizePage(const imaging::GrayImage& page, const DetectionSet& detections,
                         const train::Recognizer& recognizer);

// CA of the page as a single pair, plus WA. Throws kInvalidInput on an
// empty ground truth.
metrics::EvalReport ScorePage(const PageResult& result, std::u32string_view ground_truth);

}  // namespace ctcocr::pipeline

#endif  // CTCOCR_PIPELINE_H_
