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

#include "ctcocr/pipeline.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ctcocr/errors.h"

namespace ctcocr::pipeline {

DetectionSet DetectionSet::Parse(std::string_view text) {
  DetectionSet set;
  std::set<int> orders;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Box box;
    std::string unit;
    auto bad = [&](const std::string& why) {
      return FormatError("detection line " + std::to_string(line_no) + ": " + why);
    };
    if (!(fields >> box.x >> box.y >> box.width >> box.height >> box.order_index >> unit)) {
      throw bad("expected x y w h order_index unit [line_id]");
    }
    try {
      box.unit = train::ParseUnit(unit);
    } catch (const Error& e) {
      throw bad(e.what());
    }
    int line_id;
    if (fields >> line_id) box.line_id = line_id;
    std::string rest;
    if (fields.fail() && !fields.eof()) throw bad("line_id must be an integer");
    fields.clear();
    if (fields >> rest) throw bad("trailing field '" + rest + "'");
    if (!orders.insert(box.order_index).second) {
      throw bad("duplicate order_index " + std::to_string(box.order_index));
    }
    set.boxes.push_back(box);
  }
  return set;
}

DetectionSet DetectionSet::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str());
}

std::string DetectionSet::Serialize() const {
  std::ostringstream out;
  for (const Box& b : boxes) {
    out << b.x << ' ' << b.y << ' ' << b.width << ' ' << b.height << ' ' << b.order_index
        << ' ' << train::UnitName(b.unit);
    if (b.line_id) out << ' ' << *b.line_id;
    out << '\n';
  }
  return out.str();
}

PageResult RecognizePage(const imaging::GrayImage& page, const DetectionSet& detections,
                         const CropRecognizer& recognize) {
  std::vector<Box> boxes = detections.boxes;
  std::sort(boxes.begin(), boxes.end(),
            [](const Box& a, const Box& b) { return a.order_index < b.order_index; });
  PageResult result;
  std::optional<Box> previous;
  for (const Box& box : boxes) {
    BoxResult r{box, {}, std::nullopt};
    try {
      r.text = recognize(imaging::Preprocess(
          imaging::Crop(page, box.x, box.y, box.width, box.height)));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInvalidInput) throw;
      r.error = e.what();
      result.per_box.push_back(std::move(r));
      continue;
    }
    if (previous) {
      const bool same_line = box.unit == train::Unit::kWord &&
                             previous->unit == train::Unit::kWord &&
                             box.line_id == previous->line_id;
      result.text += same_line ? U" " : U"\n";
    }
    result.text += r.text;
    result.per_box.push_back(std::move(r));
    previous = box;
  }
  return result;
}

PageResult RecognizePage(const imaging::GrayImage& page, const DetectionSet& detections,
                         const train::Recognizer& recognizer) {
  for (const Box& b : detections.boxes) {
    if (b.unit != recognizer.unit) {
      throw ConfigError("detection box is a " + std::string(train::UnitName(b.unit)) +
                        " but the model recognizes " +
                        std::string(train::UnitName(recognizer.unit)) + "s");
    }
  }
  return RecognizePage(page, detections, [&](const imaging::GrayImage& crop) {
    return recognizer.Recognize(crop);
  });
}

metrics::EvalReport ScorePage(const PageResult& result, std::u32string_view ground_truth) {
  if (ground_truth.empty()) throw InvalidInput("empty page ground truth");
  const metrics::TextPair pair{result.text, std::u32string(ground_truth)};
  return metrics::Evaluate(std::span(&pair, 1), /*with_word_accuracy=*/true);
}

}  // namespace ctcocr::pipeline
