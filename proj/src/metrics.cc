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

#include "ctcocr/metrics.h"

#include <algorithm>
#include <cstdio>

#include "ctcocr/errors.h"
#include "ctcocr/utf8.h"

namespace ctcocr::metrics {

std::int64_t Levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Single-row DP over the shorter string.
  std::vector<std::int64_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<std::int64_t>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    std::int64_t diag = row[0];
    row[0] = static_cast<std::int64_t>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const std::int64_t up = row[j];
      const std::int64_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

std::int64_t LcsLength(std::span<const std::u32string> a,
                       std::span<const std::u32string> b) {
  std::vector<std::int64_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double CharAccuracy(std::span<const TextPair> pairs) {
  std::int64_t total = 0;
  std::int64_t edits = 0;
  for (const auto& p : pairs) {
    total += static_cast<std::int64_t>(p.ground_truth.size());
    edits += Levenshtein(p.prediction, p.ground_truth);
  }
  if (total == 0) {
    throw InvalidInput("character accuracy is undefined for empty ground truth");
  }
  return static_cast<double>(total - edits) / static_cast<double>(total) *
         100.0;
}

double SeqAccuracy(std::span<const TextPair> pairs) {
  if (pairs.empty()) {
    throw InvalidInput("sequence accuracy needs at least one sample");
  }
  const auto exact = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) {
    return p.prediction == p.ground_truth;
  });
  return 100.0 * static_cast<double>(exact) / static_cast<double>(pairs.size());
}

double WordAccuracy(std::u32string_view prediction_page,
                    std::u32string_view ground_truth_page) {
  const TextPair page{std::u32string(prediction_page),
                      std::u32string(ground_truth_page)};
  return WordAccuracy(std::span<const TextPair>(&page, 1));
}

double WordAccuracy(std::span<const TextPair> pages) {
  std::int64_t common = 0;
  std::int64_t total = 0;
  for (const auto& p : pages) {
    const auto pred = SplitWords(p.prediction);
    const auto gt = SplitWords(p.ground_truth);
    common += LcsLength(pred, gt);
    total += static_cast<std::int64_t>(gt.size());
  }
  if (total == 0) {
    throw InvalidInput("word accuracy is undefined for a ground truth with no words");
  }
  return static_cast<double>(common) / static_cast<double>(total) * 100.0;
}

EvalReport Evaluate(std::span<const TextPair> pairs, bool with_word_accuracy) {
  EvalReport report;
  report.n_samples = static_cast<std::int64_t>(pairs.size());
  for (const auto& p : pairs) {
    report.total_gt_chars += static_cast<std::int64_t>(p.ground_truth.size());
    report.total_edit_distance += Levenshtein(p.prediction, p.ground_truth);
  }
  report.char_accuracy = CharAccuracy(pairs);
  report.seq_accuracy = SeqAccuracy(pairs);
  if (with_word_accuracy) report.word_accuracy = WordAccuracy(pairs);
  return report;
}

nlohmann::ordered_json EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  j["char_accuracy"] = char_accuracy;
  j["char_error_rate"] = char_error_rate();
  j["seq_accuracy"] = seq_accuracy;
  j["word_accuracy"] =
      word_accuracy ? nlohmann::ordered_json(*word_accuracy) : nullptr;
  j["total_gt_chars"] = total_gt_chars;
  j["total_edit_distance"] = total_edit_distance;
  j["n_samples"] = n_samples;
  j["out_of_alphabet_chars"] = out_of_alphabet_chars;
  return j;
}

std::string EvalReport::CsvHeader() {
  return "char_accuracy,char_error_rate,seq_accuracy,word_accuracy,"
         "total_gt_chars,total_edit_distance,n_samples,out_of_alphabet_chars";
}

std::string EvalReport::ToCsvRow() const {
  char buf[256];
  std::string wa;
  if (word_accuracy) {
    char w[32];
    std::snprintf(w, sizeof(w), "%.4f", *word_accuracy);
    wa = w;
  }
  std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%s,%lld,%lld,%lld,%lld",
                char_accuracy, char_error_rate(), seq_accuracy, wa.c_str(),
                static_cast<long long>(total_gt_chars),
                static_cast<long long>(total_edit_distance),
                static_cast<long long>(n_samples),
                static_cast<long long>(out_of_alphabet_chars));
  return buf;
}

}  // namespace ctcocr::metrics
