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

#ifndef CTCOCR_METRICS_H_
#define CTCOCR_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ctcocr::metrics {

// ISRI-style text recognition metrics. Everything operates on Unicode code
// points with no normalization; callers that want NFC etc. must apply it.

struct TextPair {
  std::u32string prediction;
  std::u32string ground_truth;
};

// Minimal number of single code point insertions, deletions and
// substitutions turning `a` into `b`.
std::int64_t Levenshtein(std::u32string_view a, std::u32string_view b);

// Length of the longest common subsequence of two token sequences.
std::int64_t LcsLength(std::span<const std::u32string> a,
                       std::span<const std::u32string> b);

// Corpus-pooled: (sum len(g) - sum LD(l, g)) / sum len(g) * 100. Negative
// when edits outnumber ground-truth characters. Throws kInvalidInput if the
// total ground-truth length is zero.
double CharAccuracy(std::span<const TextPair> pairs);

// Percentage of pairs whose prediction matches exactly.
double SeqAccuracy(std::span<const TextPair> pairs);

// sum |LCS(words(l), words(g))| / sum |words(g)| * 100, with words split on
// Unicode whitespace runs. Throws kInvalidInput when the ground truth has no
// words.
double WordAccuracy(std::u32string_view prediction_page,
                    std::u32string_view ground_truth_page);
double WordAccuracy(std::span<const TextPair> pages);

struct EvalReport {
  double char_accuracy = 0.0;
  double seq_accuracy = 0.0;
  std::optional<double> word_accuracy;
  std::int64_t total_gt_chars = 0;
  std::int64_t total_edit_distance = 0;
  std::int64_t n_samples = 0;
  // Ground-truth characters outside the model alphabet. They can never be
  // predicted, so they always count as errors.
  std::int64_t out_of_alphabet_chars = 0;

  double char_error_rate() const { return 100.0 - char_accuracy; }

  nlohmann::ordered_json ToJson() const;
  static std::string CsvHeader();
  std::string ToCsvRow() const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// CA and SA over the pairs; WA as well when `with_word_accuracy`.
EvalReport Evaluate(std::span<const TextPair> pairs,
                    bool with_word_accuracy = false);

}  // namespace ctcocr::metrics

#endif  // CTCOCR_METRICS_H_
