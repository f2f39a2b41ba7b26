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

#ifndef CTCOCR_CTC_H_
#define CTCOCR_CTC_H_

#include <cstdint>

#include "ctcocr/alphabet.h"
#include "ctcocr/types.h"

namespace ctcocr::ctc {

// T x |L'| per-frame class distributions, held in natural-log space.
// Zero probabilities are represented by -infinity.
class Posteriorgram {
 public:
  Posteriorgram() = default;

  // Validates that every entry is in [0,1] and every row sums to 1 within
  // 1e-6. Throws kInvalidInput otherwise.
  static Posteriorgram FromProbabilities(const Matrix& probs);
  // Row-wise log-softmax of pre-softmax activations.
  static Posteriorgram FromLogits(const Matrix& logits);

  int frames() const { return static_cast<int>(log_probs_.rows()); }
  int classes() const { return static_cast<int>(log_probs_.cols()); }
  const Matrix& log_probs() const { return log_probs_; }
  Matrix probs() const { return log_probs_.array().exp().matrix(); }

 private:
  explicit Posteriorgram(Matrix log_probs) : log_probs_(std::move(log_probs)) {}
  Matrix log_probs_;
};

struct CtcLossResult {
  // -ln p(l|x); +infinity when the target is unreachable in T frames.
  double loss = 0.0;
  // d loss / d a where y = softmax(a) row-wise, i.e. the gradient with
  // respect to the pre-softmax activations. For a posteriorgram built from
  // probabilities, a = ln y. All zeros when unreachable.
  Matrix grad;
  bool reachable = true;
};

// Merges adjacent duplicates, then removes blanks.
Labelling Collapse(const Path& path, const Alphabet& alphabet);

// Frames needed to emit `labelling`: its length plus one separating blank per
// adjacent repeat.
int MinimumFrames(const Labelling& labelling);

// prod_t y_t(path_t), evaluated in log space.
double PathProbability(const Path& path, const Posteriorgram& y);

// Exact p(l|x) by enumerating every path in L'^T. Throws kCapacity when
// |L'|^T exceeds kMaxEnumeratedPaths.
inline constexpr std::int64_t kMaxEnumeratedPaths = 10'000'000;
double LabellingProbabilityBruteForce(const Labelling& labelling,
                                      const Posteriorgram& y,
                                      const Alphabet& alphabet);

// Forward-backward over the blank-interleaved target ~l1~l2~...~lN~.
CtcLossResult CtcLoss(const Labelling& labelling, const Posteriorgram& y,
                      const Alphabet& alphabet);

// Per-frame argmax (lowest class index wins ties), then Collapse.
Path BestPath(const Posteriorgram& y);
Labelling BestPathDecode(const Posteriorgram& y, const Alphabet& alphabet);

}  // namespace ctcocr::ctc

#endif  // CTCOCR_CTC_H_
