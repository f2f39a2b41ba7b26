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

#ifndef CTCOCR_NN_OPTIMIZER_H_
#define CTCOCR_NN_OPTIMIZER_H_

#include <span>
#include <vector>

#include "ctcocr/nn/layers.h"

namespace ctcocr::nn {

struct RmsPropOptions {
  double learning_rate = 1e-3;
  double alpha = 0.9;
  double epsilon = 1e-8;
};

// v <- alpha v + (1 - alpha) g^2;  p <- p - lr g / (sqrt(v) + eps)
// Buffers (trainable == false) are skipped.
class RmsProp {
 public:
  explicit RmsProp(RmsPropOptions options = {}) : options_(options) {}

  // Throws kNumeric, leaving parameters and state untouched, if any gradient
  // is non-finite.
  void Step(std::span<ParamArray* const> params);

  const RmsPropOptions& options() const { return options_; }
  const std::vector<Vector>& square_averages() const { return square_avg_; }

 private:
  RmsPropOptions options_;
  std::vector<Vector> square_avg_;
};

}  // namespace ctcocr::nn

#endif  // CTCOCR_NN_OPTIMIZER_H_
