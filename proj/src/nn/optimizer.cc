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

#include "ctcocr/nn/optimizer.h"

#include "ctcocr/errors.h"

namespace ctcocr::nn {

void RmsProp::Step(std::span<ParamArray* const> params) {
  for (const ParamArray* p : params) {
    if (p->trainable && !p->grad.allFinite()) {
      throw NumericError("non-finite gradient in " + p->name +
                         "; optimizer step aborted");
    }
  }
  if (square_avg_.empty()) {
    for (const ParamArray* p : params) square_avg_.push_back(Vector::Zero(p->size()));
  }
  if (square_avg_.size() != params.size()) {
    throw ConfigError("optimizer state was built for a different parameter list");
  }
  const double a = options_.alpha;
  for (size_t i = 0; i < params.size(); ++i) {
    ParamArray& p = *params[i];
    if (!p.trainable) continue;
    Vector& v = square_avg_[i];
    v = a * v.array() + (1.0 - a) * p.grad.array().square();
    p.values.array() -=
        options_.learning_rate * p.grad.array() / (v.array().sqrt() + options_.epsilon);
  }
}

}  // namespace ctcocr::nn
