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

#include "ctcocr/ctc.h"

#include <cmath>
#include <limits>
#include <string>

#include "ctcocr/errors.h"

namespace ctcocr::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void CheckClasses(const Path& seq, int num_classes) {
  for (int k : seq) {
    if (k < 0 || k >= num_classes) {
      throw InvalidInput("class index " + std::to_string(k) +
                         " out of range for |L'| = " +
                         std::to_string(num_classes));
    }
  }
}

void CheckLabelling(const Labelling& labelling, const Alphabet& alphabet) {
  CheckClasses(labelling, alphabet.size());
  for (int k : labelling) {
    if (alphabet.IsBlank(k)) {
      throw InvalidInput("target labelling contains the blank class");
    }
  }
}

void CheckCompatible(const Posteriorgram& y, const Alphabet& alphabet) {
  if (y.classes() != alphabet.size()) {
    throw InvalidInput("posteriorgram has " + std::to_string(y.classes()) +
                       " classes but the alphabet has " +
                       std::to_string(alphabet.size()));
  }
}

}  // namespace

Posteriorgram Posteriorgram::FromProbabilities(const Matrix& probs) {
  if (probs.rows() < 1 || probs.cols() < 1) {
    throw InvalidInput("posteriorgram needs at least one frame and one class");
  }
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const double p = probs(t, k);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidInput("posteriorgram entry (" + std::to_string(t) + ", " +
                           std::to_string(k) + ") outside [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InvalidInput("posteriorgram frame " + std::to_string(t) +
                         " sums to " + std::to_string(sum));
    }
  }
  return Posteriorgram(probs.array().log().matrix());
}

Posteriorgram Posteriorgram::FromLogits(const Matrix& logits) {
  if (logits.rows() < 1 || logits.cols() < 1) {
    throw InvalidInput("posteriorgram needs at least one frame and one class");
  }
  if (!logits.allFinite()) throw InvalidInput("non-finite logits");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse =
        m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return Posteriorgram(std::move(out));
}

Labelling Collapse(const Path& path, const Alphabet& alphabet) {
  CheckClasses(path, alphabet.size());
  Labelling out;
  int prev = -1;
  for (int k : path) {
    if (k != prev && !alphabet.IsBlank(k)) out.push_back(k);
    prev = k;
  }
  return out;
}

int MinimumFrames(const Labelling& labelling) {
  int n = static_cast<int>(labelling.size());
  for (size_t i = 1; i < labelling.size(); ++i) {
    if (labelling[i] == labelling[i - 1]) ++n;
  }
  return n;
}

double PathProbability(const Path& path, const Posteriorgram& y) {
  if (static_cast<int>(path.size()) != y.frames()) {
    throw InvalidInput("path length " + std::to_string(path.size()) +
                       " differs from posteriorgram length " +
                       std::to_string(y.frames()));
  }
  CheckClasses(path, y.classes());
  double log_p = 0.0;
  for (int t = 0; t < y.frames(); ++t) log_p += y.log_probs()(t, path[t]);
  return std::exp(log_p);
}

double LabellingProbabilityBruteForce(const Labelling& labelling,
                                      const Posteriorgram& y,
                                      const Alphabet& alphabet) {
  CheckCompatible(y, alphabet);
  CheckLabelling(labelling, alphabet);
  const int frames = y.frames();
  const int classes = y.classes();
  std::int64_t count = 1;
  for (int t = 0; t < frames; ++t) {
    count *= classes;
    if (count > kMaxEnumeratedPaths) {
      throw CapacityError("|L'|^T = " + std::to_string(classes) + "^" +
                          std::to_string(frames) +
                          " paths exceeds the enumeration limit");
    }
  }
  if (static_cast<int>(labelling.size()) > frames) return 0.0;

  double total = 0.0;
  Path path(frames, 0);
  for (std::int64_t i = 0; i < count; ++i) {
    if (Collapse(path, alphabet) == labelling) {
      total += PathProbability(path, y);
    }
    // odometer increment
    for (int t = frames - 1; t >= 0; --t) {
      if (++path[t] < classes) break;
      path[t] = 0;
    }
  }
  return total;
}

CtcLossResult CtcLoss(const Labelling& labelling, const Posteriorgram& y,
                      const Alphabet& alphabet) {
  CheckCompatible(y, alphabet);
  CheckLabelling(labelling, alphabet);
  const int frames = y.frames();
  const int classes = y.classes();
  const Matrix& lp = y.log_probs();

  CtcLossResult result;
  result.grad = Matrix::Zero(frames, classes);
  if (MinimumFrames(labelling) > frames) {
    result.loss = std::numeric_limits<double>::infinity();
    result.reachable = false;
    return result;
  }

  // Augmented sequence: blank, l1, blank, l2, ..., lN, blank.
  const int states = 2 * static_cast<int>(labelling.size()) + 1;
  std::vector<int> ext(states, alphabet.blank());
  for (size_t n = 0; n < labelling.size(); ++n) ext[2 * n + 1] = labelling[n];
  auto can_skip = [&](int s) {
    return s >= 2 && !alphabet.IsBlank(ext[s]) && ext[s] != ext[s - 2];
  };

  // alpha(t, s): log prob of frames 0..t ending in state s (emission at t
  // included). beta(t, s): log prob of frames t+1..T-1 given state s at t.
  Matrix alpha = Matrix::Constant(frames, states, kNegInf);
  Matrix beta = Matrix::Constant(frames, states, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (states > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = LogAdd(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = LogAdd(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + lp(t, ext[s]);
    }
  }
  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + lp(t + 1, ext[s]);
      if (s + 1 < states) {
        acc = LogAdd(acc, beta(t + 1, s + 1) + lp(t + 1, ext[s + 1]));
      }
      if (s + 2 < states && can_skip(s + 2)) {
        acc = LogAdd(acc, beta(t + 1, s + 2) + lp(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }

  double log_p = alpha(frames - 1, states - 1);
  if (states > 1) log_p = LogAdd(log_p, alpha(frames - 1, states - 2));
  if (log_p == kNegInf) {
    // Reachable by length but every admissible path has zero probability.
    result.loss = std::numeric_limits<double>::infinity();
    result.reachable = false;
    return result;
  }
  result.loss = -log_p;

  // d loss / d a_tk = y_tk - (1/p) sum_{s: ext[s]=k} alpha_t(s) beta_t(s)
  std::vector<double> occupancy(classes);
  for (int t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (int s = 0; s < states; ++s) {
      occupancy[ext[s]] =
          LogAdd(occupancy[ext[s]], alpha(t, s) + beta(t, s));
    }
    for (int k = 0; k < classes; ++k) {
      result.grad(t, k) =
          std::exp(lp(t, k)) - std::exp(occupancy[k] - log_p);
    }
  }
  return result;
}

Path BestPath(const Posteriorgram& y) {
  Path path(y.frames());
  const Matrix& lp = y.log_probs();
  for (int t = 0; t < y.frames(); ++t) {
    int best = 0;
    for (int k = 1; k < y.classes(); ++k) {
      if (lp(t, k) > lp(t, best)) best = k;
    }
    path[t] = best;
  }
  return path;
}

Labelling BestPathDecode(const Posteriorgram& y, const Alphabet& alphabet) {
  CheckCompatible(y, alphabet);
  return Collapse(BestPath(y), alphabet);
}

}  // namespace ctcocr::ctc
