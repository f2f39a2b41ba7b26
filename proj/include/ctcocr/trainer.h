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

#ifndef CTCOCR_TRAINER_H_
#define CTCOCR_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctcocr/alphabet.h"
#include "ctcocr/manifest.h"
#include "ctcocr/metrics.h"
#include "ctcocr/nn/checkpoint.h"
#include "ctcocr/nn/model.h"

namespace ctcocr::train {

// Sorted distinct code points of the train-split ground truths; line models
// also get the space. Throws kConfig when there is no train entry.
ctc::Alphabet BuildAlphabet(const Manifest& manifest);

struct TrainPlan {
  int epochs = 30;
  // Typically 64 for words and 16 for lines.
  int batch_size = 64;
  double learning_rate = 1e-4;
  Unit unit = Unit::kWord;
  // alphabet_size is filled in from the alphabet. Ignored when fine-tuning;
  // the source checkpoint's architecture is kept.
  nn::ModelConfig config;
  std::optional<nn::Checkpoint> fine_tune_from;
  // Train on ceil(real_fraction * n) seeded-random train entries.
  std::optional<double> real_fraction;
  std::uint64_t seed = 0;
  // End early once validation CA reaches 100.
  bool stop_at_perfect_validation = false;

  // Throws kConfig.
  void Validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_char_accuracy = 0.0;
  double val_seq_accuracy = 0.0;
  // Samples whose target needs more frames than the image provides.
  std::int64_t skipped_unreachable = 0;
};

struct TrainResult {
  nn::Checkpoint checkpoint;  // best validation CA
  std::vector<EpochLog> log;
  int best_epoch = 0;
  int train_size = 0;
};

// `epoch,mean_loss,val_CA,val_SA`
std::string TrainLogCsvHeader();
std::string TrainLogCsvRow(const EpochLog& e);

using EpochCallback = std::function<void(const EpochLog&)>;

// Single-threaded and deterministic for a fixed plan.seed. Throws kTraining
// when every target is unreachable or the loss stops being finite.
TrainResult Train(const TrainPlan& plan, const Manifest& manifest,
                  const EpochCallback& on_epoch = {});
// Same, on already loaded data.
TrainResult Train(const TrainPlan& plan, const Dataset& train_data,
                  const Dataset& val_data, const EpochCallback& on_epoch = {});

// A model restored from a checkpoint, ready for inference.
struct Recognizer {
  nn::Model model;
  ctc::Alphabet alphabet;
  Unit unit = Unit::kWord;

  // Throws kConfig on metadata that does not describe this model.
  static Recognizer FromCheckpoint(const nn::Checkpoint& ckpt);

  // Best-path transcription of a preprocessed (height 32) image.
  std::u32string Recognize(const imaging::GrayImage& image) const;
};

nn::Checkpoint MakeCheckpoint(const nn::Model& model, const ctc::Alphabet& alphabet,
                              Unit unit, nlohmann::ordered_json extra = {});

// Ground-truth characters outside the alphabet become U+FFFD, which is never
// predicted, and are counted in the report.
metrics::EvalReport Evaluate(const Recognizer& recognizer, const Dataset& data,
                             bool with_word_accuracy = false);
metrics::EvalReport Evaluate(const nn::Checkpoint& ckpt, const Manifest& manifest,
                             Split split);

}  // namespace ctcocr::train

#endif  // CTCOCR_TRAINER_H_
