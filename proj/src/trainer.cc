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

#include "ctcocr/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "ctcocr/ctc.h"
#include "ctcocr/errors.h"
#include "ctcocr/nn/optimizer.h"
#include "ctcocr/utf8.h"

namespace ctcocr::train {
namespace {

using nlohmann::ordered_json;

constexpr char32_t kUnknownChar = U'\uFFFD';

// Independent streams derived from the plan seed.
enum class Stream : std::uint32_t { kSubset = 1, kShuffle = 2 };

std::mt19937_64 MakeRng(std::uint64_t seed, Stream stream, std::uint32_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), index};
  return std::mt19937_64(seq);
}

// Seeded shuffle, then batches of similar width within blocks of eight
// batches so that CNN models pad little; batch order is shuffled again.
std::vector<std::vector<int>> MakeBatches(const Dataset& data, int batch_size,
                                          std::mt19937_64& rng) {
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const size_t block = static_cast<size_t>(batch_size) * 8;
  for (size_t start = 0; start < order.size(); start += block) {
    const auto end = order.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(order.size(), start + block));
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start), end,
                     [&](int a, int b) {
                       return data.images[a].width() < data.images[b].width();
                     });
  }
  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(order.size(), start + batch_size)));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

Dataset Subset(const Dataset& data, double fraction, std::uint64_t seed) {
  const size_t n =
      static_cast<size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  auto rng = MakeRng(seed, Stream::kSubset);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(n, order.size()));
  std::sort(order.begin(), order.end());
  Dataset out;
  for (size_t i : order) {
    out.images.push_back(data.images[i]);
    out.texts.push_back(data.texts[i]);
  }
  return out;
}

ctc::Alphabet AlphabetFromTexts(const std::vector<std::u32string>& texts, Unit unit) {
  std::set<char32_t> chars;
  for (const auto& t : texts) chars.insert(t.begin(), t.end());
  if (unit == Unit::kLine) chars.insert(U' ');
  return ctc::Alphabet(std::u32string(chars.begin(), chars.end()));
}

}  // namespace

ctc::Alphabet BuildAlphabet(const Manifest& manifest) {
  std::vector<std::u32string> texts;
  for (const auto& e : manifest.entries) {
    if (e.split == Split::kTrain) texts.push_back(e.text);
  }
  if (texts.empty()) throw ConfigError("manifest has no train entries");
  return AlphabetFromTexts(texts, manifest.unit);
}

void TrainPlan::Validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (real_fraction && !(*real_fraction > 0.0 && *real_fraction <= 1.0)) {
    throw ConfigError("real_fraction must lie in (0, 1]");
  }
}

std::string TrainLogCsvHeader() { return "epoch,mean_loss,val_CA,val_SA"; }

std::string TrainLogCsvRow(const EpochLog& e) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.4f", e.epoch, e.mean_loss,
                e.val_char_accuracy, e.val_seq_accuracy);
  return buf;
}

nn::Checkpoint MakeCheckpoint(const nn::Model& model, const ctc::Alphabet& alphabet,
                              Unit unit, ordered_json extra) {
  nn::Checkpoint ckpt;
  ckpt.metadata["model"] = model.config().ToJson();
  ckpt.metadata["alphabet"] = EncodeUtf8(alphabet.labels());
  ckpt.metadata["blank_index"] = alphabet.blank();
  ckpt.metadata["unit"] = std::string(UnitName(unit));
  if (extra.is_object()) {
    for (auto& [key, value] : extra.items()) ckpt.metadata[key] = value;
  }
  ckpt.arrays = nn::CaptureArrays(model);
  return ckpt;
}

Recognizer Recognizer::FromCheckpoint(const nn::Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  for (const char* key : {"model", "alphabet", "blank_index", "unit"}) {
    if (!meta.contains(key)) {
      throw ConfigError(std::string("checkpoint metadata lacks '") + key + "'");
    }
  }
  ctc::Alphabet alphabet;
  Unit unit;
  nn::ModelConfig cfg;
  try {
    alphabet = ctc::Alphabet(DecodeUtf8(meta.at("alphabet").get<std::string>()),
                             meta.at("blank_index").get<int>());
    unit = ParseUnit(meta.at("unit").get<std::string>());
    cfg = nn::ModelConfig::FromJson(nlohmann::json::parse(meta.at("model").dump()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint metadata: ") + e.what());
  }
  if (cfg.alphabet_size != alphabet.size()) {
    throw ConfigError("checkpoint alphabet has " + std::to_string(alphabet.size()) +
                      " classes but the model outputs " + std::to_string(cfg.alphabet_size));
  }
  nn::Model model(cfg, 0);
  nn::RestoreArrays(model, ckpt.arrays);
  return Recognizer{std::move(model), std::move(alphabet), unit};
}

std::u32string Recognizer::Recognize(const imaging::GrayImage& image) const {
  return alphabet.Decode(ctc::BestPathDecode(model.Forward(image), alphabet));
}

metrics::EvalReport Evaluate(const Recognizer& recognizer, const Dataset& data,
                             bool with_word_accuracy) {
  std::vector<metrics::TextPair> pairs;
  pairs.reserve(data.size());
  std::int64_t unknown = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    std::u32string gt = data.texts[i];
    for (char32_t& c : gt) {
      if (!recognizer.alphabet.Contains(c)) {
        c = kUnknownChar;
        ++unknown;
      }
    }
    pairs.push_back({recognizer.Recognize(data.images[i]), std::move(gt)});
  }
  auto report = metrics::Evaluate(pairs, with_word_accuracy);
  report.out_of_alphabet_chars = unknown;
  return report;
}

metrics::EvalReport Evaluate(const nn::Checkpoint& ckpt, const Manifest& manifest,
                             Split split) {
  const auto recognizer = Recognizer::FromCheckpoint(ckpt);
  if (recognizer.unit != manifest.unit) {
    throw ConfigError("checkpoint was trained on " + std::string(UnitName(recognizer.unit)) +
                      " images but the manifest holds " +
                      std::string(UnitName(manifest.unit)) + " images");
  }
  return Evaluate(recognizer, LoadDataset(manifest, split),
                  manifest.unit == Unit::kLine);
}

TrainResult Train(const TrainPlan& plan, const Manifest& manifest,
                  const EpochCallback& on_epoch) {
  if (manifest.unit != plan.unit) {
    throw ConfigError("plan unit and manifest unit differ");
  }
  return Train(plan, LoadDataset(manifest, Split::kTrain), LoadDataset(manifest, Split::kVal),
               on_epoch);
}

TrainResult Train(const TrainPlan& plan, const Dataset& train_data, const Dataset& val_data,
                  const EpochCallback& on_epoch) {
  plan.Validate();
  if (train_data.size() == 0) throw ConfigError("train split is empty");
  if (val_data.size() == 0) throw ConfigError("validation split is empty");

  const Dataset train = plan.real_fraction
                            ? Subset(train_data, *plan.real_fraction, plan.seed)
                            : train_data;

  std::optional<Recognizer> start;
  if (plan.fine_tune_from) {
    start = Recognizer::FromCheckpoint(*plan.fine_tune_from);
    if (start->unit != plan.unit) throw ConfigError("fine-tuning across units");
  }
  const ctc::Alphabet alphabet =
      start ? start->alphabet : AlphabetFromTexts(train.texts, plan.unit);
  nn::ModelConfig cfg = start ? start->model.config() : plan.config;
  cfg.alphabet_size = alphabet.size();
  nn::Model model(cfg, plan.seed);
  if (start) nn::RestoreArrays(model, nn::CaptureArrays(start->model));

  std::vector<ctc::Labelling> targets;
  for (const auto& t : train.texts) {
    try {
      targets.push_back(alphabet.Encode(t));
    } catch (const Error& e) {
      throw ConfigError(std::string("train text not covered by the alphabet: ") + e.what());
    }
  }

  nn::RmsProp optimizer({plan.learning_rate, 0.9, 1e-8});
  TrainResult result;
  result.train_size = static_cast<int>(train.size());
  double best_ca = -std::numeric_limits<double>::infinity();
  std::vector<nn::NamedArray> best_arrays;
  EpochLog best_log;

  for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
    auto rng = MakeRng(plan.seed, Stream::kShuffle, static_cast<std::uint32_t>(epoch));
    double loss_sum = 0.0;
    std::int64_t reachable = 0, skipped = 0;
    for (const auto& batch : MakeBatches(train, plan.batch_size, rng)) {
      std::vector<imaging::GrayImage> images;
      for (int i : batch) images.push_back(train.images[i]);
      nn::Model::Tape tape;
      const auto logits = model.ForwardBatch(images, /*training=*/true, &tape);
      std::vector<Matrix> dlogits(batch.size());
      std::vector<double> losses;
      for (size_t b = 0; b < batch.size(); ++b) {
        auto r = ctc::CtcLoss(targets[batch[b]], ctc::Posteriorgram::FromLogits(logits[b]),
                              alphabet);
        if (!r.reachable) {
          ++skipped;
          dlogits[b] = Matrix::Zero(logits[b].rows(), logits[b].cols());
          continue;
        }
        if (!std::isfinite(r.loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                              " on sample '" + EncodeUtf8(train.texts[batch[b]]) +
                              "' (width " + std::to_string(images[b].width()) + ")");
        }
        losses.push_back(r.loss);
        dlogits[b] = std::move(r.grad);
      }
      if (losses.empty()) continue;
      const double scale = 1.0 / static_cast<double>(losses.size());
      for (auto& d : dlogits) d *= scale;
      for (double l : losses) loss_sum += l;
      reachable += static_cast<std::int64_t>(losses.size());
      model.ZeroGrad();
      model.Backward(tape, dlogits);
      auto params = model.Params();
      try {
        optimizer.Step(params);
      } catch (const Error& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      model.UpdateRunningStats(tape);
    }
    if (reachable == 0) {
      throw TrainingError("every training target is unreachable: images are too narrow "
                          "for their transcriptions");
    }

    Recognizer current{model, alphabet, plan.unit};
    const auto report = Evaluate(current, val_data);
    EpochLog log{epoch, loss_sum / static_cast<double>(reachable), report.char_accuracy,
                 report.seq_accuracy, skipped};
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (report.char_accuracy > best_ca) {
      best_ca = report.char_accuracy;
      best_arrays = nn::CaptureArrays(model);
      best_log = log;
    }
    // Nothing can beat a perfect score, so the result is unchanged.
    if (plan.stop_at_perfect_validation && best_ca >= 100.0) break;
  }

  nn::RestoreArrays(model, best_arrays);
  result.best_epoch = best_log.epoch;
  result.checkpoint = MakeCheckpoint(
      model, alphabet, plan.unit,
      {{"epoch", best_log.epoch},
       {"val_char_accuracy", best_log.val_char_accuracy},
       {"val_seq_accuracy", best_log.val_seq_accuracy},
       {"loss_reduction", "mean"},
       {"seed", plan.seed},
       {"learning_rate", plan.learning_rate},
       {"batch_size", plan.batch_size},
       {"train_size", result.train_size},
       {"fine_tuned", plan.fine_tune_from.has_value()}});
  return result;
}

}  // namespace ctcocr::train
