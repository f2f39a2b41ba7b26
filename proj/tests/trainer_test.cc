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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "ctcocr/errors.h"
#include "ctcocr/synthgen.h"

namespace ctcocr::train {
namespace {

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kInvalidInput;
}

std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ctcocr_trainer_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(ManifestTest, ParsesRecordsAndResolvesRelativePaths) {
  const auto m = Manifest::Parse("a.png\tab\ttrain\n\n/abs/b.pgm\tc d\tval\r\nc.pgm\t\ttest\n",
                                 Unit::kLine, "/data");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[0].text, U"ab");
  EXPECT_EQ(m.entries[1].split, Split::kVal);
  EXPECT_EQ(m.entries[1].text, U"c d");
  EXPECT_EQ(m.Resolve(m.entries[0]), std::filesystem::path("/data/a.png"));
  EXPECT_EQ(m.Resolve(m.entries[1]), std::filesystem::path("/abs/b.pgm"));
  EXPECT_TRUE(m.entries[2].text.empty());
  EXPECT_EQ(m.Select(Split::kTrain).size(), 1u);
  const auto again = Manifest::Parse(m.Serialize(), Unit::kLine, "/data");
  ASSERT_EQ(again.entries.size(), 3u);
  EXPECT_EQ(again.entries[1].image, m.entries[1].image);
}

TEST(ManifestTest, RejectsMalformedRecords) {
  for (const char* bad : {"a.png\tab\n", "a.png\tab\ttrain\textra\n", "a.png\tab\tdev\n",
                          "a.png\t\ttrain\n", "\tab\ttrain\n", "a.png\t\xff\ttrain\n"}) {
    EXPECT_EQ(KindOf([&] { Manifest::Parse(bad, Unit::kWord, "."); }), ErrorKind::kFormat)
        << bad;
  }
  EXPECT_EQ(KindOf([] { Manifest::Load("/nonexistent/manifest.tsv", Unit::kWord); }),
            ErrorKind::kIo);
}

Manifest TextsOnly(std::vector<std::u32string> train_texts, Unit unit) {
  Manifest m;
  m.unit = unit;
  for (auto& t : train_texts) m.entries.push_back({"x.pgm", std::move(t), Split::kTrain});
  m.entries.push_back({"v.pgm", U"zzz", Split::kVal});
  return m;
}

TEST(BuildAlphabetTest, SortedDistinctTrainCodePoints) {
  const auto a = BuildAlphabet(TextsOnly({U"bc", U"ab"}, Unit::kWord));
  EXPECT_EQ(a.labels(), U"abc");
  EXPECT_EQ(a.size(), 4);
  EXPECT_EQ(a.blank(), 0);
}

TEST(BuildAlphabetTest, LineUnitAddsSpace) {
  const auto a = BuildAlphabet(TextsOnly({U"ab", U"bc"}, Unit::kLine));
  EXPECT_EQ(a.labels(), U" abc");
  EXPECT_EQ(BuildAlphabet(TextsOnly({U"a b", U"c"}, Unit::kLine)).labels(), U" abc");
}

TEST(BuildAlphabetTest, IndependentOfOrderAndIgnoresOtherSplits) {
  EXPECT_EQ(BuildAlphabet(TextsOnly({U"xy", U"ab", U"ya"}, Unit::kWord)),
            BuildAlphabet(TextsOnly({U"ya", U"xy", U"ab"}, Unit::kWord)));
}

TEST(BuildAlphabetTest, EmptyTrainSplitIsConfigError) {
  Manifest m;
  m.entries.push_back({"v.pgm", U"a", Split::kVal});
  EXPECT_EQ(KindOf([&] { BuildAlphabet(m); }), ErrorKind::kConfig);
}

TEST(TrainPlanTest, Validation) {
  TrainPlan plan;
  plan.epochs = 0;
  EXPECT_EQ(KindOf([&] { plan.Validate(); }), ErrorKind::kConfig);
  plan.epochs = 1;
  for (double f : {0.0, -0.5, 1.5}) {
    plan.real_fraction = f;
    EXPECT_EQ(KindOf([&] { plan.Validate(); }), ErrorKind::kConfig) << f;
  }
  plan.real_fraction = 1.0;
  EXPECT_NO_THROW(plan.Validate());
}

// A small rendered digit corpus shared by the training tests.
struct ToyData {
  Dataset train, val;
};

const ToyData& Toy() {
  static const ToyData* data = [] {
    synth::Synthesizer s;
    const auto lexicon = synth::RandomLexicon(30, U"0123", 1, 3, 5);
    auto* d = new ToyData;
    std::mt19937_64 rng(17);
    for (int i = 0; i < 90; ++i) {
      const auto& word = lexicon[i % lexicon.size()];
      auto image = s.Render(s.SampleSpec(word, rng)).image;
      Dataset& target = i < 70 ? d->train : d->val;
      target.images.push_back(std::move(image));
      target.texts.push_back(word);
    }
    return d;
  }();
  return *data;
}

TrainPlan SmallPlan() {
  TrainPlan plan;
  plan.epochs = 3;
  plan.batch_size = 8;
  plan.learning_rate = 1e-3;
  plan.config = nn::ModelConfig::Preset("crnn-check", 0);
  plan.seed = 99;
  return plan;
}

TEST(TrainTest, BestCheckpointAndLogContract) {
  const auto& toy = Toy();
  std::vector<EpochLog> seen;
  const auto result =
      Train(SmallPlan(), toy.train, toy.val, [&](const EpochLog& e) { seen.push_back(e); });
  ASSERT_EQ(result.log.size(), 3u);
  EXPECT_EQ(seen.size(), 3u);
  const auto& meta = result.checkpoint.metadata;
  const double best = meta.at("val_char_accuracy").get<double>();
  for (const auto& e : result.log) {
    EXPECT_GE(best, e.val_char_accuracy);
    EXPECT_TRUE(std::isfinite(e.mean_loss));
  }
  EXPECT_EQ(meta.at("epoch").get<int>(), result.best_epoch);
  EXPECT_EQ(meta.at("loss_reduction"), "mean");
  EXPECT_EQ(meta.at("unit"), "word");
  EXPECT_EQ(meta.at("alphabet"), "0123");
  EXPECT_EQ(result.train_size, 70);

  // The checkpoint reproduces the logged validation accuracy.
  const auto recognizer = Recognizer::FromCheckpoint(result.checkpoint);
  EXPECT_EQ(Evaluate(recognizer, toy.val).char_accuracy, best);
  EXPECT_EQ(TrainLogCsvHeader(), "epoch,mean_loss,val_CA,val_SA");
  const std::string row = TrainLogCsvRow(result.log[0]);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 3) << row;
}

TEST(TrainTest, DeterministicUnderSeed) {
  const auto& toy = Toy();
  auto plan = SmallPlan();
  plan.epochs = 2;
  const auto a = Train(plan, toy.train, toy.val);
  const auto b = Train(plan, toy.train, toy.val);
  EXPECT_EQ(a.checkpoint.Serialize(), b.checkpoint.Serialize());
  plan.seed = 100;
  const auto c = Train(plan, toy.train, toy.val);
  EXPECT_NE(a.checkpoint.Serialize(), c.checkpoint.Serialize());
}

TEST(TrainTest, StoppingAtPerfectValidationKeepsTheCheckpoint) {
  const auto& toy = Toy();
  auto plan = SmallPlan();
  plan.epochs = 20;
  plan.config = nn::ModelConfig::Preset("crnn-tiny", 0);
  const auto full = Train(plan, toy.train, toy.val);
  ASSERT_EQ(full.checkpoint.metadata.at("val_char_accuracy"), 100.0)
      << "toy run too short to reach a perfect score";
  plan.stop_at_perfect_validation = true;
  const auto early = Train(plan, toy.train, toy.val);
  EXPECT_EQ(static_cast<int>(early.log.size()), full.best_epoch);
  EXPECT_EQ(early.checkpoint.Serialize(), full.checkpoint.Serialize());
}

TEST(TrainTest, RealFractionUsesCeilOfTrainSize) {
  const auto& toy = Toy();
  auto plan = SmallPlan();
  plan.epochs = 1;
  plan.real_fraction = 0.5;
  EXPECT_EQ(Train(plan, toy.train, toy.val).train_size, 35);
  plan.real_fraction = 0.1;
  EXPECT_EQ(Train(plan, toy.train, toy.val).train_size, 7);
  plan.real_fraction = 0.01;
  EXPECT_EQ(Train(plan, toy.train, toy.val).train_size, 1);
}

TEST(TrainTest, FineTuneKeepsArchitectureAndAlphabet) {
  const auto& toy = Toy();
  auto plan = SmallPlan();
  plan.epochs = 1;
  const auto base = Train(plan, toy.train, toy.val);
  plan.fine_tune_from = base.checkpoint;
  plan.config = nn::ModelConfig::Preset("col_rnn-tiny", 0);  // ignored
  plan.real_fraction = 0.5;
  const auto tuned = Train(plan, toy.train, toy.val);
  EXPECT_EQ(tuned.checkpoint.metadata.at("model"), base.checkpoint.metadata.at("model"));
  EXPECT_EQ(tuned.checkpoint.metadata.at("fine_tuned"), true);
  EXPECT_EQ(tuned.train_size, 35);

  Dataset foreign = toy.train;
  foreign.texts[0] = U"9";
  EXPECT_EQ(KindOf([&] { Train(plan, foreign, toy.val); }), ErrorKind::kConfig);
}

TEST(TrainTest, AllUnreachableTargetsIsTrainingError) {
  Dataset narrow;
  for (int i = 0; i < 4; ++i) {
    narrow.images.emplace_back(1, 32, 1.0);
    narrow.texts.push_back(U"aa");
  }
  auto plan = SmallPlan();
  plan.config = nn::ModelConfig::Preset("col_rnn-tiny", 0);
  EXPECT_EQ(KindOf([&] { Train(plan, narrow, narrow); }), ErrorKind::kTraining);
}

TEST(TrainTest, RejectsEmptySplits) {
  auto plan = SmallPlan();
  EXPECT_EQ(KindOf([&] { Train(plan, Dataset{}, Toy().val); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { Train(plan, Toy().train, Dataset{}); }), ErrorKind::kConfig);
  plan.epochs = 0;
  EXPECT_EQ(KindOf([&] { Train(plan, Toy().train, Toy().val); }), ErrorKind::kConfig);
}

TEST(EvaluateTest, OutOfAlphabetCharactersAreCountedErrors) {
  nn::Model model(nn::ModelConfig::Preset("crnn-check", 3), 1);
  Recognizer r{model, ctc::Alphabet(U"ab"), Unit::kWord};
  Dataset d;
  d.images.emplace_back(40, 32, 1.0);
  d.texts.push_back(U"aZb");
  const auto report = Evaluate(r, d);
  EXPECT_EQ(report.out_of_alphabet_chars, 1);
  EXPECT_EQ(report.total_gt_chars, 3);
  EXPECT_DOUBLE_EQ(report.char_accuracy + report.char_error_rate(), 100.0);
}

TEST(EvaluateTest, ManifestRoundTripThroughCheckpointFile) {
  const auto dir = TempDir("eval");
  synth::Synthesizer s;
  const std::vector<std::u32string> lexicon = {U"01", U"23", U"3"};
  synth::CorpusOptions opts;
  opts.train = 12;
  opts.val = 4;
  opts.test = 4;
  opts.seed = 3;
  const auto manifest = synth::GenerateCorpus(s, lexicon, opts, dir);
  auto plan = SmallPlan();
  plan.epochs = 1;
  const auto result = Train(plan, Manifest::Load(dir / "manifest.tsv", Unit::kWord));
  result.checkpoint.Save(dir / "model.ckpt");
  const auto loaded = nn::Checkpoint::Load(dir / "model.ckpt");
  const auto a = Evaluate(result.checkpoint, manifest, Split::kTest);
  const auto b = Evaluate(loaded, manifest, Split::kTest);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.n_samples, 4);
  EXPECT_EQ(a, Evaluate(loaded, manifest, Split::kTest));

  Manifest as_lines = manifest;
  as_lines.unit = Unit::kLine;
  EXPECT_EQ(KindOf([&] { Evaluate(loaded, as_lines, Split::kTest); }), ErrorKind::kConfig);
  std::filesystem::remove_all(dir);
}

TEST(RecognizerTest, RejectsInconsistentMetadata) {
  const nn::Model model(nn::ModelConfig::Preset("crnn-check", 3), 1);
  auto ckpt = MakeCheckpoint(model, ctc::Alphabet(U"ab"), Unit::kWord);
  EXPECT_NO_THROW(Recognizer::FromCheckpoint(ckpt));
  auto wrong = ckpt;
  wrong.metadata["alphabet"] = "abc";
  EXPECT_EQ(KindOf([&] { Recognizer::FromCheckpoint(wrong); }), ErrorKind::kConfig);
  auto missing = ckpt;
  missing.metadata.erase("unit");
  EXPECT_EQ(KindOf([&] { Recognizer::FromCheckpoint(missing); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace ctcocr::train
