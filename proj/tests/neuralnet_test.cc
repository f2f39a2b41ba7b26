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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "ctcocr/errors.h"
#include "ctcocr/nn/layers.h"
#include "ctcocr/nn/model.h"
#include "ctcocr/nn/optimizer.h"
#include "gradcheck.h"
#include "json.hpp"
#include "test_util.h"

namespace ctcocr::nn {
namespace {

using ::ctcocr::imaging::GrayImage;
using ::ctcocr::testing::GradCheck;
using ::ctcocr::testing::RandomImage;
using ::ctcocr::testing::RandomMatrix;

constexpr double kLayerTolerance = 1e-4;
constexpr double kGradTolerance = 1e-3;

template <typename Check>
void RunLayerCheck(Check check, int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheck total;
  for (int i = 0; i < instances; ++i) total.Merge(check(rng));
  EXPECT_LE(total.max_error, kLayerTolerance) << total.worst;
  EXPECT_GT(total.checked, instances);
  EXPECT_LE(total.kinks * 50, total.checked) << total.kinks << " of " << total.checked;
}

TEST(LayerGradientTest, Conv2d) { RunLayerCheck(testing::CheckConv, 10, 1); }
TEST(LayerGradientTest, MaxPool) { RunLayerCheck(testing::CheckMaxPool, 20, 2); }
TEST(LayerGradientTest, BatchNormTrainingMode) {
  RunLayerCheck(testing::CheckBatchNorm, 10, 3);
}
TEST(LayerGradientTest, Lstm) { RunLayerCheck(testing::CheckLstm, 10, 4); }
TEST(LayerGradientTest, BiLstm) { RunLayerCheck(testing::CheckBiLstm, 10, 5); }
TEST(LayerGradientTest, HeadWithCtc) { RunLayerCheck(testing::CheckHeadWithCtc, 20, 6); }

ctc::Alphabet DigitAlphabet() { return ctc::Alphabet(U"0123456789"); }

TEST(ModelGradientTest, CrnnEndToEnd) {
  const auto alphabet = DigitAlphabet();
  std::mt19937_64 rng(11);
  GradCheck total;
  int instances = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Model model(ModelConfig::Preset("crnn-check", alphabet.size()), 100 + trial);
    std::vector<GrayImage> images;
    std::vector<ctc::Labelling> targets;
    for (int n = 0; n < 2; ++n) {
      images.push_back(RandomImage(16 + 4 * static_cast<int>(rng() % 3), 32, rng));
      ctc::Labelling t;
      for (int k = 0; k < 1 + static_cast<int>(rng() % 2); ++k) {
        t.push_back(1 + static_cast<int>(rng() % 10));
      }
      targets.push_back(t);
    }
    total.Merge(testing::CheckModelGradients(model, images, targets, alphabet, 6, rng));
    ++instances;
  }
  EXPECT_EQ(instances, 20);
  EXPECT_LE(total.max_error, kGradTolerance) << total.worst;
  // Kinks are rare at random points; many would hide a broken backward pass.
  EXPECT_LE(total.kinks * 50, total.checked) << total.kinks << " of " << total.checked;
}

TEST(ModelGradientTest, ColAndWinRnnEndToEnd) {
  const auto alphabet = DigitAlphabet();
  std::mt19937_64 rng(12);
  for (const char* preset : {"col_rnn-tiny", "win_rnn-tiny"}) {
    auto cfg = ModelConfig::Preset(preset, alphabet.size());
    cfg.rnn = RnnConfig{1, 4, true};
    Model model(cfg, 5);
    std::vector<GrayImage> images = {RandomImage(24, 32, rng), RandomImage(30, 32, rng)};
    std::vector<ctc::Labelling> targets = {{3}, {1, 2}};
    const auto g = testing::CheckModelGradients(model, images, targets, alphabet, 8, rng);
    EXPECT_LE(g.max_error, kGradTolerance) << preset << ": " << g.worst;
  }
}

TEST(CnnTest, FullCnnHasHeightOneAndExpectedWidth) {
  const Cnn cnn(CnnConfig::Crnn());
  EXPECT_EQ(cnn.OutputHeight(32), 1);
  EXPECT_EQ(cnn.out_channels(), 512);
  // Independent recomputation of the width arithmetic, stage by stage.
  auto conv = [](int w, int k, int p) { return w + 2 * p - k + 1; };
  auto pool = [](int w, int k, int s, int p) { return (w + 2 * p - k) / s + 1; };
  for (int w = 32; w <= 512; w += 16) {
    int x = w;
    x = pool(conv(x, 3, 1), 2, 2, 0);
    x = pool(conv(x, 3, 1), 2, 2, 0);
    x = conv(x, 3, 1);
    x = pool(conv(x, 3, 1), 2, 1, 1);
    x = conv(x, 3, 1);
    x = pool(conv(x, 3, 1), 2, 1, 1);
    x = conv(x, 2, 0);
    EXPECT_EQ(cnn.OutputWidth(w), x) << "W=" << w;
    EXPECT_EQ(cnn.OutputWidth(w), (w / 2) / 2 + 1) << "W=" << w;
  }
}

TEST(CnnTest, ActualForwardMatchesOutputWidth) {
  Cnn cnn(CnnConfig::Crnn());
  std::mt19937_64 rng(3);
  cnn.Init(rng);
  for (int w : {8, 37}) {
    const auto map = cnn.Forward(RandomImage(w, 32, rng));
    EXPECT_EQ(map.width, cnn.OutputWidth(w));
    EXPECT_EQ(map.height, 1);
    EXPECT_EQ(map.channels, 512);
  }
}

TEST(CnnTest, ZeroImageWithZeroWeightsGivesZeroMap) {
  Cnn cnn(CnnConfig::Crnn());
  for (ParamArray* p : cnn.Params()) {
    if (p->trainable) p->values.setZero();
  }
  const auto map = cnn.Forward(GrayImage(20, 32, 0.0));
  for (double v : map.values) ASSERT_EQ(v, 0.0);
}

TEST(CnnTest, RejectsWrongHeight) {
  const Cnn cnn(CnnConfig::Crnn());
  try {
    cnn.Forward(GrayImage(20, 31, 0.0));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(MapToSequenceTest, ChannelMajorLayoutAndBijection) {
  CnnFeatureMap map;
  map.width = 5;
  map.height = 3;
  map.channels = 4;
  map.values.resize(60);
  for (size_t i = 0; i < map.values.size(); ++i) map.values[i] = static_cast<double>(i);
  const auto seq = MapToSequence(map);
  ASSERT_EQ(seq.rows(), 5);
  ASSERT_EQ(seq.cols(), 12);
  for (int t = 0; t < 5; ++t) {
    for (int c = 0; c < 4; ++c) {
      for (int h = 0; h < 3; ++h) EXPECT_EQ(seq(t, c * 3 + h), map.at(t, h, c));
    }
  }
  const auto back = SequenceToMap(seq, 3, 4);
  EXPECT_EQ(back.values, map.values);
}

TEST(BiLstmTest, ZeroWeightsGiveZeroOutput) {
  BiLstm rnn("rnn", 6, RnnConfig{2, 5, true});
  for (ParamArray* p : rnn.Params()) p->values.setZero();
  std::mt19937_64 rng(1);
  const Matrix y = rnn.Forward(RandomMatrix(4, 6, rng), nullptr);
  ASSERT_EQ(y.rows(), 4);
  ASSERT_EQ(y.cols(), 10);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BiLstmTest, SingleFrameShape) {
  BiLstm rnn("rnn", 32, RnnConfig{2, 256, true});
  std::mt19937_64 rng(2);
  rnn.Init(rng);
  const Matrix y = rnn.Forward(RandomMatrix(1, 32, rng), nullptr);
  EXPECT_EQ(y.rows(), 1);
  EXPECT_EQ(y.cols(), 512);
}

TEST(BiLstmTest, ReverseHalfIsAnLstmOverTheReversedSequence) {
  BiLstm rnn("rnn", 3, RnnConfig{1, 4, true});
  std::mt19937_64 rng(4);
  rnn.Init(rng);
  const auto params = rnn.Params();
  const Matrix x = RandomMatrix(6, 3, rng);
  const Matrix y = rnn.Forward(x, nullptr);
  Lstm twin("twin", 3, 4);
  twin.w_input.values = params[3]->values;
  twin.w_hidden.values = params[4]->values;
  twin.bias.values = params[5]->values;
  const Matrix h = twin.Forward(x.colwise().reverse(), nullptr);
  for (int t = 0; t < 6; ++t) {
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(y(5 - t, 4 + k), h(t, k), 1e-12);
  }
}

TEST(LstmTest, ForgetBiasIsOne) {
  Lstm lstm("l", 3, 4);
  std::mt19937_64 rng(1);
  lstm.Init(rng);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(lstm.bias.values[4 + k], 1.0);
  }
  const double bound = 1.0 / std::sqrt(3.0 + 4.0);
  EXPECT_LE(lstm.bias.values.head(4).cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(lstm.w_input.values.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(lstm.w_hidden.values.cwiseAbs().maxCoeff(), bound);
}

TEST(DecodeHeadTest, ZeroWeightsGiveUniform) {
  Linear head("head", 5, 4);
  std::mt19937_64 rng(1);
  const auto y = DecodeHead(head, RandomMatrix(3, 5, rng));
  for (int t = 0; t < 3; ++t) {
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(y.probs()(t, k), 0.25, 1e-15);
  }
}

TEST(DecodeHeadTest, KnownSoftmaxValues) {
  Linear head("head", 1, 2);
  head.bias.values << std::log(3.0), 0.0;
  const auto y = DecodeHead(head, Matrix::Zero(1, 1));
  EXPECT_NEAR(y.probs()(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(y.probs()(0, 1), 0.25, 1e-15);
}

TEST(DecodeHeadTest, ShiftInvariant) {
  Linear head("head", 4, 6);
  std::mt19937_64 rng(2);
  head.Init(rng);
  const Matrix x = RandomMatrix(5, 4, rng);
  const auto a = DecodeHead(head, x);
  head.bias.values.array() += 123.0;
  const auto b = DecodeHead(head, x);
  EXPECT_LE((a.probs() - b.probs()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(ctc::BestPath(a), ctc::BestPath(b));
}

class PresetTest : public ::testing::TestWithParam<const char*> {};

TEST_P(PresetTest, PosteriorRowsSumToOne) {
  Model model(ModelConfig::Preset(GetParam(), 11), 9);
  std::mt19937_64 rng(9);
  for (int w : {1, 7, 45}) {
    const auto y = model.Forward(RandomImage(w, 32, rng));
    EXPECT_EQ(y.frames(), model.OutputLength(w));
    EXPECT_EQ(y.classes(), 11);
    for (int t = 0; t < y.frames(); ++t) EXPECT_NEAR(y.probs().row(t).sum(), 1.0, 1e-12);
  }
}

TEST_P(PresetTest, ConfigJsonRoundTrip) {
  const auto cfg = ModelConfig::Preset(GetParam(), 11);
  EXPECT_EQ(ModelConfig::FromJson(nlohmann::json::parse(cfg.ToJson().dump())), cfg);
}

TEST_P(PresetTest, RightToLeftEqualsMirroredLeftToRight) {
  auto ltr = ModelConfig::Preset(GetParam(), 7);
  auto rtl = ltr;
  rtl.direction = imaging::Direction::kRightToLeft;
  const Model a(ltr, 3), b(rtl, 3);
  std::mt19937_64 rng(5);
  const GrayImage image = RandomImage(29, 32, rng);
  EXPECT_EQ(b.Logits(image), a.Logits(imaging::Mirror(image)));
}

INSTANTIATE_TEST_SUITE_P(AllKinds, PresetTest,
                         ::testing::Values("col_rnn-tiny", "win_rnn-tiny", "cnn_only-tiny",
                                           "crnn-tiny", "crnn-check"));

TEST(ModelTest, FullSizePresetsHaveExpectedShapes) {
  const Model crnn(ModelConfig::Preset("crnn", 37), 1);
  EXPECT_EQ(crnn.OutputLength(100), 26);
  EXPECT_EQ(crnn.rnn()->config().hidden, 256);
  EXPECT_EQ(crnn.head().weight.shape, (std::vector<int>{37, 512}));
  const Model col(ModelConfig::Preset("col_rnn", 37), 1);
  EXPECT_EQ(col.OutputLength(100), 100);
  const Model win(ModelConfig::Preset("win_rnn", 37), 1);
  EXPECT_EQ(win.OutputLength(100), 20);
  EXPECT_EQ(win.OutputLength(3), 1);
}

TEST(ModelTest, CnnOnlyAndCrnnShareCnnFeatures) {
  const auto base = ModelConfig::Preset("crnn-tiny", 11);
  auto only = base;
  only.kind = ModelKind::kCnnOnly;
  only.rnn.reset();
  const Model a(base, 21), b(only, 21);
  std::mt19937_64 rng(1);
  std::vector<GrayImage> images = {RandomImage(40, 32, rng)};
  Model::Tape ta, tb;
  a.ForwardBatch(images, false, &ta);
  const auto logits = b.ForwardBatch(images, false, &tb);
  EXPECT_EQ(ta.features[0], tb.features[0]);
  // CNN_only feeds the CNN features straight into the head.
  EXPECT_EQ(tb.encodings[0], tb.features[0]);
  EXPECT_EQ(logits[0].cols(), 11);
}

TEST(ModelTest, BatchedLogitsTruncatedPerSample) {
  const Model model(ModelConfig::Preset("cnn_only-tiny", 5), 2);
  std::mt19937_64 rng(2);
  std::vector<GrayImage> images = {RandomImage(12, 32, rng), RandomImage(40, 32, rng),
                                   RandomImage(2, 32, rng)};
  const auto logits = model.ForwardBatch(images, false, nullptr);
  for (size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(logits[i].rows(), model.OutputLength(images[i].width()));
  }
  EXPECT_GE(logits[2].rows(), 1);
}

TEST(ModelTest, BatchNormRunningStatsOnlyChangeOnUpdate) {
  Model model(ModelConfig::Preset("crnn-check", 5), 2);
  std::mt19937_64 rng(2);
  std::vector<GrayImage> images = {RandomImage(16, 32, rng), RandomImage(16, 32, rng)};
  auto buffers = [&] {
    std::vector<Vector> out;
    for (auto* p : model.Params()) {
      if (!p->trainable) out.push_back(p->values);
    }
    return out;
  };
  const auto before = buffers();
  ASSERT_FALSE(before.empty());
  Model::Tape tape;
  model.ForwardBatch(images, true, &tape);
  EXPECT_EQ(buffers(), before);
  model.UpdateRunningStats(tape);
  EXPECT_NE(buffers(), before);
}

TEST(ModelTest, BatchNormRunningStatsUseMomentumAndUnbiasedVariance) {
  BatchNorm2d bn("bn", 1);
  Tensor4 x(1, 1, 1, 4);
  x.data = {1.0, 2.0, 3.0, 6.0};
  BatchNorm2d::Cache cache;
  bn.Forward(x, true, &cache);
  bn.UpdateRunningStats(cache);
  // mean 3, unbiased variance 14/3.
  EXPECT_NEAR(bn.running_mean.values[0], 0.1 * 3.0, 1e-15);
  EXPECT_NEAR(bn.running_var.values[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-15);
}

TEST(ModelTest, SameSeedSameWeights) {
  const Model a(ModelConfig::Preset("crnn-tiny", 5), 77), b(ModelConfig::Preset("crnn-tiny", 5), 77);
  const Model c(ModelConfig::Preset("crnn-tiny", 5), 78);
  const auto pa = a.Params(), pb = b.Params(), pc = c.Params();
  bool any_differs = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->values, pb[i]->values) << pa[i]->name;
    if (pa[i]->trainable && pa[i]->values != pc[i]->values) any_differs = true;
  }
  EXPECT_TRUE(any_differs);
}

TEST(ModelConfigTest, ValidationAndParsing) {
  auto cfg = ModelConfig::Preset("crnn", 5);
  cfg.cnn.reset();
  EXPECT_THROW(cfg.Validate(), Error);
  EXPECT_THROW(ModelConfig::Preset("lstm9000", 5), Error);
  EXPECT_THROW(ParseModelKind("mlp"), Error);
  const auto parsed = ModelConfig::FromJson(
      nlohmann::json::parse(R"({"preset": "crnn", "alphabet_size": 9, "rnn": {"hidden": 64}})"));
  EXPECT_EQ(parsed.kind, ModelKind::kCrnn);
  EXPECT_EQ(parsed.alphabet_size, 9);
  EXPECT_EQ(parsed.rnn->hidden, 64);
  EXPECT_EQ(parsed.rnn->layers, 2);
  EXPECT_THROW(ModelConfig::FromJson(nlohmann::json::parse(R"({"kind": 3})")), Error);
}

TEST(RmsPropTest, ZeroGradientLeavesParametersUnchanged) {
  ParamArray p("p", {3});
  p.values << 1.0, -2.0, 3.0;
  p.grad.setZero();
  RmsProp opt;
  ParamArray* params[] = {&p};
  opt.Step(params);
  EXPECT_EQ(p.values, (Vector(3) << 1.0, -2.0, 3.0).finished());
}

TEST(RmsPropTest, ZeroLearningRateOverTwoStepsOnlyMovesState) {
  ParamArray p("p", {2});
  p.values << 0.5, 0.25;
  RmsProp opt({0.0, 0.9, 1e-8});
  ParamArray* params[] = {&p};
  p.grad << 1.0, 2.0;
  opt.Step(params);
  opt.Step(params);
  EXPECT_EQ(p.values, (Vector(2) << 0.5, 0.25).finished());
  // v1 = 0.1 g^2, v2 = 0.9 v1 + 0.1 g^2 = 0.19 g^2.
  EXPECT_NEAR(opt.square_averages()[0][0], 0.19, 1e-15);
  EXPECT_NEAR(opt.square_averages()[0][1], 0.76, 1e-15);
}

TEST(RmsPropTest, UpdateRule) {
  ParamArray p("p", {1});
  p.values << 1.0;
  p.grad << 0.5;
  RmsProp opt({0.01, 0.9, 1e-8});
  ParamArray* params[] = {&p};
  opt.Step(params);
  const double v = 0.1 * 0.25;
  EXPECT_NEAR(p.values[0], 1.0 - 0.01 * 0.5 / (std::sqrt(v) + 1e-8), 1e-15);
}

TEST(RmsPropTest, NonFiniteGradientThrowsWithoutUpdate) {
  ParamArray a("a", {1}), b("b", {1});
  a.values << 1.0;
  b.values << 2.0;
  a.grad << 0.3;
  b.grad << std::numeric_limits<double>::quiet_NaN();
  RmsProp opt;
  ParamArray* params[] = {&a, &b};
  try {
    opt.Step(params);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
  EXPECT_EQ(a.values[0], 1.0);
  EXPECT_EQ(b.values[0], 2.0);
  EXPECT_TRUE(opt.square_averages().empty());
}

TEST(RmsPropTest, SkipsBuffers) {
  ParamArray buf("buf", {1}, /*trainable=*/false);
  buf.values << 4.0;
  buf.grad << 1.0;
  RmsProp opt;
  ParamArray* params[] = {&buf};
  opt.Step(params);
  EXPECT_EQ(buf.values[0], 4.0);
}

// ---------------------------------------------------------------- goldens

void CheckGolden(const std::string& name, const std::vector<double>& values) {
  const auto path = std::filesystem::path(testing::GoldenDir()) / (name + ".json");
  if (testing::UpdateGoldens()) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << nlohmann::json(values).dump(1) << "\n";
    GTEST_SKIP() << "rewrote " << path;
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing golden " << path << "; run with CTCOCR_UPDATE_GOLDENS=1";
  const auto expected = nlohmann::json::parse(in).get<std::vector<double>>();
  ASSERT_EQ(expected.size(), values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    EXPECT_NEAR(values[i], expected[i], 1e-9 * std::max(1.0, std::abs(expected[i])))
        << name << "[" << i << "]";
  }
}

GrayImage RampImage(int width) {
  GrayImage image(width, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < width; ++x) image.at(x, y) = ((x * 7 + y * 3) % 17) / 16.0;
  }
  return image;
}

TEST(GoldenTest, FullCnnOn32x16) {
  Cnn cnn(CnnConfig::Crnn());
  std::mt19937_64 rng(2024);
  cnn.Init(rng);
  const auto map = cnn.Forward(RampImage(16));
  ASSERT_EQ(map.width, 5);
  ASSERT_EQ(map.height, 1);
  // Every 16th channel keeps the file small.
  std::vector<double> sample;
  for (int c = 0; c < map.channels; c += 16) {
    for (int x = 0; x < map.width; ++x) sample.push_back(map.at(x, 0, c));
  }
  CheckGolden("cnn_32x16", sample);
}

TEST(GoldenTest, BiLstmOutput) {
  BiLstm rnn("rnn", 4, RnnConfig{2, 3, true});
  std::mt19937_64 rng(2025);
  rnn.Init(rng);
  const Matrix y = rnn.Forward(RandomMatrix(5, 4, rng), nullptr);
  CheckGolden("bilstm", std::vector<double>(y.data(), y.data() + y.size()));
}

}  // namespace
}  // namespace ctcocr::nn
