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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   acceptance [work_dir]
//
// work_dir receives the rendered corpora (default: a temp directory).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctcocr/ctc.h"
#include "ctcocr/imaging.h"
#include "ctcocr/manifest.h"
#include "ctcocr/metrics.h"
#include "ctcocr/nn/model.h"
#include "ctcocr/synthgen.h"
#include "ctcocr/trainer.h"
#include "ctcocr/utf8.h"
#include "gradcheck.h"
#include "oracles.h"
#include "test_util.h"

namespace ctcocr::acceptance {
namespace {

namespace fs = std::filesystem;
using metrics::EvalReport;
using testing::GradCheck;
using train::Split;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Format(const char* fmt, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// Every report produced during the run, for the CA + CER identity.
std::vector<EvalReport>& AllReports() {
  static std::vector<EvalReport> reports;
  return reports;
}

EvalReport Keep(EvalReport report) {
  AllReports().push_back(report);
  return report;
}

void Progress(const std::string& message) { std::fprintf(stderr, "  .. %s\n", message.c_str()); }

train::EpochCallback LogEpochs(std::string tag) {
  return [tag](const train::EpochLog& e) {
    Progress(tag + " " + train::TrainLogCsvRow(e));
  };
}

// ------------------------------------------------------------------- 1

Outcome CtcOracleEquivalence() {
  const Stopwatch clock;
  std::mt19937_64 rng(1001);
  int checked = 0, unreachable = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int frames = 1 + static_cast<int>(rng() % 6);
    const int classes = 2 + static_cast<int>(rng() % 3);  // |L'| <= 4
    std::u32string labels;
    for (int i = 1; i < classes; ++i) labels.push_back(U'a' + i - 1);
    const ctc::Alphabet alphabet(labels);
    const auto y =
        ctc::Posteriorgram::FromLogits(testing::RandomMatrix(frames, classes, rng, -3, 3));
    ctc::Labelling target;
    const int n = static_cast<int>(rng() % (frames + 1));
    for (int i = 0; i < n; ++i) target.push_back(1 + static_cast<int>(rng() % (classes - 1)));

    const auto dist = testing::LabellingDistribution(y.probs(), alphabet.blank());
    const auto it = dist.find(target);
    const double oracle = it == dist.end() ? 0.0 : it->second;
    const auto r = ctc::CtcLoss(target, y, alphabet);
    if (oracle == 0.0) {
      ++unreachable;
      if (r.reachable || !std::isinf(r.loss)) {
        return {false, Format("trial %d: unreachable target reported reachable", trial)};
      }
      continue;
    }
    worst = std::max(worst, testing::RelativeError(std::exp(-r.loss), oracle, 1e-300));
    ++checked;
  }
  const double seconds = clock.Seconds();
  return {worst <= 1e-9 && seconds < 10.0,
          Format("500 instances (%d reachable, %d unreachable), max rel err %.2e <= 1e-9, "
                 "%.2f s < 10 s",
                 checked, unreachable, worst, seconds)};
}

// ------------------------------------------------------------------- 2

Outcome GradientSuite() {
  const Stopwatch clock;
  struct Group {
    const char* name;
    std::function<GradCheck(std::mt19937_64&)> check;
    int instances;
  };
  const std::vector<Group> layers = {
      {"ctc", testing::CheckCtc, 20},          {"head+ctc", testing::CheckHeadWithCtc, 20},
      {"conv", testing::CheckConv, 10},        {"maxpool", testing::CheckMaxPool, 20},
      {"batchnorm", testing::CheckBatchNorm, 10}, {"lstm", testing::CheckLstm, 10},
      {"bilstm", testing::CheckBiLstm, 10},
  };
  int cases = 0, layer_coordinates = 0;
  bool ok = true;
  std::ostringstream detail;
  std::mt19937_64 rng(2002);
  for (const auto& g : layers) {
    GradCheck total;
    for (int i = 0; i < g.instances; ++i) total.Merge(g.check(rng));
    cases += g.instances;
    layer_coordinates += total.checked;
    const bool pass = total.max_error <= 1e-4 && total.kinks * 50 <= total.checked;
    ok = ok && pass;
    if (!pass) detail << g.name << " failed (" << total.worst << ", kinks " << total.kinks << "); ";
  }
  double layer_seconds = clock.Seconds();

  // Full tiny CRNN (two conv stages, batch norm, BiLSTM, head, CTC).
  const ctc::Alphabet alphabet(U"0123456789");
  GradCheck model_total;
  for (int trial = 0; trial < 20; ++trial) {
    nn::Model model(nn::ModelConfig::Preset("crnn-check", alphabet.size()), 100 + trial);
    std::vector<imaging::GrayImage> images;
    std::vector<ctc::Labelling> targets;
    for (int n = 0; n < 2; ++n) {
      images.push_back(testing::RandomImage(16 + 4 * static_cast<int>(rng() % 3), 32, rng));
      ctc::Labelling t;
      for (int k = 0; k < 1 + static_cast<int>(rng() % 2); ++k) {
        t.push_back(1 + static_cast<int>(rng() % 10));
      }
      targets.push_back(t);
    }
    model_total.Merge(testing::CheckModelGradients(model, images, targets, alphabet, 6, rng));
    ++cases;
  }
  const bool model_ok =
      model_total.max_error <= 1e-3 && model_total.kinks * 50 <= model_total.checked;
  if (!model_ok) detail << "crnn end-to-end failed (" << model_total.worst << "); ";
  ok = ok && model_ok;
  const double seconds = clock.Seconds();
  ok = ok && cases >= 100 && seconds < 120.0;
  detail << Format("%d seeded cases (layers <= 1e-4 on %d coordinates in %.1f s, 20 CRNN "
                   "end-to-end max %.2e <= 1e-3, %d/%d coordinates at kinks), %.1f s < 120 s",
                   cases, layer_coordinates, layer_seconds, model_total.max_error,
                   model_total.kinks,
                   model_total.checked + model_total.kinks, seconds);
  return {ok, detail.str()};
}

// ------------------------------------------------------------------- 3

Outcome BestPathWitness() {
  const ctc::Alphabet alphabet(U"a");  // blank 0, 'a' 1
  Matrix probs(2, 2);
  probs << 0.6, 0.4, 0.6, 0.4;
  const auto y = ctc::Posteriorgram::FromProbabilities(probs);
  const auto decoded = alphabet.Decode(ctc::BestPathDecode(y, alphabet));

  const auto dist = testing::LabellingDistribution(probs, alphabet.blank());
  auto best = dist.begin();
  for (auto it = dist.begin(); it != dist.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  const double p_a = dist.at({1});
  const double p_empty = dist.at({});
  const double ctc_a = std::exp(-ctc::CtcLoss({1}, y, alphabet).loss);
  const bool ok = decoded.empty() && best->first == ctc::Labelling{1} &&
                  std::abs(p_a - 0.64) < 1e-12 && std::abs(p_empty - 0.36) < 1e-12 &&
                  std::abs(ctc_a - 0.64) < 1e-12;
  return {ok, Format("best path decodes to \"%s\"; enumeration: p(a) = %.4f, p() = %.4f, "
                     "most probable labelling \"%s\"; CTC p(a) = %.4f",
                     EncodeUtf8(decoded).c_str(), p_a, p_empty,
                     EncodeUtf8(alphabet.Decode(best->first)).c_str(), ctc_a)};
}

// ------------------------------------------------------------------- 4

struct Corpora {
  std::vector<std::u32string> lexicon;
  train::Manifest clean, degraded;
};

Corpora MakeCorpora(const fs::path& work) {
  Corpora c;
  c.lexicon = synth::RandomLexicon(200, U"0123456789", 1, 5, 7);
  const synth::Synthesizer synthesizer;
  synth::CorpusOptions options;
  options.train = 5000;
  options.val = 500;
  options.test = 500;
  options.seed = 1;
  c.clean = synth::GenerateCorpus(synthesizer, c.lexicon, options, work / "clean");
  options.seed = 2;
  options.style = synth::Style::kDegraded;
  c.degraded = synth::GenerateCorpus(synthesizer, c.lexicon, options, work / "degraded");
  return c;
}

train::TrainPlan ToyPlan(const char* preset, int batch_size) {
  train::TrainPlan plan;
  plan.epochs = 30;
  plan.batch_size = batch_size;
  plan.learning_rate = 1e-3;
  plan.config = nn::ModelConfig::Preset(preset, 0);
  plan.seed = 3;
  plan.stop_at_perfect_validation = true;
  return plan;
}

Outcome ToyTraining(const Corpora& corpora, nn::Checkpoint& crnn_out) {
  Stopwatch crnn_clock;
  const auto crnn =
      train::Train(ToyPlan("crnn-tiny", 32), corpora.clean, LogEpochs("crnn-tiny"));
  const double crnn_seconds = crnn_clock.Seconds();
  const auto crnn_report = Keep(train::Evaluate(crnn.checkpoint, corpora.clean, Split::kTest));
  crnn_out = crnn.checkpoint;

  Stopwatch col_clock;
  const auto col =
      train::Train(ToyPlan("col_rnn-tiny", 8), corpora.clean, LogEpochs("col_rnn-tiny"));
  const double col_seconds = col_clock.Seconds();
  const auto col_report = Keep(train::Evaluate(col.checkpoint, corpora.clean, Split::kTest));

  const bool ok = crnn_report.seq_accuracy >= 95.0 && crnn_report.char_accuracy >= 99.0 &&
                  crnn_seconds < 15 * 60 && col_report.seq_accuracy >= 85.0;
  const bool ordered = crnn_report.seq_accuracy >= col_report.seq_accuracy;
  return {ok, Format("CRNN-tiny test SA %.2f >= 95, CA %.2f >= 99 (%zu epochs, %.0f s); "
                     "Col_RNN-tiny test SA %.2f >= 85, CA %.2f (%zu epochs, %.0f s); "
                     "ordering CRNN >= Col_RNN %s (not enforced)",
                     crnn_report.seq_accuracy, crnn_report.char_accuracy, crnn.log.size(),
                     crnn_seconds, col_report.seq_accuracy, col_report.char_accuracy,
                     col.log.size(), col_seconds, ordered ? "holds" : "does not hold")};
}

// ------------------------------------------------------------------- 5

Outcome TransferAnalog(const Corpora& corpora, const nn::Checkpoint& clean_model) {
  const auto before = Keep(train::Evaluate(clean_model, corpora.degraded, Split::kTest));

  auto tune = ToyPlan("crnn-tiny", 32);
  tune.fine_tune_from = clean_model;
  tune.real_fraction = 0.5;
  const auto tuned = train::Train(tune, corpora.degraded, LogEpochs("fine-tune 50%"));
  const auto tuned_report = Keep(train::Evaluate(tuned.checkpoint, corpora.degraded, Split::kTest));

  const auto pure =
      train::Train(ToyPlan("crnn-tiny", 32), corpora.degraded, LogEpochs("degraded 100%"));
  const auto pure_report = Keep(train::Evaluate(pure.checkpoint, corpora.degraded, Split::kTest));

  const bool ok = tuned_report.char_accuracy >= pure_report.char_accuracy - 0.5;
  return {ok, Format("degraded test CA: clean model %.2f, clean + fine-tune on 50%% "
                     "(%d images) %.2f >= 100%% degraded model %.2f - 0.5",
                     before.char_accuracy, tuned.train_size, tuned_report.char_accuracy,
                     pure_report.char_accuracy)};
}

// ------------------------------------------------------------------- 6

Outcome MetricsOracles() {
  std::mt19937_64 rng(6006);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::RandomString(rng, 7, U"abcdक");
    const auto b = testing::RandomString(rng, 7, U"abcdक");
    if (metrics::Levenshtein(a, b) != testing::LevenshteinRecursive(a, b)) ++mismatches;
  }

  auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  struct Example {
    const char* what;
    double got, want;
  };
  const std::vector<metrics::TextPair> one = {{U"gandi", U"gandhi"}};
  const std::vector<metrics::TextPair> pooled = {{U"vwxyz", U"abcde"}, {U"fghij", U"fghij"}};
  const std::vector<metrics::TextPair> three = {{U"a", U"a"}, {U"b", U"b"}, {U"c", U"x"}};
  const std::vector<Example> examples = {
      {"CA gandi/gandhi", metrics::CharAccuracy(one), 83.33},
      {"CA pooled", metrics::CharAccuracy(pooled), 50.00},
      {"SA 2 of 3", metrics::SeqAccuracy(three), 66.67},
      {"WA quik", metrics::WordAccuracy(U"the quik fox", U"the quick fox"), 66.67},
      {"WA identical", metrics::WordAccuracy(U"a b c", U"a b c"), 100.00},
      {"WA empty prediction", metrics::WordAccuracy(U"", U"a b"), 0.00},
  };
  std::string failed;
  for (const auto& e : examples) {
    if (round2(e.got) != e.want) failed += std::string(e.what) + "; ";
  }
  Keep(metrics::Evaluate(one, true));
  Keep(metrics::Evaluate(pooled, true));
  Keep(metrics::Evaluate(three));

  int identity_failures = 0;
  for (const auto& r : AllReports()) {
    if (r.char_accuracy + r.char_error_rate() != 100.0) ++identity_failures;
  }
  const bool ok = mismatches == 0 && failed.empty() && identity_failures == 0;
  return {ok, Format("Levenshtein = recursion on 1000 pairs (%d mismatches); %zu hand-worked "
                     "CA/SA/WA examples%s; CA + CER = 100 in %zu/%zu reports",
                     mismatches, examples.size(),
                     failed.empty() ? " exact to 2 decimals" : (" FAILED: " + failed).c_str(),
                     AllReports().size() - identity_failures, AllReports().size())};
}

// ------------------------------------------------------------------- 7

Outcome Determinism(const Corpora& corpora) {
  auto plan = ToyPlan("crnn-tiny", 32);
  plan.epochs = 2;
  plan.stop_at_perfect_validation = false;
  plan.real_fraction = 0.6;
  plan.seed = 77;
  const auto a = train::Train(plan, corpora.clean);
  const auto b = train::Train(plan, corpora.clean);
  const auto bytes_a = a.checkpoint.Serialize();
  const auto bytes_b = b.checkpoint.Serialize();
  const auto report_a = Keep(train::Evaluate(a.checkpoint, corpora.clean, Split::kTest));
  const auto report_b = Keep(train::Evaluate(b.checkpoint, corpora.clean, Split::kTest));
  const bool ok = bytes_a == bytes_b && report_a == report_b;
  return {ok, Format("two seeded runs (%d images, 2 epochs): checkpoints %s (%zu bytes), "
                     "test reports %s (CA %.4f)",
                     a.train_size, bytes_a == bytes_b ? "bit-identical" : "DIFFER",
                     bytes_a.size(), report_a == report_b ? "identical" : "DIFFER",
                     report_a.char_accuracy)};
}

// ------------------------------------------------------------------- 8

Outcome RightToLeft(const Corpora& corpora, const nn::Checkpoint& trained) {
  int compared = 0, mismatches = 0;
  std::mt19937_64 rng(8008);
  for (const char* preset : {"col_rnn-tiny", "win_rnn-tiny", "cnn_only-tiny", "crnn-tiny"}) {
    auto ltr_cfg = nn::ModelConfig::Preset(preset, 11);
    auto rtl_cfg = ltr_cfg;
    rtl_cfg.direction = imaging::Direction::kRightToLeft;
    const nn::Model ltr(ltr_cfg, 5), rtl(rtl_cfg, 5);
    for (int i = 0; i < 10; ++i) {
      const auto image = testing::RandomImage(8 + static_cast<int>(rng() % 120), 32, rng);
      if (rtl.Forward(image).log_probs() != ltr.Forward(imaging::Mirror(image)).log_probs()) {
        ++mismatches;
      }
      ++compared;
    }
  }

  // The trained toy CRNN read right to left.
  auto flipped = trained;
  flipped.metadata["model"]["direction"] = "rtl";
  const auto ltr = train::Recognizer::FromCheckpoint(trained);
  const auto rtl = train::Recognizer::FromCheckpoint(flipped);
  const auto test = train::LoadDataset(corpora.clean, Split::kTest);
  for (const auto& image : test.images) {
    const auto mirrored = imaging::Mirror(image);
    if (rtl.model.Forward(image).log_probs() != ltr.model.Forward(mirrored).log_probs() ||
        rtl.Recognize(image) != ltr.Recognize(mirrored)) {
      ++mismatches;
    }
    ++compared;
  }
  return {mismatches == 0,
          Format("RTL(I) == LTR(mirror(I)) posteriorgrams bit-for-bit in %d/%d cases "
                 "(4 architectures on random images, trained CRNN on %zu test images)",
                 compared - mismatches, compared, test.size())};
}

int Run(const fs::path& work) {
  const std::vector<std::string> names = {
      "CTC oracle equivalence", "gradient suite",        "best-path witness",
      "toy-alphabet training",  "transfer-learning analog", "metrics oracles",
      "determinism",            "RTL contract"};
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& criterion) {
    Progress("criterion " + std::to_string(n) + ": " + names[n - 1]);
    const Stopwatch clock;
    Outcome o;
    try {
      o = criterion();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n,
                names[n - 1].c_str(), o.detail.c_str(), clock.Seconds());
    std::fflush(stdout);
  };

  report(1, CtcOracleEquivalence);
  report(2, GradientSuite);
  report(3, BestPathWitness);

  Progress("rendering corpora under " + work.string());
  std::optional<Corpora> corpora;
  std::string corpus_error;
  try {
    corpora = MakeCorpora(work);
  } catch (const std::exception& e) {
    corpus_error = e.what();
  }
  auto needs_corpora = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!corpora) return {false, "corpus generation failed: " + corpus_error};
      return f();
    };
  };
  std::optional<nn::Checkpoint> crnn;
  report(4, needs_corpora([&] {
           nn::Checkpoint ckpt;
           auto o = ToyTraining(*corpora, ckpt);
           crnn = std::move(ckpt);
           return o;
         }));
  report(5, needs_corpora([&]() -> Outcome {
           if (!crnn) return {false, "no clean model from criterion 4"};
           return TransferAnalog(*corpora, *crnn);
         }));
  report(6, MetricsOracles);
  report(7, needs_corpora([&] { return Determinism(*corpora); }));
  report(8, needs_corpora([&]() -> Outcome {
           if (!crnn) return {false, "no trained model from criterion 4"};
           return RightToLeft(*corpora, *crnn);
         }));

  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace ctcocr::acceptance

int main(int argc, char** argv) {
  const std::filesystem::path work =
      argc > 1 ? std::filesystem::path(argv[1])
               : std::filesystem::temp_directory_path() / "ctcocr_acceptance";
  return ctcocr::acceptance::Run(work);
}
