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

// Command-line front end: train, evaluate, recognize, page-ocr, synth.
//
// Results go to stdout. Failures print one JSON object
// {"error": <kind>, "message": <text>} on stderr and exit nonzero.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctcocr/errors.h"
#include "ctcocr/imaging.h"
#include "ctcocr/manifest.h"
#include "ctcocr/metrics.h"
#include "ctcocr/nn/checkpoint.h"
#include "ctcocr/pipeline.h"
#include "ctcocr/synthgen.h"
#include "ctcocr/trainer.h"
#include "ctcocr/utf8.h"
#include "json.hpp"

namespace ctcocr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Exit codes.
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> config;
  std::optional<fs::path> checkpoint;
};

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadConfig(const std::optional<fs::path>& path) {
  if (!path) return json::object();
  try {
    auto j = json::parse(ReadText(*path));
    if (!j.is_object()) throw ConfigError(path->string() + ": expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path->string() + ": " + e.what());
  }
}

// Rejects keys outside `allowed` so that typos do not pass silently.
void CheckKeys(const json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
}

template <typename T>
T Get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

nn::Checkpoint RequireCheckpoint(const CommonFlags& common) {
  if (!common.checkpoint) throw ConfigError("--checkpoint is required");
  return nn::Checkpoint::Load(*common.checkpoint);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path manifest;
  std::optional<std::string> unit;
  std::optional<fs::path> fine_tune;
  std::optional<double> real_fraction;
  std::optional<int> epochs;
  std::optional<fs::path> log;
};

// Config keys: model (preset name or model JSON), epochs, batch_size,
// learning_rate, unit, real_fraction, seed.
int RunTrain(const CommonFlags& common, const TrainArgs& args) {
  if (!common.checkpoint) throw ConfigError("--checkpoint (output path) is required");
  const json cfg = ReadConfig(common.config);
  CheckKeys(cfg, {"model", "epochs", "batch_size", "learning_rate", "unit", "real_fraction",
                  "seed"});

  train::TrainPlan plan;
  plan.epochs = args.epochs.value_or(Get(cfg, "epochs", plan.epochs));
  plan.batch_size = Get(cfg, "batch_size", plan.batch_size);
  plan.learning_rate = Get(cfg, "learning_rate", plan.learning_rate);
  plan.unit = train::ParseUnit(args.unit.value_or(Get<std::string>(cfg, "unit", "word")));
  plan.seed = common.seed.value_or(Get<std::uint64_t>(cfg, "seed", 0));
  if (args.real_fraction) {
    plan.real_fraction = args.real_fraction;
  } else if (cfg.contains("real_fraction")) {
    plan.real_fraction = Get(cfg, "real_fraction", 1.0);
  }
  json model = cfg.value("model", json("crnn"));
  if (model.is_string()) model = json{{"preset", model}};
  plan.config = nn::ModelConfig::FromJson(model);
  if (args.fine_tune) plan.fine_tune_from = nn::Checkpoint::Load(*args.fine_tune);

  const auto manifest = train::Manifest::Load(args.manifest, plan.unit);
  std::optional<std::ofstream> log_file;
  if (args.log) {
    log_file.emplace(*args.log);
    if (!*log_file) throw IoError("cannot write " + args.log->string());
    *log_file << train::TrainLogCsvHeader() << "\n";
  }
  std::cout << train::TrainLogCsvHeader() << "\n";
  const auto result = train::Train(plan, manifest, [&](const train::EpochLog& e) {
    const auto row = train::TrainLogCsvRow(e);
    std::cout << row << std::endl;
    if (log_file) *log_file << row << std::endl;
  });
  result.checkpoint.Save(*common.checkpoint);
  return 0;
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::optional<fs::path> pred, gt, manifest;
  std::string mode = "word";
  std::optional<std::string> split;
  std::string format = "json";
};

// Records of a prediction or ground-truth file keyed by the image path as
// written. Unlike the training manifest, empty texts are allowed anywhere.
struct Record {
  std::u32string text;
  std::optional<train::Split> split;
};

std::vector<std::pair<std::string, Record>> ReadRecords(const fs::path& path) {
  std::vector<std::pair<std::string, Record>> records;
  std::istringstream in(ReadText(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      throw FormatError(where + ": expected path<TAB>text[<TAB>split]");
    }
    Record r;
    try {
      r.text = DecodeUtf8(fields[1]);
    } catch (const Error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (fields.size() == 3) r.split = train::ParseSplit(fields[2]);
    records.emplace_back(fields[0], std::move(r));
  }
  return records;
}

void PrintReport(const metrics::EvalReport& report, const std::string& format) {
  if (format == "csv") {
    std::cout << metrics::EvalReport::CsvHeader() << "\n" << report.ToCsvRow() << "\n";
  } else {
    std::cout << report.ToJson().dump(2) << "\n";
  }
}

int RunEvaluate(const CommonFlags& common, const EvaluateArgs& args) {
  std::optional<train::Split> split;
  if (args.split) split = train::ParseSplit(*args.split);

  if (args.pred || args.gt) {
    if (!args.pred || !args.gt) throw ConfigError("--pred and --gt go together");
    std::map<std::string, std::u32string> predictions;
    for (auto& [key, r] : ReadRecords(*args.pred)) {
      if (!predictions.emplace(key, std::move(r.text)).second) {
        throw FormatError("duplicate prediction for " + key);
      }
    }
    std::vector<metrics::TextPair> pairs;
    for (auto& [key, r] : ReadRecords(*args.gt)) {
      if (split && r.split != split) continue;
      const auto it = predictions.find(key);
      if (it == predictions.end()) throw InvalidInput("no prediction for " + key);
      pairs.push_back({it->second, std::move(r.text)});
    }
    if (pairs.empty()) throw InvalidInput("no ground-truth records to evaluate");
    PrintReport(metrics::Evaluate(pairs, args.mode != "word"), args.format);
    return 0;
  }

  if (!args.manifest) throw ConfigError("give --pred/--gt, or --checkpoint with --manifest");
  if (args.mode == "page") throw ConfigError("page mode needs --pred/--gt");
  const auto ckpt = RequireCheckpoint(common);
  const auto manifest = train::Manifest::Load(
      *args.manifest, args.mode == "line" ? train::Unit::kLine : train::Unit::kWord);
  PrintReport(train::Evaluate(ckpt, manifest, split.value_or(train::Split::kTest)),
              args.format);
  return 0;
}

// ------------------------------------------------------------ recognize

struct RecognizeArgs {
  std::vector<fs::path> images;
  std::optional<fs::path> manifest;
  std::optional<std::string> split;
};

// With --image, one transcription per line. With --manifest, a prediction
// file in manifest layout that `evaluate --pred` accepts.
int RunRecognize(const CommonFlags& common, const RecognizeArgs& args) {
  if (args.images.empty() == !args.manifest) {
    throw ConfigError("give either --image or --manifest");
  }
  const auto recognizer = train::Recognizer::FromCheckpoint(RequireCheckpoint(common));
  auto transcribe = [&](const fs::path& path) {
    return EncodeUtf8(recognizer.Recognize(imaging::Preprocess(imaging::LoadImage(path))));
  };
  for (const auto& image : args.images) std::cout << transcribe(image) << "\n";
  if (args.manifest) {
    const auto manifest = train::Manifest::Load(*args.manifest, recognizer.unit);
    const std::optional<train::Split> split =
        args.split ? std::optional(train::ParseSplit(*args.split)) : std::nullopt;
    for (const auto& e : manifest.entries) {
      if (split && e.split != *split) continue;
      std::cout << e.image.generic_string() << "\t" << transcribe(manifest.Resolve(e)) << "\t"
                << train::SplitName(e.split) << "\n";
    }
  }
  return 0;
}

// ------------------------------------------------------------- page-ocr

struct PageOcrArgs {
  fs::path page;
  fs::path boxes;
  std::optional<fs::path> gt;
  bool json_output = false;
};

int RunPageOcr(const CommonFlags& common, const PageOcrArgs& args) {
  const auto recognizer = train::Recognizer::FromCheckpoint(RequireCheckpoint(common));
  const auto page = imaging::LoadImage(args.page);
  const auto detections = pipeline::DetectionSet::Load(args.boxes);
  const auto result = pipeline::RecognizePage(page, detections, recognizer);

  std::optional<metrics::EvalReport> report;
  if (args.gt) report = pipeline::ScorePage(result, DecodeUtf8(ReadText(*args.gt)));

  if (!args.json_output) {
    std::cout << EncodeUtf8(result.text) << "\n";
    for (const auto& b : result.per_box) {
      if (b.error) {
        std::cerr << "box " << b.box.order_index << " skipped: " << *b.error << "\n";
      }
    }
    if (report) std::cerr << report->ToJson().dump() << "\n";
    return 0;
  }
  ordered_json out;
  out["text"] = EncodeUtf8(result.text);
  out["boxes"] = ordered_json::array();
  for (const auto& b : result.per_box) {
    ordered_json e = {{"x", b.box.x},
                      {"y", b.box.y},
                      {"width", b.box.width},
                      {"height", b.box.height},
                      {"order_index", b.box.order_index},
                      {"unit", train::UnitName(b.box.unit)},
                      {"text", EncodeUtf8(b.text)}};
    if (b.box.line_id) e["line_id"] = *b.box.line_id;
    if (b.error) e["error"] = *b.error;
    out["boxes"].push_back(std::move(e));
  }
  if (report) out["report"] = report->ToJson();
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  fs::path lexicon;
  int count = 0;
  fs::path out;
  std::optional<int> val, test, per_word;
  std::optional<std::string> style, format, unit;
};

// Config keys: val, test, per_word, style, format, unit. Flags win.
int RunSynth(const CommonFlags& common, const SynthArgs& args) {
  const json cfg = ReadConfig(common.config);
  CheckKeys(cfg, {"val", "test", "per_word", "style", "format", "unit", "seed"});

  std::vector<std::u32string> lexicon;
  std::istringstream in(ReadText(args.lexicon));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lexicon.push_back(DecodeUtf8(line));
  }

  synth::CorpusOptions options;
  options.train = args.count;
  options.val = args.val.value_or(Get(cfg, "val", 0));
  options.test = args.test.value_or(Get(cfg, "test", 0));
  if (args.per_word) {
    options.per_word = args.per_word;
  } else if (cfg.contains("per_word")) {
    options.per_word = Get(cfg, "per_word", 1);
  }
  options.seed = common.seed.value_or(Get<std::uint64_t>(cfg, "seed", 0));
  options.style = synth::ParseStyle(args.style.value_or(Get<std::string>(cfg, "style", "clean")));
  options.format = args.format.value_or(Get<std::string>(cfg, "format", "pgm"));
  options.unit = train::ParseUnit(args.unit.value_or(Get<std::string>(cfg, "unit", "word")));

  const synth::Synthesizer synthesizer;
  synth::GenerateCorpus(synthesizer, lexicon, options, args.out);
  std::cout << (args.out / "manifest.tsv").string() << "\n";
  return 0;
}

void PrintError(std::string_view kind, std::string_view message) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

int Main(int argc, char** argv) {
  CLI::App app{"CTC text recognition: training, evaluation and page OCR", "ctcocr"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags common;
  app.add_option("--seed", common.seed, "Random seed");
  app.add_option("--config", common.config, "JSON configuration file");
  app.add_option("--checkpoint", common.checkpoint,
                 "Checkpoint file (written by train, read otherwise)");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model from a manifest");
  train->add_option("--manifest", train_args.manifest, "Manifest with train/val splits")
      ->required();
  train->add_option("--unit", train_args.unit, "word or line");
  train->add_option("--fine-tune", train_args.fine_tune, "Start from this checkpoint");
  train->add_option("--real-fraction", train_args.real_fraction,
                    "Fraction of the train split to use");
  train->add_option("--epochs", train_args.epochs, "Number of epochs");
  train->add_option("--log", train_args.log, "Also write the epoch CSV here");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions or a checkpoint");
  evaluate->add_option("--pred", eval_args.pred, "Prediction file (path, text[, split])");
  evaluate->add_option("--gt", eval_args.gt, "Ground-truth manifest");
  evaluate->add_option("--manifest", eval_args.manifest, "Manifest to recognize and score");
  evaluate->add_option("--mode", eval_args.mode, "word, line or page")
      ->check(CLI::IsMember({"word", "line", "page"}));
  evaluate->add_option("--split", eval_args.split, "Restrict to one split");
  evaluate->add_option("--format", eval_args.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  RecognizeArgs rec_args;
  auto* recognize = app.add_subcommand("recognize", "Transcribe cropped word or line images");
  recognize->add_option("--image", rec_args.images, "Image file (repeatable)");
  recognize->add_option("--manifest", rec_args.manifest, "Transcribe every manifest entry");
  recognize->add_option("--split", rec_args.split, "Restrict --manifest to one split");

  PageOcrArgs page_args;
  auto* page_ocr = app.add_subcommand("page-ocr", "Recognize detected boxes on a page");
  page_ocr->add_option("--page", page_args.page, "Page image")->required();
  page_ocr->add_option("--boxes", page_args.boxes, "Detection file")->required();
  page_ocr->add_option("--gt", page_args.gt, "Ground-truth page text to score against");
  page_ocr->add_flag("--json", page_args.json_output, "Emit per-box JSON");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Render a synthetic corpus");
  synth->add_option("--lexicon", synth_args.lexicon, "One word per line")->required();
  synth->add_option("--count", synth_args.count, "Train images")->required()->check(
      CLI::NonNegativeNumber);
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--val", synth_args.val, "Validation images");
  synth->add_option("--test", synth_args.test, "Test images");
  synth->add_option("--per-word", synth_args.per_word, "Images per lexicon word, in order");
  synth->add_option("--style", synth_args.style, "clean or degraded");
  synth->add_option("--format", synth_args.format, "pgm or png");
  synth->add_option("--unit", synth_args.unit, "word or line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*train) return RunTrain(common, train_args);
    if (*evaluate) return RunEvaluate(common, eval_args);
    if (*recognize) return RunRecognize(common, rec_args);
    if (*page_ocr) return RunPageOcr(common, page_args);
    if (*synth) return RunSynth(common, synth_args);
  } catch (const Error& e) {
    PrintError(ErrorKindName(e.kind()), e.what());
    return kExitError;
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace ctcocr::cli

int main(int argc, char** argv) { return ctcocr::cli::Main(argc, argv); }
