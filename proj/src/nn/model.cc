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

#include "ctcocr/nn/model.h"

#include <algorithm>

#include "ctcocr/errors.h"

namespace ctcocr::nn {

using imaging::Direction;
using imaging::FeatureSequence;
using imaging::GrayImage;
using imaging::kInputHeight;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kColRnn:
      return "col_rnn";
    case ModelKind::kWinRnn:
      return "win_rnn";
    case ModelKind::kCnnOnly:
      return "cnn_only";
    case ModelKind::kCrnn:
      return "crnn";
  }
  return "unknown";
}

ModelKind ParseModelKind(std::string_view name) {
  for (auto kind : {ModelKind::kColRnn, ModelKind::kWinRnn, ModelKind::kCnnOnly,
                    ModelKind::kCrnn}) {
    if (ModelKindName(kind) == name) return kind;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

CnnConfig CnnConfig::Crnn() {
  const PoolSpec square{2, 2, 2, 2, 0, 0};
  const PoolSpec tall{2, 2, 2, 1, 0, 1};
  CnnConfig cfg;
  cfg.layers = {
      {64, 3, 1, false, square},  {128, 3, 1, false, square},
      {256, 3, 1, false, {}},     {256, 3, 1, false, tall},
      {512, 3, 1, true, {}},      {512, 3, 1, true, tall},
      {512, 2, 0, false, {}},
  };
  return cfg;
}

// ------------------------------------------------------------ feature map

FeatureSequence MapToSequence(const CnnFeatureMap& map) {
  FeatureSequence seq(map.width, static_cast<Eigen::Index>(map.height) * map.channels);
  for (int t = 0; t < map.width; ++t) {
    for (int c = 0; c < map.channels; ++c) {
      for (int h = 0; h < map.height; ++h) seq(t, c * map.height + h) = map.at(t, h, c);
    }
  }
  return seq;
}

CnnFeatureMap SequenceToMap(const FeatureSequence& seq, int height, int channels) {
  if (height < 1 || channels < 1 || seq.cols() != static_cast<Eigen::Index>(height) * channels) {
    throw InvalidInput("sequence dimension does not factor as height x channels");
  }
  CnnFeatureMap map{static_cast<int>(seq.rows()), height, channels, {}};
  map.values.resize(static_cast<size_t>(map.width) * height * channels);
  for (int t = 0; t < map.width; ++t) {
    for (int c = 0; c < channels; ++c) {
      for (int h = 0; h < height; ++h) {
        map.values[(static_cast<size_t>(c) * height + h) * map.width + t] =
            seq(t, c * height + h);
      }
    }
  }
  return map;
}

// ------------------------------------------------------------------- Cnn

Cnn::Cnn(const CnnConfig& cfg, int input_channels) : cfg_(cfg) {
  if (cfg.layers.empty()) throw ConfigError("CNN needs at least one layer");
  int in = input_channels;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& spec = cfg.layers[i];
    if (spec.out_channels < 1 || spec.kernel < 1 || spec.padding < 0) {
      throw ConfigError("invalid convolution spec at layer " + std::to_string(i));
    }
    convs_.emplace_back("cnn.conv" + std::to_string(i), in, spec.out_channels,
                        spec.kernel, spec.padding);
    if (spec.batch_norm) {
      norms_.emplace_back(BatchNorm2d("cnn.bn" + std::to_string(i), spec.out_channels));
    } else {
      norms_.emplace_back(std::nullopt);
    }
    in = spec.out_channels;
  }
}

void Cnn::Init(std::mt19937_64& rng) {
  for (auto& conv : convs_) conv.Init(rng);
}

Tensor4 Cnn::Forward(const Tensor4& x, bool training, Cache* cache) const {
  if (cache) cache->stages.assign(convs_.size(), {});
  Tensor4 current = x;
  for (size_t i = 0; i < convs_.size(); ++i) {
    StageCache* stage = cache ? &cache->stages[i] : nullptr;
    Tensor4 y = convs_[i].Forward(current);
    if (stage) stage->conv_input = std::move(current);
    if (norms_[i]) y = norms_[i]->Forward(y, training, stage ? &stage->bn : nullptr);
    for (double& v : y.data) v = std::max(v, 0.0);
    if (const auto& pool = cfg_.layers[i].pool) {
      Tensor4 pooled =
          MaxPool2d::Forward(y, *pool, stage ? &stage->pool_argmax : nullptr);
      if (stage) stage->activation = std::move(y);
      current = std::move(pooled);
    } else {
      if (stage) stage->activation = y;
      current = std::move(y);
    }
  }
  return current;
}

void Cnn::Backward(const Cache& cache, const Tensor4& dy) {
  Tensor4 grad = dy;
  for (size_t i = convs_.size(); i-- > 0;) {
    const StageCache& stage = cache.stages[i];
    if (cfg_.layers[i].pool) {
      grad = MaxPool2d::Backward(stage.activation, grad, stage.pool_argmax);
    }
    for (size_t k = 0; k < grad.data.size(); ++k) {
      if (stage.activation.data[k] <= 0.0) grad.data[k] = 0.0;
    }
    if (norms_[i]) grad = norms_[i]->Backward(stage.bn, grad);
    grad = convs_[i].Backward(stage.conv_input, grad, /*want_input_grad=*/i > 0);
  }
}

void Cnn::UpdateRunningStats(const Cache& cache) {
  for (size_t i = 0; i < convs_.size(); ++i) {
    if (norms_[i]) norms_[i]->UpdateRunningStats(cache.stages[i].bn);
  }
}

CnnFeatureMap Cnn::Forward(const GrayImage& image) const {
  if (image.height() != kInputHeight) {
    throw ConfigError("CNN input height must be " + std::to_string(kInputHeight) +
                      ", got " + std::to_string(image.height()));
  }
  Tensor4 x(1, 1, image.height(), image.width());
  std::copy(image.pixels().begin(), image.pixels().end(), x.data.begin());
  Tensor4 y = Forward(x, /*training=*/false, nullptr);
  CnnFeatureMap map{y.w, y.h, y.c, std::move(y.data)};
  return map;
}

int Cnn::OutputWidth(int width) const {
  int w = width;
  for (const auto& spec : cfg_.layers) {
    w = w + 2 * spec.padding - spec.kernel + 1;
    if (w < 1) return 0;
    if (spec.pool) {
      w = MaxPool2d::OutputSize(w, spec.pool->kernel_w, spec.pool->stride_w,
                                spec.pool->pad_w);
      if (w < 1) return 0;
    }
  }
  return w;
}

int Cnn::OutputHeight(int height) const {
  int h = height;
  for (const auto& spec : cfg_.layers) {
    h = h + 2 * spec.padding - spec.kernel + 1;
    if (h < 1) return 0;
    if (spec.pool) {
      h = MaxPool2d::OutputSize(h, spec.pool->kernel_h, spec.pool->stride_h,
                                spec.pool->pad_h);
      if (h < 1) return 0;
    }
  }
  return h;
}

int Cnn::out_channels() const { return cfg_.layers.back().out_channels; }

int Cnn::MinimumInputWidth() const {
  for (int w = 1; w < 4096; ++w) {
    if (OutputWidth(w) >= 1) return w;
  }
  throw ConfigError("CNN reduces every practical width to nothing");
}

std::vector<ParamArray*> Cnn::Params() {
  std::vector<ParamArray*> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    out.push_back(&convs_[i].weight);
    out.push_back(&convs_[i].bias);
    if (norms_[i]) {
      out.push_back(&norms_[i]->gamma);
      out.push_back(&norms_[i]->beta);
      out.push_back(&norms_[i]->running_mean);
      out.push_back(&norms_[i]->running_var);
    }
  }
  return out;
}

// ----------------------------------------------------------- ModelConfig

void ModelConfig::Validate() const {
  const std::string name(ModelKindName(kind));
  if (alphabet_size < 2) {
    throw ConfigError("alphabet size |L'| must be at least 2");
  }
  const bool wants_rnn = kind != ModelKind::kCnnOnly;
  const bool wants_window = kind == ModelKind::kWinRnn;
  const bool wants_cnn = kind == ModelKind::kCnnOnly || kind == ModelKind::kCrnn;
  if (rnn.has_value() != wants_rnn) {
    throw ConfigError(name + (wants_rnn ? " requires" : " must not have") +
                      " an rnn section");
  }
  if (window.has_value() != wants_window) {
    throw ConfigError(name + (wants_window ? " requires" : " must not have") +
                      " a window section");
  }
  if (cnn.has_value() != wants_cnn) {
    throw ConfigError(name + (wants_cnn ? " requires" : " must not have") +
                      " a cnn section");
  }
  if (rnn && (rnn->layers < 1 || rnn->hidden < 1)) {
    throw ConfigError("rnn needs layers >= 1 and hidden >= 1");
  }
  if (window && (window->width < 1 || window->step < 1)) {
    throw ConfigError("window width and step must be >= 1");
  }
  if (cnn) {
    if (cnn->layers.empty()) throw ConfigError("cnn needs at least one layer");
    Cnn probe(*cnn);
    if (probe.OutputHeight(kInputHeight) < 1) {
      throw ConfigError("cnn reduces the input height to nothing");
    }
  }
}

namespace {

ordered_json PoolToJson(const PoolSpec& p) {
  return {{"kernel", {p.kernel_h, p.kernel_w}},
          {"stride", {p.stride_h, p.stride_w}},
          {"padding", {p.pad_h, p.pad_w}}};
}

PoolSpec PoolFromJson(const json& j) {
  PoolSpec p;
  const auto pair = [&](const char* key, int& a, int& b) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number_integer()) {
      a = b = v.get<int>();
    } else {
      a = v.at(0).get<int>();
      b = v.at(1).get<int>();
    }
  };
  pair("kernel", p.kernel_h, p.kernel_w);
  p.stride_h = p.kernel_h;
  p.stride_w = p.kernel_w;
  pair("stride", p.stride_h, p.stride_w);
  pair("padding", p.pad_h, p.pad_w);
  return p;
}

ordered_json CnnToJson(const CnnConfig& cfg) {
  ordered_json layers = ordered_json::array();
  for (const auto& l : cfg.layers) {
    ordered_json e = {{"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"padding", l.padding},
                      {"batch_norm", l.batch_norm}};
    e["pool"] = l.pool ? PoolToJson(*l.pool) : ordered_json(nullptr);
    layers.push_back(std::move(e));
  }
  return {{"layers", layers}};
}

CnnConfig CnnFromJson(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "crnn") return CnnConfig::Crnn();
    throw ConfigError("unknown cnn preset '" + j.get<std::string>() + "'");
  }
  CnnConfig cfg;
  for (const auto& e : j.at("layers")) {
    ConvSpec s;
    s.out_channels = e.at("out_channels").get<int>();
    s.kernel = e.value("kernel", 3);
    s.padding = e.value("padding", s.kernel / 2);
    s.batch_norm = e.value("batch_norm", false);
    if (e.contains("pool") && !e.at("pool").is_null()) s.pool = PoolFromJson(e.at("pool"));
    cfg.layers.push_back(s);
  }
  return cfg;
}

CnnConfig TinyCnn() {
  CnnConfig cfg;
  cfg.layers = {
      {8, 3, 1, false, PoolSpec{2, 2, 2, 2, 0, 0}},
      {16, 3, 1, false, PoolSpec{2, 2, 2, 2, 0, 0}},
      {32, 3, 1, true, PoolSpec{2, 1, 2, 1, 0, 0}},
  };
  return cfg;
}

}  // namespace

ordered_json ModelConfig::ToJson() const {
  ordered_json j;
  j["kind"] = std::string(ModelKindName(kind));
  j["alphabet_size"] = alphabet_size;
  j["direction"] = direction == Direction::kLeftToRight ? "ltr" : "rtl";
  j["input_height"] = kInputHeight;
  j["cnn"] = cnn ? CnnToJson(*cnn) : ordered_json(nullptr);
  j["rnn"] = rnn ? ordered_json{{"layers", rnn->layers},
                                {"hidden", rnn->hidden},
                                {"bidirectional", rnn->bidirectional}}
                 : ordered_json(nullptr);
  j["window"] = window ? ordered_json{{"width", window->width}, {"step", window->step}}
                       : ordered_json(nullptr);
  return j;
}

ModelConfig ModelConfig::FromJson(const json& j) {
  try {
    ModelConfig cfg;
    if (j.contains("preset")) {
      cfg = Preset(j.at("preset").get<std::string>(), j.value("alphabet_size", 0));
    } else {
      cfg.kind = ParseModelKind(j.at("kind").get<std::string>());
    }
    if (j.contains("kind") && j.contains("preset")) {
      cfg.kind = ParseModelKind(j.at("kind").get<std::string>());
    }
    cfg.alphabet_size = j.value("alphabet_size", cfg.alphabet_size);
    if (j.contains("input_height") && j.at("input_height").get<int>() != kInputHeight) {
      throw ConfigError("only input height " + std::to_string(kInputHeight) +
                        " is supported");
    }
    if (j.contains("direction")) {
      const auto d = j.at("direction").get<std::string>();
      if (d == "ltr") {
        cfg.direction = Direction::kLeftToRight;
      } else if (d == "rtl") {
        cfg.direction = Direction::kRightToLeft;
      } else {
        throw ConfigError("direction must be 'ltr' or 'rtl'");
      }
    }
    if (j.contains("cnn")) {
      cfg.cnn = j.at("cnn").is_null() ? std::nullopt
                                      : std::optional(CnnFromJson(j.at("cnn")));
    }
    if (j.contains("rnn")) {
      if (j.at("rnn").is_null()) {
        cfg.rnn.reset();
      } else {
        const auto& r = j.at("rnn");
        RnnConfig rc;
        rc.layers = r.value("layers", rc.layers);
        rc.hidden = r.value("hidden", rc.hidden);
        rc.bidirectional = r.value("bidirectional", rc.bidirectional);
        cfg.rnn = rc;
      }
    }
    if (j.contains("window")) {
      if (j.at("window").is_null()) {
        cfg.window.reset();
      } else {
        imaging::WindowConfig w;
        w.width = j.at("window").value("width", w.width);
        w.step = j.at("window").value("step", w.step);
        cfg.window = w;
      }
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

ModelConfig ModelConfig::Preset(std::string_view name, int alphabet_size) {
  ModelConfig cfg;
  cfg.alphabet_size = alphabet_size;
  const RnnConfig full_rnn{2, 256, true};
  if (name == "col_rnn") {
    cfg.kind = ModelKind::kColRnn;
    cfg.rnn = full_rnn;
  } else if (name == "win_rnn") {
    cfg.kind = ModelKind::kWinRnn;
    cfg.rnn = full_rnn;
    cfg.window = imaging::WindowConfig{20, 5};
  } else if (name == "cnn_only") {
    cfg.kind = ModelKind::kCnnOnly;
    cfg.cnn = CnnConfig::Crnn();
  } else if (name == "crnn") {
    cfg.kind = ModelKind::kCrnn;
    cfg.cnn = CnnConfig::Crnn();
    cfg.rnn = full_rnn;
  } else if (name == "col_rnn-tiny") {
    cfg.kind = ModelKind::kColRnn;
    cfg.rnn = RnnConfig{2, 32, true};
  } else if (name == "win_rnn-tiny") {
    cfg.kind = ModelKind::kWinRnn;
    cfg.rnn = RnnConfig{2, 32, true};
    cfg.window = imaging::WindowConfig{20, 5};
  } else if (name == "cnn_only-tiny") {
    cfg.kind = ModelKind::kCnnOnly;
    cfg.cnn = TinyCnn();
  } else if (name == "crnn-tiny") {
    cfg.kind = ModelKind::kCrnn;
    cfg.cnn = TinyCnn();
    cfg.rnn = RnnConfig{1, 32, true};
  } else if (name == "crnn-check") {
    cfg.kind = ModelKind::kCrnn;
    CnnConfig check;
    check.layers = {{3, 3, 1, false, PoolSpec{2, 2, 2, 2, 0, 0}},
                    {4, 3, 1, true, PoolSpec{2, 2, 2, 2, 0, 0}}};
    cfg.cnn = check;
    cfg.rnn = RnnConfig{1, 8, true};
  } else {
    throw ConfigError("unknown model preset '" + std::string(name) + "'");
  }
  return cfg;
}

// ----------------------------------------------------------------- Model

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  std::mt19937_64 rng(seed);
  if (cfg_.cnn) {
    cnn_.emplace(*cfg_.cnn);
    cnn_->Init(rng);
  }
  if (cfg_.rnn) {
    rnn_.emplace("rnn", EncoderInputSize(), *cfg_.rnn);
    rnn_->Init(rng);
  }
  const int enc = cfg_.rnn ? cfg_.rnn->output_size() : EncoderInputSize();
  head_ = Linear("head", enc, cfg_.alphabet_size);
  head_.Init(rng);
}

int Model::EncoderInputSize() const {
  switch (cfg_.kind) {
    case ModelKind::kColRnn:
      return kInputHeight;
    case ModelKind::kWinRnn:
      return kInputHeight * cfg_.window->width;
    case ModelKind::kCnnOnly:
    case ModelKind::kCrnn:
      return cnn_->OutputHeight(kInputHeight) * cnn_->out_channels();
  }
  return 0;
}

int Model::OutputLength(int image_width) const {
  switch (cfg_.kind) {
    case ModelKind::kColRnn:
      return image_width;
    case ModelKind::kWinRnn:
      return imaging::WindowFrameCount(image_width, *cfg_.window);
    case ModelKind::kCnnOnly:
    case ModelKind::kCrnn:
      return cnn_->OutputWidth(std::max(image_width, cnn_->MinimumInputWidth()));
  }
  return 0;
}

GrayImage Model::Orient(const GrayImage& image) const {
  if (image.height() != kInputHeight) {
    throw ConfigError("model input height must be " + std::to_string(kInputHeight) +
                      ", got " + std::to_string(image.height()));
  }
  return cfg_.direction == Direction::kRightToLeft ? imaging::Mirror(image) : image;
}

std::vector<Matrix> Model::ForwardBatch(std::span<const GrayImage> batch,
                                        bool training, Tape* tape) const {
  const int n = static_cast<int>(batch.size());
  std::vector<FeatureSequence> features(n);
  std::vector<int> lengths(n);

  if (cnn_) {
    const int min_width = cnn_->MinimumInputWidth();
    int width = min_width;
    for (const auto& img : batch) width = std::max(width, img.width());
    Tensor4 x(n, 1, kInputHeight, width, imaging::kBackground);
    for (int i = 0; i < n; ++i) {
      const GrayImage img = Orient(batch[i]);
      for (int y = 0; y < img.height(); ++y) {
        std::copy_n(&img.pixels()[static_cast<size_t>(y) * img.width()], img.width(),
                    &x.data[x.index(i, 0, y, 0)]);
      }
    }
    Cnn::Cache* cache = tape ? &tape->cnn : nullptr;
    const Tensor4 fmap = cnn_->Forward(x, training, cache);
    for (int i = 0; i < n; ++i) {
      lengths[i] = OutputLength(batch[i].width());
      FeatureSequence seq(lengths[i], static_cast<Eigen::Index>(fmap.h) * fmap.c);
      for (int t = 0; t < lengths[i]; ++t) {
        for (int c = 0; c < fmap.c; ++c) {
          for (int h = 0; h < fmap.h; ++h) seq(t, c * fmap.h + h) = fmap.at(i, c, h, t);
        }
      }
      features[i] = std::move(seq);
    }
    if (tape) {
      tape->cnn_width = fmap.w;
      tape->cnn_height = fmap.h;
      tape->cnn_channels = fmap.c;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const GrayImage img = Orient(batch[i]);
      features[i] = cfg_.kind == ModelKind::kColRnn
                        ? imaging::ExtractColumns(img)
                        : imaging::ExtractWindows(img, *cfg_.window);
      lengths[i] = static_cast<int>(features[i].rows());
    }
  }

  std::vector<Matrix> logits(n);
  if (tape) {
    tape->rnn.assign(rnn_ ? n : 0, {});
    tape->encodings.assign(n, {});
  }
  for (int i = 0; i < n; ++i) {
    Matrix enc = rnn_ ? rnn_->Forward(features[i], tape ? &tape->rnn[i] : nullptr)
                      : features[i];
    logits[i] = head_.Forward(enc);
    if (tape) tape->encodings[i] = std::move(enc);
  }
  if (tape) {
    tape->features = std::move(features);
    tape->lengths = std::move(lengths);
  }
  return logits;
}

void Model::Backward(const Tape& tape, std::span<const Matrix> dlogits) {
  const int n = static_cast<int>(dlogits.size());
  std::vector<Matrix> dfeatures(n);
  for (int i = 0; i < n; ++i) {
    Matrix denc = head_.Backward(tape.encodings[i], dlogits[i]);
    dfeatures[i] = rnn_ ? rnn_->Backward(tape.rnn[i], denc) : std::move(denc);
  }
  if (!cnn_) return;
  Tensor4 dmap(n, tape.cnn_channels, tape.cnn_height, tape.cnn_width);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < tape.lengths[i]; ++t) {
      for (int c = 0; c < dmap.c; ++c) {
        for (int h = 0; h < dmap.h; ++h) {
          dmap.at(i, c, h, t) = dfeatures[i](t, c * dmap.h + h);
        }
      }
    }
  }
  cnn_->Backward(tape.cnn, dmap);
}

void Model::UpdateRunningStats(const Tape& tape) {
  if (cnn_) cnn_->UpdateRunningStats(tape.cnn);
}

Matrix Model::Logits(const GrayImage& image) const {
  return ForwardBatch(std::span<const GrayImage>(&image, 1), false, nullptr)[0];
}

ctc::Posteriorgram Model::Forward(const GrayImage& image) const {
  return ctc::Posteriorgram::FromLogits(Logits(image));
}

std::vector<ParamArray*> Model::Params() {
  std::vector<ParamArray*> out;
  if (cnn_) {
    auto p = cnn_->Params();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (rnn_) {
    auto p = rnn_->Params();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const ParamArray*> Model::Params() const {
  auto mutable_params = const_cast<Model*>(this)->Params();
  return {mutable_params.begin(), mutable_params.end()};
}

void Model::ZeroGrad() {
  for (auto* p : Params()) p->grad.setZero();
}

ctc::Posteriorgram DecodeHead(const Linear& head, const Matrix& encodings) {
  return ctc::Posteriorgram::FromLogits(head.Forward(encodings));
}

}  // namespace ctcocr::nn
