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

#ifndef CTCOCR_NN_MODEL_H_
#define CTCOCR_NN_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctcocr/ctc.h"
#include "ctcocr/imaging.h"
#include "ctcocr/nn/layers.h"
#include "json.hpp"

namespace ctcocr::nn {

enum class ModelKind { kColRnn, kWinRnn, kCnnOnly, kCrnn };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

// conv(kernel x kernel, stride 1) -> [batch-norm] -> ReLU -> [max-pool]
struct ConvSpec {
  int out_channels = 64;
  int kernel = 3;
  int padding = 1;
  bool batch_norm = false;
  std::optional<PoolSpec> pool;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct CnnConfig {
  std::vector<ConvSpec> layers;

  // The seven-layer CRNN feature extractor: 64, 128, 256, 256, 512, 512, 512
  // channels; 2x2 pools after the first two layers, 2x2 pools with stride
  // (2, 1) and width padding 1 after the fourth and sixth; batch-norm on the
  // 512-channel 3x3 layers; a final unpadded 2x2 convolution. A height-32
  // input leaves a height-1 map of width floor(floor(W/2)/2) + 1.
  static CnnConfig Crnn();
  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

// W' x H' x C' activations of one image; values laid out [c][h][w].
struct CnnFeatureMap {
  int width = 0, height = 0, channels = 0;
  std::vector<double> values;

  double at(int x, int y, int c) const {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

// T = W', D = H' * C'. Frame t holds column t with feature index
// d = c * H' + h (channel-major, height-minor).
imaging::FeatureSequence MapToSequence(const CnnFeatureMap& map);
CnnFeatureMap SequenceToMap(const imaging::FeatureSequence& seq, int height,
                            int channels);

class Cnn {
 public:
  struct StageCache {
    Tensor4 conv_input;
    BatchNorm2d::Cache bn;
    Tensor4 activation;  // post-ReLU, pre-pool
    std::vector<std::int32_t> pool_argmax;
  };
  struct Cache {
    std::vector<StageCache> stages;
  };

  Cnn() = default;
  explicit Cnn(const CnnConfig& cfg, int input_channels = 1);

  void Init(std::mt19937_64& rng);
  Tensor4 Forward(const Tensor4& x, bool training, Cache* cache) const;
  void Backward(const Cache& cache, const Tensor4& dy);
  void UpdateRunningStats(const Cache& cache);

  // Evaluation-mode forward of one image. Throws kConfig unless the image
  // height is imaging::kInputHeight.
  CnnFeatureMap Forward(const imaging::GrayImage& image) const;

  int OutputWidth(int width) const;
  int OutputHeight(int height) const;
  int out_channels() const;
  // Narrowest input that still yields a width >= 1 map.
  int MinimumInputWidth() const;

  std::vector<ParamArray*> Params();

 private:
  CnnConfig cfg_;
  std::vector<Conv2d> convs_;
  std::vector<std::optional<BatchNorm2d>> norms_;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kCrnn;
  // |L'|
  int alphabet_size = 0;
  // Right-to-left scripts are read last column first.
  imaging::Direction direction = imaging::Direction::kLeftToRight;
  std::optional<RnnConfig> rnn;         // all kinds but CNN_only
  std::optional<imaging::WindowConfig> window;  // Win_RNN only
  std::optional<CnnConfig> cnn;         // CNN_only and CRNN

  // Throws kConfig when kind-specific fields are missing or superfluous.
  void Validate() const;

  nlohmann::ordered_json ToJson() const;
  // Accepts either a full description or {"preset": name, ...overrides}.
  static ModelConfig FromJson(const nlohmann::json& j);

  // Full-size configurations "col_rnn", "win_rnn", "cnn_only", "crnn"
  // (J = 2 layers of 256 units per direction, W_w = 20, S_w = 5), reduced
  // "-tiny" variants for CPU experiments and "crnn-check" (two conv layers,
  // 8 hidden units) for gradient checks.
  static ModelConfig Preset(std::string_view name, int alphabet_size);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class Model {
 public:
  struct Tape {
    std::vector<int> lengths;                    // valid frames per sample
    std::vector<imaging::FeatureSequence> features;  // encoder input
    std::vector<BiLstm::Cache> rnn;
    std::vector<Matrix> encodings;               // head input
    Cnn::Cache cnn;
    int cnn_width = 0, cnn_height = 0, cnn_channels = 0;
  };

  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Number of frames T produced for an input of the given width.
  int OutputLength(int image_width) const;

  // Evaluation-mode logits (T x |L'|) of one preprocessed image.
  Matrix Logits(const imaging::GrayImage& image) const;
  ctc::Posteriorgram Forward(const imaging::GrayImage& image) const;

  // Batched forward. CNN kinds right-pad the batch with background to a
  // common width; each sample's logits are truncated to its own length.
  // `training` selects batch statistics in batch-norm layers.
  std::vector<Matrix> ForwardBatch(std::span<const imaging::GrayImage> batch,
                                   bool training, Tape* tape) const;
  // Accumulates parameter gradients from per-sample dL/dlogits.
  void Backward(const Tape& tape, std::span<const Matrix> dlogits);
  void UpdateRunningStats(const Tape& tape);

  // Every array, trainable parameters and buffers alike, in a fixed order.
  std::vector<ParamArray*> Params();
  std::vector<const ParamArray*> Params() const;
  void ZeroGrad();

  // Parts, exposed for tests.
  const Cnn* cnn() const { return cnn_ ? &*cnn_ : nullptr; }
  const BiLstm* rnn() const { return rnn_ ? &*rnn_ : nullptr; }
  const Linear& head() const { return head_; }

 private:
  imaging::GrayImage Orient(const imaging::GrayImage& image) const;
  int EncoderInputSize() const;

  ModelConfig cfg_;
  std::optional<Cnn> cnn_;
  std::optional<BiLstm> rnn_;
  Linear head_;
};

// Linear projection of each frame followed by softmax.
ctc::Posteriorgram DecodeHead(const Linear& head, const Matrix& encodings);

}  // namespace ctcocr::nn

#endif  // CTCOCR_NN_MODEL_H_
