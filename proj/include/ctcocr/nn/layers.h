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

#ifndef CTCOCR_NN_LAYERS_H_
#define CTCOCR_NN_LAYERS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctcocr/types.h"

namespace ctcocr::nn {

// A named parameter (or non-trainable buffer such as batch-norm running
// statistics) with its gradient accumulator. Values are stored flat in
// row-major order of `shape`.
struct ParamArray {
  ParamArray() = default;
  ParamArray(std::string name, std::vector<int> shape, bool trainable = true);

  Eigen::Index size() const { return values.size(); }
  // Views the values as a rows x cols row-major matrix.
  Eigen::Map<Matrix> AsMatrix(int rows, int cols) {
    return Eigen::Map<Matrix>(values.data(), rows, cols);
  }
  Eigen::Map<const Matrix> AsMatrix(int rows, int cols) const {
    return Eigen::Map<const Matrix>(values.data(), rows, cols);
  }
  Eigen::Map<Matrix> GradAsMatrix(int rows, int cols) {
    return Eigen::Map<Matrix>(grad.data(), rows, cols);
  }

  std::string name;
  std::vector<int> shape;
  Vector values;
  Vector grad;
  bool trainable = true;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void InitUniformFanIn(ParamArray& param, int fan_in, std::mt19937_64& rng);

// Dense N x C x H x W activations.
struct Tensor4 {
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, double fill = 0.0)
      : n(n), c(c), h(h), w(w),
        data(static_cast<size_t>(n) * c * h * w, fill) {}

  size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  double& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  double at(int in, int ic, int iy, int ix) const {
    return data[index(in, ic, iy, ix)];
  }
  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;
};

struct PoolSpec {
  int kernel_h = 2, kernel_w = 2;
  int stride_h = 2, stride_w = 2;
  int pad_h = 0, pad_w = 0;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

// Stride-1 square convolution with zero padding.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
         int padding);

  void Init(std::mt19937_64& rng);
  Tensor4 Forward(const Tensor4& x) const;
  // Accumulates weight/bias gradients; returns dL/dx when requested.
  Tensor4 Backward(const Tensor4& x, const Tensor4& dy, bool want_input_grad);

  int OutputSize(int size) const { return size + 2 * padding_ - kernel_ + 1; }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

  ParamArray weight;  // [out, in, k, k]
  ParamArray bias;    // [out]

 private:
  int in_channels_ = 0, out_channels_ = 0, kernel_ = 0, padding_ = 0;
};

// Max pooling; padded cells never win. Ties go to the first cell in scan
// order.
struct MaxPool2d {
  static int OutputSize(int size, int kernel, int stride, int pad) {
    return (size + 2 * pad - kernel) / stride + 1;
  }
  static Tensor4 Forward(const Tensor4& x, const PoolSpec& spec,
                         std::vector<std::int32_t>* argmax);
  static Tensor4 Backward(const Tensor4& x_shape_source, const Tensor4& dy,
                          const std::vector<std::int32_t>& argmax);
};

class BatchNorm2d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  struct Cache {
    Tensor4 normalized;
    Vector inv_std;
    Vector batch_mean;
    Vector batch_var;  // biased
    std::int64_t count = 0;
  };

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels);

  // Training mode normalizes with batch statistics; evaluation mode with the
  // running estimates. Running estimates only change in UpdateRunningStats.
  Tensor4 Forward(const Tensor4& x, bool training, Cache* cache) const;
  Tensor4 Backward(const Cache& cache, const Tensor4& dy);
  void UpdateRunningStats(const Cache& cache);

  ParamArray gamma, beta;
  ParamArray running_mean, running_var;  // non-trainable
};

// One direction of an LSTM with gates ordered (input, forget, cell, output):
//   a_t = W_x x_t + W_h h_{t-1} + b
//   c_t = sigma(f) * c_{t-1} + sigma(i) * tanh(g);  h_t = sigma(o) * tanh(c_t)
class Lstm {
 public:
  struct Cache {
    Matrix input;   // T x D
    Matrix gates;   // T x 4H, post-activation
    Matrix cell;    // T x H
    Matrix hidden;  // T x H
  };

  Lstm() = default;
  Lstm(const std::string& name, int input_size, int hidden_size);

  // Uniform fan-in init, forget-gate bias set to 1.
  void Init(std::mt19937_64& rng);
  Matrix Forward(const Matrix& x, Cache* cache) const;
  Matrix Backward(const Cache& cache, const Matrix& dh);

  int hidden_size() const { return hidden_; }

  ParamArray w_input;   // [4H, D]
  ParamArray w_hidden;  // [4H, H]
  ParamArray bias;      // [4H]

 private:
  int input_size_ = 0, hidden_ = 0;
};

struct RnnConfig {
  int layers = 2;
  int hidden = 256;
  bool bidirectional = true;
  // D' of the encoding.
  int output_size() const { return bidirectional ? 2 * hidden : hidden; }
  friend bool operator==(const RnnConfig&, const RnnConfig&) = default;
};

// Stacked (bi-directional) LSTM encoder. Per layer, the reverse direction
// reads the sequence last-to-first and its outputs are re-aligned to the
// forward time axis before concatenation [forward | reverse].
class BiLstm {
 public:
  struct Cache {
    std::vector<Lstm::Cache> forward, reverse;
  };

  BiLstm() = default;
  BiLstm(const std::string& name, int input_size, const RnnConfig& cfg);

  void Init(std::mt19937_64& rng);
  Matrix Forward(const Matrix& x, Cache* cache) const;
  Matrix Backward(const Cache& cache, const Matrix& dy);

  std::vector<ParamArray*> Params();
  const RnnConfig& config() const { return cfg_; }

 private:
  RnnConfig cfg_;
  std::vector<Lstm> forward_, reverse_;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int input_size, int output_size);

  void Init(std::mt19937_64& rng);
  Matrix Forward(const Matrix& x) const;
  Matrix Backward(const Matrix& x, const Matrix& dy);

  ParamArray weight;  // [out, in]
  ParamArray bias;    // [out]

 private:
  int in_ = 0, out_ = 0;
};

}  // namespace ctcocr::nn

#endif  // CTCOCR_NN_LAYERS_H_
