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

#include "ctcocr/nn/layers.h"

#include <cmath>
#include <limits>

#include "ctcocr/errors.h"

namespace ctcocr::nn {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unfolds sample `n` of `x` into a (C*k*k) x (Ho*Wo) matrix.
void Im2Col(const Tensor4& x, int n, int kernel, int pad, int out_h, int out_w,
            Matrix& cols) {
  for (int c = 0; c < x.c; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* dst = cols.row((c * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy - pad + ky;
          double* row = dst + static_cast<size_t>(oy) * out_w;
          if (iy < 0 || iy >= x.h) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = &x.data[x.index(n, c, iy, 0)];
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox - pad + kx;
            row[ox] = (ix >= 0 && ix < x.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void Col2ImAdd(const Matrix& cols, int n, int kernel, int pad, int out_h,
               int out_w, Tensor4& dx) {
  for (int c = 0; c < dx.c; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* src = cols.row((c * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy - pad + ky;
          if (iy < 0 || iy >= dx.h) continue;
          double* dst = &dx.data[dx.index(n, c, iy, 0)];
          const double* row = src + static_cast<size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox - pad + kx;
            if (ix >= 0 && ix < dx.w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

ParamArray::ParamArray(std::string name, std::vector<int> shape, bool trainable)
    : name(std::move(name)), shape(std::move(shape)), trainable(trainable) {
  Eigen::Index n = 1;
  for (int d : this->shape) n *= d;
  values = Vector::Zero(n);
  grad = Vector::Zero(n);
}

void InitUniformFanIn(ParamArray& param, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < param.values.size(); ++i) param.values[i] = dist(rng);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels,
               int kernel, int padding)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      padding_(padding) {}

void Conv2d::Init(std::mt19937_64& rng) {
  const int fan_in = in_channels_ * kernel_ * kernel_;
  InitUniformFanIn(weight, fan_in, rng);
  InitUniformFanIn(bias, fan_in, rng);
}

Tensor4 Conv2d::Forward(const Tensor4& x) const {
  if (x.c != in_channels_) {
    throw ConfigError(weight.name + ": expected " + std::to_string(in_channels_) +
                      " input channels, got " + std::to_string(x.c));
  }
  const int out_h = OutputSize(x.h);
  const int out_w = OutputSize(x.w);
  if (out_h < 1 || out_w < 1) {
    throw ConfigError(weight.name + ": input " + std::to_string(x.h) + "x" +
                      std::to_string(x.w) + " is smaller than the kernel");
  }
  const int k = in_channels_ * kernel_ * kernel_;
  const int positions = out_h * out_w;
  Tensor4 y(x.n, out_channels_, out_h, out_w);
  Matrix cols(k, positions);
  const auto w = weight.AsMatrix(out_channels_, k);
  const Eigen::Map<const Vector> b(bias.values.data(), out_channels_);
  for (int n = 0; n < x.n; ++n) {
    Im2Col(x, n, kernel_, padding_, out_h, out_w, cols);
    Eigen::Map<Matrix> out(&y.data[y.index(n, 0, 0, 0)], out_channels_, positions);
    out.noalias() = w * cols;
    out.colwise() += b;
  }
  return y;
}

Tensor4 Conv2d::Backward(const Tensor4& x, const Tensor4& dy,
                         bool want_input_grad) {
  const int k = in_channels_ * kernel_ * kernel_;
  const int positions = dy.h * dy.w;
  Matrix cols(k, positions);
  Matrix dcols(k, positions);
  const auto w = weight.AsMatrix(out_channels_, k);
  auto dw = weight.GradAsMatrix(out_channels_, k);
  Tensor4 dx;
  if (want_input_grad) dx = Tensor4(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    Im2Col(x, n, kernel_, padding_, dy.h, dy.w, cols);
    const Eigen::Map<const Matrix> g(&dy.data[dy.index(n, 0, 0, 0)],
                                     out_channels_, positions);
    dw.noalias() += g * cols.transpose();
    bias.grad += g.rowwise().sum();
    if (want_input_grad) {
      dcols.noalias() = w.transpose() * g;
      Col2ImAdd(dcols, n, kernel_, padding_, dy.h, dy.w, dx);
    }
  }
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor4 MaxPool2d::Forward(const Tensor4& x, const PoolSpec& spec,
                           std::vector<std::int32_t>* argmax) {
  const int out_h = OutputSize(x.h, spec.kernel_h, spec.stride_h, spec.pad_h);
  const int out_w = OutputSize(x.w, spec.kernel_w, spec.stride_w, spec.pad_w);
  if (out_h < 1 || out_w < 1) {
    throw ConfigError("max-pool input " + std::to_string(x.h) + "x" +
                      std::to_string(x.w) + " too small for its window");
  }
  Tensor4 y(x.n, x.c, out_h, out_w);
  if (argmax) argmax->assign(y.data.size(), -1);
  size_t out_index = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const double* plane = &x.data[x.index(n, c, 0, 0)];
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++out_index) {
          double best = -std::numeric_limits<double>::infinity();
          std::int32_t best_at = -1;
          for (int ky = 0; ky < spec.kernel_h; ++ky) {
            const int iy = oy * spec.stride_h - spec.pad_h + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < spec.kernel_w; ++kx) {
              const int ix = ox * spec.stride_w - spec.pad_w + kx;
              if (ix < 0 || ix >= x.w) continue;
              const double v = plane[iy * x.w + ix];
              if (best_at < 0 || v > best) {
                best = v;
                best_at = iy * x.w + ix;
              }
            }
          }
          y.data[out_index] = best;
          if (argmax) (*argmax)[out_index] = best_at;
        }
      }
    }
  }
  return y;
}

Tensor4 MaxPool2d::Backward(const Tensor4& x_shape_source, const Tensor4& dy,
                            const std::vector<std::int32_t>& argmax) {
  const Tensor4& x = x_shape_source;
  Tensor4 dx(x.n, x.c, x.h, x.w);
  const size_t plane_out = static_cast<size_t>(dy.h) * dy.w;
  const size_t plane_in = static_cast<size_t>(x.h) * x.w;
  for (size_t p = 0; p < static_cast<size_t>(dy.n) * dy.c; ++p) {
    for (size_t i = 0; i < plane_out; ++i) {
      const auto at = argmax[p * plane_out + i];
      if (at >= 0) dx.data[p * plane_in + at] += dy.data[p * plane_out + i];
    }
  }
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false) {
  gamma.values.setOnes();
  running_var.values.setOnes();
}

Tensor4 BatchNorm2d::Forward(const Tensor4& x, bool training, Cache* cache) const {
  const int channels = x.c;
  const size_t plane = static_cast<size_t>(x.h) * x.w;
  const std::int64_t count = static_cast<std::int64_t>(x.n) * x.h * x.w;
  Vector mean(channels), var(channels);
  if (training) {
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const double* p = &x.data[x.index(n, c, 0, 0)];
        for (size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean[c] = sum / static_cast<double>(count);
      double sq = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const double* p = &x.data[x.index(n, c, 0, 0)];
        for (size_t i = 0; i < plane; ++i) sq += (p[i] - mean[c]) * (p[i] - mean[c]);
      }
      var[c] = sq / static_cast<double>(count);
    }
  } else {
    mean = running_mean.values;
    var = running_var.values;
  }
  Vector inv_std = (var.array() + kEpsilon).rsqrt();
  Tensor4 y(x.n, x.c, x.h, x.w);
  Tensor4 normalized(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      const size_t base = x.index(n, c, 0, 0);
      for (size_t i = 0; i < plane; ++i) {
        const double xhat = (x.data[base + i] - mean[c]) * inv_std[c];
        normalized.data[base + i] = xhat;
        y.data[base + i] = gamma.values[c] * xhat + beta.values[c];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->batch_mean = training ? mean : Vector();
    cache->batch_var = training ? var : Vector();
    cache->count = training ? count : 0;
  }
  return y;
}

Tensor4 BatchNorm2d::Backward(const Cache& cache, const Tensor4& dy) {
  const Tensor4& xhat = cache.normalized;
  const size_t plane = static_cast<size_t>(dy.h) * dy.w;
  const bool training = cache.count > 0;
  const double m = static_cast<double>(cache.count);
  Tensor4 dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < dy.n; ++n) {
      const size_t base = dy.index(n, c, 0, 0);
      for (size_t i = 0; i < plane; ++i) {
        sum_dy += dy.data[base + i];
        sum_dy_xhat += dy.data[base + i] * xhat.data[base + i];
      }
    }
    gamma.grad[c] += sum_dy_xhat;
    beta.grad[c] += sum_dy;
    const double scale = gamma.values[c] * cache.inv_std[c];
    for (int n = 0; n < dy.n; ++n) {
      const size_t base = dy.index(n, c, 0, 0);
      for (size_t i = 0; i < plane; ++i) {
        dx.data[base + i] =
            training ? scale / m *
                           (m * dy.data[base + i] - sum_dy -
                            xhat.data[base + i] * sum_dy_xhat)
                     : scale * dy.data[base + i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::UpdateRunningStats(const Cache& cache) {
  if (cache.count == 0) return;
  const double m = static_cast<double>(cache.count);
  const double unbias = cache.count > 1 ? m / (m - 1.0) : 1.0;
  running_mean.values =
      (1.0 - kMomentum) * running_mean.values + kMomentum * cache.batch_mean;
  running_var.values =
      (1.0 - kMomentum) * running_var.values + kMomentum * unbias * cache.batch_var;
}

// ------------------------------------------------------------------ Lstm

Lstm::Lstm(const std::string& name, int input_size, int hidden_size)
    : w_input(name + ".w_input", {4 * hidden_size, input_size}),
      w_hidden(name + ".w_hidden", {4 * hidden_size, hidden_size}),
      bias(name + ".bias", {4 * hidden_size}),
      input_size_(input_size),
      hidden_(hidden_size) {}

void Lstm::Init(std::mt19937_64& rng) {
  const int fan_in = input_size_ + hidden_;
  InitUniformFanIn(w_input, fan_in, rng);
  InitUniformFanIn(w_hidden, fan_in, rng);
  InitUniformFanIn(bias, fan_in, rng);
  bias.values.segment(hidden_, hidden_).setOnes();
}

Matrix Lstm::Forward(const Matrix& x, Cache* cache) const {
  if (x.cols() != input_size_) {
    throw ConfigError(w_input.name + ": expected input size " +
                      std::to_string(input_size_) + ", got " +
                      std::to_string(x.cols()));
  }
  const int steps = static_cast<int>(x.rows());
  const int h = hidden_;
  const auto wx = w_input.AsMatrix(4 * h, input_size_);
  const auto wh = w_hidden.AsMatrix(4 * h, h);
  Matrix gates = x * wx.transpose();
  gates.rowwise() += bias.values.transpose();
  Matrix cell(steps, h), hidden(steps, h);
  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(h);
  for (int t = 0; t < steps; ++t) {
    auto a = gates.row(t);
    a.noalias() += h_prev * wh.transpose();
    for (int j = 0; j < h; ++j) {
      const double i = Sigmoid(a[j]);
      const double f = Sigmoid(a[h + j]);
      const double g = std::tanh(a[2 * h + j]);
      const double o = Sigmoid(a[3 * h + j]);
      a[j] = i;
      a[h + j] = f;
      a[2 * h + j] = g;
      a[3 * h + j] = o;
      const double c = f * c_prev[j] + i * g;
      cell(t, j) = c;
      hidden(t, j) = o * std::tanh(c);
    }
    h_prev = hidden.row(t);
    c_prev = cell.row(t);
  }
  if (cache) {
    cache->input = x;
    cache->gates = std::move(gates);
    cache->cell = std::move(cell);
    cache->hidden = hidden;
  }
  return hidden;
}

Matrix Lstm::Backward(const Cache& cache, const Matrix& dh) {
  const int steps = static_cast<int>(cache.input.rows());
  const int h = hidden_;
  const auto wx = w_input.AsMatrix(4 * h, input_size_);
  const auto wh = w_hidden.AsMatrix(4 * h, h);
  Matrix dgates(steps, 4 * h);
  Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
  for (int t = steps - 1; t >= 0; --t) {
    const auto gate = cache.gates.row(t);
    for (int j = 0; j < h; ++j) {
      const double i = gate[j], f = gate[h + j], g = gate[2 * h + j],
                   o = gate[3 * h + j];
      const double c = cache.cell(t, j);
      const double c_prev = t > 0 ? cache.cell(t - 1, j) : 0.0;
      const double tc = std::tanh(c);
      const double dht = dh(t, j) + dh_next[j];
      const double dc = dht * o * (1.0 - tc * tc) + dc_next[j];
      dgates(t, j) = dc * g * i * (1.0 - i);
      dgates(t, h + j) = dc * c_prev * f * (1.0 - f);
      dgates(t, 2 * h + j) = dc * i * (1.0 - g * g);
      dgates(t, 3 * h + j) = dht * tc * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    dh_next.noalias() = dgates.row(t) * wh;
  }
  w_input.GradAsMatrix(4 * h, input_size_).noalias() +=
      dgates.transpose() * cache.input;
  if (steps > 1) {
    w_hidden.GradAsMatrix(4 * h, h).noalias() +=
        dgates.bottomRows(steps - 1).transpose() * cache.hidden.topRows(steps - 1);
  }
  bias.grad += dgates.colwise().sum().transpose();
  return dgates * wx;
}

// ---------------------------------------------------------------- BiLstm

BiLstm::BiLstm(const std::string& name, int input_size, const RnnConfig& cfg)
    : cfg_(cfg) {
  if (cfg.layers < 1 || cfg.hidden < 1) {
    throw ConfigError("RNN needs at least one layer and one hidden unit");
  }
  for (int l = 0; l < cfg.layers; ++l) {
    const int in = l == 0 ? input_size : cfg.output_size();
    const std::string prefix = name + ".l" + std::to_string(l);
    forward_.emplace_back(prefix + ".fwd", in, cfg.hidden);
    if (cfg.bidirectional) reverse_.emplace_back(prefix + ".rev", in, cfg.hidden);
  }
}

void BiLstm::Init(std::mt19937_64& rng) {
  for (int l = 0; l < cfg_.layers; ++l) {
    forward_[l].Init(rng);
    if (cfg_.bidirectional) reverse_[l].Init(rng);
  }
}

Matrix BiLstm::Forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->forward.assign(cfg_.layers, {});
    cache->reverse.assign(cfg_.bidirectional ? cfg_.layers : 0, {});
  }
  Matrix current = x;
  for (int l = 0; l < cfg_.layers; ++l) {
    Matrix fwd = forward_[l].Forward(current, cache ? &cache->forward[l] : nullptr);
    if (!cfg_.bidirectional) {
      current = std::move(fwd);
      continue;
    }
    const Matrix reversed_in = current.colwise().reverse();
    const Matrix rev = reverse_[l].Forward(
        reversed_in, cache ? &cache->reverse[l] : nullptr);
    Matrix out(current.rows(), 2 * cfg_.hidden);
    out.leftCols(cfg_.hidden) = fwd;
    out.rightCols(cfg_.hidden) = rev.colwise().reverse();
    current = std::move(out);
  }
  return current;
}

Matrix BiLstm::Backward(const Cache& cache, const Matrix& dy) {
  Matrix grad = dy;
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    if (!cfg_.bidirectional) {
      grad = forward_[l].Backward(cache.forward[l], grad);
      continue;
    }
    Matrix dx = forward_[l].Backward(cache.forward[l], grad.leftCols(cfg_.hidden));
    const Matrix drev = grad.rightCols(cfg_.hidden).colwise().reverse();
    dx += reverse_[l].Backward(cache.reverse[l], drev).colwise().reverse();
    grad = std::move(dx);
  }
  return grad;
}

std::vector<ParamArray*> BiLstm::Params() {
  std::vector<ParamArray*> out;
  for (int l = 0; l < cfg_.layers; ++l) {
    for (Lstm* cell : {&forward_[l], cfg_.bidirectional ? &reverse_[l] : nullptr}) {
      if (!cell) continue;
      out.push_back(&cell->w_input);
      out.push_back(&cell->w_hidden);
      out.push_back(&cell->bias);
    }
  }
  return out;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int input_size, int output_size)
    : weight(name + ".weight", {output_size, input_size}),
      bias(name + ".bias", {output_size}),
      in_(input_size),
      out_(output_size) {}

void Linear::Init(std::mt19937_64& rng) {
  InitUniformFanIn(weight, in_, rng);
  InitUniformFanIn(bias, in_, rng);
}

Matrix Linear::Forward(const Matrix& x) const {
  if (x.cols() != in_) {
    throw ConfigError(weight.name + ": expected input size " +
                      std::to_string(in_) + ", got " + std::to_string(x.cols()));
  }
  Matrix y = x * weight.AsMatrix(out_, in_).transpose();
  y.rowwise() += bias.values.transpose();
  return y;
}

Matrix Linear::Backward(const Matrix& x, const Matrix& dy) {
  weight.GradAsMatrix(out_, in_).noalias() += dy.transpose() * x;
  bias.grad += dy.colwise().sum().transpose();
  return dy * weight.AsMatrix(out_, in_);
}

}  // namespace ctcocr::nn
