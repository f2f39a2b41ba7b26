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

#ifndef CTCOCR_IMAGING_H_
#define CTCOCR_IMAGING_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ctcocr/types.h"

namespace ctcocr::imaging {

// Recognizer input height after preprocessing.
inline constexpr int kInputHeight = 32;
// Intensity used for padding beyond the right edge of an image; document
// backgrounds are light.
inline constexpr double kBackground = 1.0;

// Grey-scale image with intensities in [0,1], stored row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = kBackground);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  double& at(int x, int y) { return pixels_[static_cast<size_t>(y) * width_ + x]; }
  double at(int x, int y) const {
    return pixels_[static_cast<size_t>(y) * width_ + x];
  }
  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

enum class Direction { kLeftToRight, kRightToLeft };

struct WindowConfig {
  int width = 20;
  int step = 5;
  Direction direction = Direction::kLeftToRight;
  friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

// T x D; row t is frame t.
using FeatureSequence = Matrix;

// PNG (any colour type; alpha composited over white) or binary/ASCII PGM.
// Colour is reduced with luminance weights 0.299/0.587/0.114.
GrayImage DecodeImage(std::span<const std::uint8_t> bytes);
GrayImage LoadImage(const std::filesystem::path& path);

// 8-bit output; the format follows the extension (.png, otherwise PGM).
std::vector<std::uint8_t> EncodePgm(const GrayImage& image);
std::vector<std::uint8_t> EncodePng(const GrayImage& image);
void SaveImage(const GrayImage& image, const std::filesystem::path& path);

// Half-pixel-centre bilinear interpolation; identity when sizes match.
GrayImage ResizeBilinear(const GrayImage& image, int width, int height);

// Grey-scale, height 32, width round(W * 32 / H) clamped to >= 1,
// intensities snapped to the 8-bit grid so that the result survives a PGM
// round trip. Idempotent.
GrayImage Preprocess(const GrayImage& image);
GrayImage Preprocess(std::span<const std::uint8_t> raw);

GrayImage Mirror(const GrayImage& image);
// Throws kInvalidInput if the rectangle is empty or leaves the image.
GrayImage Crop(const GrayImage& image, int x, int y, int width, int height);

// One frame per column: T = W, D = H.
FeatureSequence ExtractColumns(const GrayImage& image,
                               Direction direction = Direction::kLeftToRight);

// Sliding window: T = max(1, floor(W / step)), D = H * width. Frame t stacks
// columns [t*step, t*step + width) column by column; columns past the right
// edge read as kBackground.
FeatureSequence ExtractWindows(const GrayImage& image, const WindowConfig& cfg);
int WindowFrameCount(int image_width, const WindowConfig& cfg);

}  // namespace ctcocr::imaging

#endif  // CTCOCR_IMAGING_H_
