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

#include "ctcocr/imaging.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "ctcocr/errors.h"

namespace ctcocr::imaging {
namespace {

double Luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (r == g && g == b) return r / 255.0;
  return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
}

bool IsPng(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::equal(std::begin(kSig), std::end(kSig), bytes.begin());
}

GrayImage DecodePng(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(std::string("PNG decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, rgba.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw FormatError("PNG decode failed: " + message);
  }
  GrayImage image(static_cast<int>(png.width), static_cast<int>(png.height));
  auto out = image.pixels();
  for (size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* px = &rgba[4 * i];
    const double alpha = px[3] / 255.0;
    const double lum = Luminance(px[0], px[1], px[2]);
    out[i] = px[3] == 255 ? lum : alpha * lum + (1.0 - alpha) * kBackground;
  }
  return image;
}

class PgmReader {
 public:
  explicit PgmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int NextInt() {
    SkipSpaceAndComments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError("malformed PGM header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1L << 30)) throw FormatError("PGM header value too large");
    }
    return static_cast<int>(value);
  }

  size_t pos() const { return pos_; }
  void Advance(size_t n) { pos_ += n; }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  size_t pos_ = 2;
};

GrayImage DecodePgm(std::span<const std::uint8_t> bytes) {
  const bool binary = bytes[1] == '5';
  PgmReader reader(bytes);
  const int width = reader.NextInt();
  const int height = reader.NextInt();
  const int maxval = reader.NextInt();
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw FormatError("invalid PGM dimensions or maxval");
  }
  GrayImage image(width, height);
  auto out = image.pixels();
  if (binary) {
    reader.Advance(1);  // single whitespace after maxval
    const size_t bpp = maxval > 255 ? 2 : 1;
    if (reader.pos() + out.size() * bpp > bytes.size()) {
      throw FormatError("truncated PGM raster");
    }
    const std::uint8_t* p = bytes.data() + reader.pos();
    for (size_t i = 0; i < out.size(); ++i) {
      const int v = bpp == 1 ? p[i] : (p[2 * i] << 8) | p[2 * i + 1];
      if (v > maxval) throw FormatError("PGM sample exceeds maxval");
      out[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (auto& px : out) {
      const int v = reader.NextInt();
      if (v > maxval) throw FormatError("PGM sample exceeds maxval");
      px = static_cast<double>(v) / maxval;
    }
  }
  return image;
}

std::uint8_t To8Bit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw InvalidInput("image dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
  }
  pixels_.assign(static_cast<size_t>(width) * height, fill);
}

GrayImage DecodeImage(std::span<const std::uint8_t> bytes) {
  if (IsPng(bytes)) return DecodePng(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    return DecodePgm(bytes);
  }
  throw FormatError("unrecognized image format (expected PNG or PGM)");
}

GrayImage LoadImage(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeImage(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> EncodePgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width()) + " " +
                             std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels().size());
  for (double v : image.pixels()) out.push_back(To8Bit(v));
  return out;
}

std::vector<std::uint8_t> EncodePng(const GrayImage& image) {
  std::vector<std::uint8_t> gray;
  gray.reserve(image.pixels().size());
  for (double v : image.pixels()) gray.push_back(To8Bit(v));
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, gray.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, gray.data(), 0,
                                 nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

void SaveImage(const GrayImage& image, const std::filesystem::path& path) {
  const auto bytes = path.extension() == ".png" ? EncodePng(image) : EncodePgm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

GrayImage ResizeBilinear(const GrayImage& image, int width, int height) {
  if (width == image.width() && height == image.height()) return image;
  GrayImage out(width, height);
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      const double top = (1 - wx) * image.at(x0, y0) + wx * image.at(x1, y0);
      const double bottom = (1 - wx) * image.at(x0, y1) + wx * image.at(x1, y1);
      out.at(x, y) = (1 - wy) * top + wy * bottom;
    }
  }
  return out;
}

GrayImage Preprocess(const GrayImage& image) {
  if (image.empty()) throw InvalidInput("cannot preprocess an empty image");
  const int width = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(image.width()) *
                                      kInputHeight / image.height())));
  GrayImage out = ResizeBilinear(image, width, kInputHeight);
  for (double& v : out.pixels()) v = To8Bit(v) / 255.0;
  return out;
}

GrayImage Preprocess(std::span<const std::uint8_t> raw) {
  return Preprocess(DecodeImage(raw));
}

GrayImage Mirror(const GrayImage& image) {
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y) = image.at(image.width() - 1 - x, y);
    }
  }
  return out;
}

GrayImage Crop(const GrayImage& image, int x, int y, int width, int height) {
  if (width < 1 || height < 1 || x < 0 || y < 0 ||
      x + width > image.width() || y + height > image.height()) {
    throw InvalidInput("crop box (" + std::to_string(x) + ", " +
                       std::to_string(y) + ", " + std::to_string(width) + ", " +
                       std::to_string(height) + ") outside " +
                       std::to_string(image.width()) + "x" +
                       std::to_string(image.height()) + " image");
  }
  GrayImage out(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) out.at(c, r) = image.at(x + c, y + r);
  }
  return out;
}

FeatureSequence ExtractColumns(const GrayImage& image, Direction direction) {
  const int w = image.width();
  const int h = image.height();
  FeatureSequence seq(w, h);
  for (int t = 0; t < w; ++t) {
    const int col = direction == Direction::kLeftToRight ? t : w - 1 - t;
    for (int y = 0; y < h; ++y) seq(t, y) = image.at(col, y);
  }
  return seq;
}

int WindowFrameCount(int image_width, const WindowConfig& cfg) {
  if (cfg.width < 1 || cfg.step < 1) {
    throw ConfigError("window width and step must be >= 1");
  }
  return std::max(1, image_width / cfg.step);
}

FeatureSequence ExtractWindows(const GrayImage& image, const WindowConfig& cfg) {
  const int frames = WindowFrameCount(image.width(), cfg);
  const int w = image.width();
  const int h = image.height();
  const bool ltr = cfg.direction == Direction::kLeftToRight;
  FeatureSequence seq(frames, static_cast<Eigen::Index>(h) * cfg.width);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < cfg.width; ++j) {
      const int pos = t * cfg.step + j;
      const int col = ltr ? pos : w - 1 - pos;
      for (int y = 0; y < h; ++y) {
        seq(t, static_cast<Eigen::Index>(j) * h + y) =
            pos < w ? image.at(col, y) : kBackground;
      }
    }
  }
  return seq;
}

}  // namespace ctcocr::imaging
