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

#include "ctcocr/synthgen.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <unordered_map>

#include "ctcocr/errors.h"
#include "ctcocr/utf8.h"

namespace ctcocr::synth {
namespace {

using imaging::GrayImage;

// Rows top to bottom; bit 4 is the leftmost column.
using Glyph = std::array<std::uint8_t, BitmapFont::kRows>;

const std::unordered_map<char32_t, Glyph>& GlyphTable() {
  static const auto* table = new std::unordered_map<char32_t, Glyph>{
      {U' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {U'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {U'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {U'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {U'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {U'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {U'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {U'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {U'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {U'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {U'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
      {U'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {U'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {U'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {U'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {U'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {U'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {U'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {U'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {U'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {U'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {U'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {U'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {U'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {U'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {U'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {U'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {U'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {U'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {U'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {U'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {U'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {U'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {U'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
      {U'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {U'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
      {U'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E}},
      {U'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
      {U'd', {0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F}},
      {U'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {U'f', {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08}},
      {U'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {U'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {U'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}},
      {U'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C}},
      {U'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
      {U'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {U'm', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11}},
      {U'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {U'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
      {U'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {U'q', {0x00, 0x00, 0x0D, 0x13, 0x0F, 0x01, 0x01}},
      {U'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {U's', {0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E}},
      {U't', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
      {U'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}},
      {U'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {U'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A}},
      {U'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
      {U'y', {0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {U'z', {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F}},
  };
  return *table;
}

constexpr double kItalicSlantDegrees = 12.0;

std::string DescribeMissing(const std::set<char32_t>& missing) {
  std::string out;
  for (char32_t c : missing) {
    char code[16];
    std::snprintf(code, sizeof(code), "U+%04X", static_cast<unsigned>(c));
    if (!out.empty()) out += ", ";
    out += "'" + EncodeUtf8(c) + "' (" + code + ")";
  }
  return out;
}

// x' = x + s * (H - 1 - y): the bottom row stays, the top row moves by
// s * (H - 1). Linear interpolation along each row.
Coverage Shear(const Coverage& in, double degrees) {
  const double s = std::tan(degrees * std::numbers::pi / 180.0);
  if (s == 0.0) return in;
  const int extra = static_cast<int>(std::ceil(std::abs(s) * (in.height - 1)));
  const double base = s < 0 ? extra : 0.0;
  Coverage out{in.width + extra, in.height,
               std::vector<double>(static_cast<size_t>(in.width + extra) * in.height, 0.0)};
  for (int y = 0; y < in.height; ++y) {
    const double shift = base + s * (in.height - 1 - y);
    for (int x = 0; x < out.width; ++x) {
      const double src = x - shift;
      const int x0 = static_cast<int>(std::floor(src));
      const double frac = src - x0;
      double v = 0.0;
      if (x0 >= 0 && x0 < in.width) v += (1.0 - frac) * in.at(x0, y);
      if (x0 + 1 >= 0 && x0 + 1 < in.width) v += frac * in.at(x0 + 1, y);
      out.values[static_cast<size_t>(y) * out.width + x] = v;
    }
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------ BitmapFont

bool BitmapFont::HasGlyph(char32_t c) const { return GlyphTable().contains(c); }

int BitmapFont::GlyphWidth(int font_size) {
  return std::max(1, static_cast<int>(std::lround(kColumns * font_size / double{kRows})));
}
int BitmapFont::Gap(int font_size) {
  return std::max(1, static_cast<int>(std::lround(font_size / double{kRows})));
}
int BitmapFont::Margin(int font_size) {
  return std::max(2, static_cast<int>(std::lround(font_size / 4.0)));
}

Coverage BitmapFont::Rasterize(std::u32string_view text, int font_size, bool bold,
                               int kerning) const {
  if (font_size < kRows) {
    throw InvalidInput("font size must be at least " + std::to_string(kRows) + " pixels");
  }
  std::set<char32_t> missing;
  for (char32_t c : text) {
    if (!HasGlyph(c)) missing.insert(c);
  }
  if (!missing.empty()) {
    throw InvalidInput("missing glyph for " + DescribeMissing(missing) + " in font " + id());
  }
  const int gw = GlyphWidth(font_size);
  const int margin = Margin(font_size);
  const int advance = std::max(1, gw + Gap(font_size) + kerning);
  const int thicken = bold ? std::max(1, font_size / 16) : 0;
  const int n = static_cast<int>(text.size());
  const int width = 2 * margin + (n > 0 ? (n - 1) * advance + gw + thicken : 0);
  const int height = font_size + 2 * margin;
  Coverage cov{width, height, std::vector<double>(static_cast<size_t>(width) * height, 0.0)};
  for (int k = 0; k < n; ++k) {
    const Glyph& g = GlyphTable().at(text[k]);
    const int x0 = margin + k * advance;
    for (int y = 0; y < font_size; ++y) {
      const int row = y * kRows / font_size;
      for (int x = 0; x < gw; ++x) {
        const int col = x * kColumns / gw;
        if (!((g[row] >> (kColumns - 1 - col)) & 1)) continue;
        for (int t = 0; t <= thicken; ++t) {
          cov.values[static_cast<size_t>(margin + y) * width + x0 + x + t] = 1.0;
        }
      }
    }
  }
  return cov;
}

// ----------------------------------------------------------------- Style

std::string_view StyleName(Style style) {
  return style == Style::kClean ? "clean" : "degraded";
}

Style ParseStyle(std::string_view name) {
  if (name == "clean") return Style::kClean;
  if (name == "degraded") return Style::kDegraded;
  throw ConfigError("style must be 'clean' or 'degraded', got '" + std::string(name) + "'");
}

JitterRanges JitterRanges::ForStyle(Style style) {
  JitterRanges r;
  if (style == Style::kDegraded) {
    r.font_size_min = 20;
    r.font_size_max = 40;
    r.fg_min = 0.25;
    r.fg_max = 0.45;
    r.bg_min = 0.55;
    r.bg_max = 0.8;
    r.blur_probability = 0.75;
    r.noise_sigma = 0.08;
  }
  return r;
}

// ----------------------------------------------------------- Synthesizer

Synthesizer::Synthesizer() { Register(std::make_shared<BitmapFont>()); }

Synthesizer::Synthesizer(std::vector<std::shared_ptr<const GlyphRenderer>> renderers) {
  for (auto& r : renderers) Register(std::move(r));
}

void Synthesizer::Register(std::shared_ptr<const GlyphRenderer> renderer) {
  if (!renderer) throw ConfigError("null glyph renderer");
  renderers_.push_back(std::move(renderer));
}

const GlyphRenderer& Synthesizer::renderer(const std::string& id) const {
  for (const auto& r : renderers_) {
    if (r->id() == id) return *r;
  }
  throw ConfigError("no glyph renderer '" + id + "'");
}

RenderSpec Synthesizer::SampleSpec(std::u32string_view text, std::mt19937_64& rng,
                                   const JitterRanges& ranges) const {
  if (renderers_.empty()) throw ConfigError("no glyph renderers registered");
  if (text.empty()) throw InvalidInput("cannot render empty text");
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  RenderSpec spec;
  spec.text = text;
  spec.font_id = renderers_[std::uniform_int_distribution<size_t>(
                                0, renderers_.size() - 1)(rng)]->id();
  spec.font_size =
      std::uniform_int_distribution<int>(ranges.font_size_min, ranges.font_size_max)(rng);
  spec.bold = chance(ranges.bold_probability);
  spec.italic = chance(ranges.italic_probability);
  spec.fg_intensity = uniform(ranges.fg_min, ranges.fg_max);
  spec.bg_intensity = uniform(ranges.bg_min, ranges.bg_max);
  spec.kerning = std::uniform_int_distribution<int>(ranges.kerning_min, ranges.kerning_max)(rng);
  spec.skew_degrees = uniform(-ranges.skew_max_degrees, ranges.skew_max_degrees);
  spec.blur_sigma = chance(ranges.blur_probability) ? ranges.blur_sigma : 0.0;
  spec.noise_sigma = ranges.noise_sigma;
  spec.seed = rng();
  return spec;
}

Coverage Synthesizer::Raster(const RenderSpec& spec) const {
  const Coverage upright =
      renderer(spec.font_id).Rasterize(spec.text, spec.font_size, spec.bold, spec.kerning);
  return Shear(upright, spec.skew_degrees + (spec.italic ? kItalicSlantDegrees : 0.0));
}

Rendering Synthesizer::Render(const RenderSpec& spec) const {
  if (!(spec.bg_intensity > spec.fg_intensity)) {
    throw InvalidInput("background must be lighter than foreground");
  }
  const Coverage cov = Raster(spec);
  GrayImage image(cov.width, cov.height);
  GrayImage ink(cov.width, cov.height);
  for (int y = 0; y < cov.height; ++y) {
    for (int x = 0; x < cov.width; ++x) {
      const double c = cov.at(x, y);
      image.at(x, y) = spec.bg_intensity + (spec.fg_intensity - spec.bg_intensity) * c;
      ink.at(x, y) = c;
    }
  }
  if (spec.blur_sigma > 0.0) image = GaussianBlur(image, spec.blur_sigma);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : image.pixels()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  Rendering out;
  out.image = imaging::Preprocess(image);
  out.ink = imaging::ResizeBilinear(ink, out.image.width(), out.image.height());
  return out;
}

GrayImage GaussianBlur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;
  const int w = image.width(), h = image.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * image.at(std::clamp(x + i, 0, w - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

std::vector<std::u32string> RandomLexicon(int count, std::u32string_view symbols,
                                          int min_len, int max_len, std::uint64_t seed) {
  if (symbols.empty() || min_len < 1 || max_len < min_len || count < 0) {
    throw InvalidInput("bad lexicon parameters");
  }
  double capacity = 0.0;
  for (int len = min_len; len <= max_len; ++len) {
    capacity += std::pow(static_cast<double>(symbols.size()), len);
  }
  if (count > capacity) throw InvalidInput("lexicon larger than the number of distinct words");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(min_len, max_len);
  std::uniform_int_distribution<size_t> symbol(0, symbols.size() - 1);
  std::set<std::u32string> seen;
  std::vector<std::u32string> words;
  while (static_cast<int>(words.size()) < count) {
    std::u32string w(length(rng), U' ');
    for (char32_t& c : w) c = symbols[symbol(rng)];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

train::Manifest GenerateCorpus(const Synthesizer& synth,
                               std::span<const std::u32string> lexicon,
                               const CorpusOptions& options,
                               const std::filesystem::path& out_dir) {
  if (lexicon.empty()) throw InvalidInput("empty lexicon");
  if (options.train < 0 || options.val < 0 || options.test < 0) {
    throw InvalidInput("negative split size");
  }
  if (options.per_word && *options.per_word < 1) throw InvalidInput("per_word must be >= 1");
  if (options.format != "pgm" && options.format != "png") {
    throw ConfigError("image format must be pgm or png");
  }
  const auto image_dir = out_dir / "images";
  std::error_code ec;
  std::filesystem::create_directories(image_dir, ec);
  if (ec) throw IoError("cannot create " + image_dir.string() + ": " + ec.message());

  const JitterRanges ranges = JitterRanges::ForStyle(options.style);
  train::Manifest manifest;
  manifest.unit = options.unit;
  manifest.base_dir = out_dir;
  const int total = options.train + options.val + options.test;
  for (int i = 0; i < total; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const size_t word_index =
        options.per_word
            ? static_cast<size_t>(i / *options.per_word) % lexicon.size()
            : std::uniform_int_distribution<size_t>(0, lexicon.size() - 1)(rng);
    const RenderSpec spec = synth.SampleSpec(lexicon[word_index], rng, ranges);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.%s", i, options.format.c_str());
    imaging::SaveImage(synth.Render(spec).image, image_dir / name);
    train::ManifestEntry e;
    e.image = std::filesystem::path("images") / name;
    e.text = lexicon[word_index];
    e.split = i < options.train                 ? train::Split::kTrain
              : i < options.train + options.val ? train::Split::kVal
                                                : train::Split::kTest;
    manifest.entries.push_back(std::move(e));
  }
  manifest.Save(out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace ctcocr::synth
