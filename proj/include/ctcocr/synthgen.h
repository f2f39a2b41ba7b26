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

#ifndef CTCOCR_SYNTHGEN_H_
#define CTCOCR_SYNTHGEN_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctcocr/imaging.h"
#include "ctcocr/manifest.h"

namespace ctcocr::synth {

struct RenderSpec {
  std::u32string text;
  std::string font_id;
  int font_size = 32;  // glyph height in pixels before the final resize
  bool bold = false;
  bool italic = false;
  double fg_intensity = 0.0;
  double bg_intensity = 1.0;  // must exceed fg_intensity
  int kerning = 0;            // extra pixels between glyphs, may be negative
  double skew_degrees = 0.0;
  double blur_sigma = 0.0;    // 0 or 0.5
  double noise_sigma = 0.0;   // additive Gaussian noise, degraded style only
  std::uint64_t seed = 0;     // drives the noise

  friend bool operator==(const RenderSpec&, const RenderSpec&) = default;
};

// Ink coverage in [0, 1] (1 = ink), one row per raster line.
struct Coverage {
  int width = 0, height = 0;
  std::vector<double> values;
  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Rasterizes text upright at a given size. Real font stacks with shaping
// plug in here; the built-in implementation is a bitmap font.
class GlyphRenderer {
 public:
  virtual ~GlyphRenderer() = default;
  virtual std::string id() const = 0;
  virtual bool HasGlyph(char32_t c) const = 0;
  // Throws kInvalidInput listing every character without a glyph.
  virtual Coverage Rasterize(std::u32string_view text, int font_size, bool bold,
                             int kerning) const = 0;
};

// Fixed 5x7 bitmap font for ASCII letters, digits and space, scaled by
// nearest neighbour so that a glyph is font_size pixels tall. Glyph k starts
// at column margin + k * advance, advance = glyph width + one font pixel +
// kerning.
class BitmapFont : public GlyphRenderer {
 public:
  static constexpr int kColumns = 5;
  static constexpr int kRows = 7;

  std::string id() const override { return "bitmap5x7"; }
  bool HasGlyph(char32_t c) const override;
  Coverage Rasterize(std::u32string_view text, int font_size, bool bold,
                     int kerning) const override;

  static int GlyphWidth(int font_size);
  static int Gap(int font_size);
  static int Margin(int font_size);
};

enum class Style { kClean, kDegraded };
std::string_view StyleName(Style style);
Style ParseStyle(std::string_view name);

// Sampling ranges for the per-image jitter.
struct JitterRanges {
  int font_size_min = 24, font_size_max = 48;
  double skew_max_degrees = 3.0;
  int kerning_min = -1, kerning_max = 2;
  double fg_min = 0.0, fg_max = 0.3;
  double bg_min = 0.7, bg_max = 1.0;
  double bold_probability = 0.5;
  double italic_probability = 0.5;
  double blur_probability = 0.25;
  double blur_sigma = 0.5;
  double noise_sigma = 0.0;

  // The clean defaults, or a low-contrast, noisy and more often blurred
  // variant standing in for scanned pages.
  static JitterRanges ForStyle(Style style);
};

struct Rendering {
  imaging::GrayImage image;  // height 32
  imaging::GrayImage ink;    // coverage resampled to the same grid
};

class Synthesizer {
 public:
  // Registers the built-in bitmap font.
  Synthesizer();
  explicit Synthesizer(std::vector<std::shared_ptr<const GlyphRenderer>> renderers);

  void Register(std::shared_ptr<const GlyphRenderer> renderer);
  const GlyphRenderer& renderer(const std::string& id) const;

  // Throws kConfig without renderers and kInvalidInput on empty text.
  RenderSpec SampleSpec(std::u32string_view text, std::mt19937_64& rng,
                        const JitterRanges& ranges = {}) const;

  // Rasterize, shear by skew (plus a fixed slant for italic), blend
  // foreground over background, blur, add noise, resize to height 32.
  Rendering Render(const RenderSpec& spec) const;
  // The sheared coverage before blending and resizing.
  Coverage Raster(const RenderSpec& spec) const;

 private:
  std::vector<std::shared_ptr<const GlyphRenderer>> renderers_;
};

// Separable Gaussian with radius ceil(3 sigma) and clamped borders.
imaging::GrayImage GaussianBlur(const imaging::GrayImage& image, double sigma);

// `count` distinct words of `min_len`..`max_len` symbols drawn uniformly.
std::vector<std::u32string> RandomLexicon(int count, std::u32string_view symbols,
                                          int min_len, int max_len, std::uint64_t seed);

struct CorpusOptions {
  int train = 0, val = 0, test = 0;
  // When set, entry i renders lexicon[(i / per_word) % |lexicon|]; otherwise
  // a uniformly drawn word.
  std::optional<int> per_word;
  std::uint64_t seed = 0;
  Style style = Style::kClean;
  std::string format = "pgm";  // or "png"
  train::Unit unit = train::Unit::kWord;
};

// Writes images/NNNNNN.<format> and manifest.tsv under out_dir and returns
// the manifest. Entry i depends only on (seed, i).
train::Manifest GenerateCorpus(const Synthesizer& synth,
                               std::span<const std::u32string> lexicon,
                               const CorpusOptions& options,
                               const std::filesystem::path& out_dir);

}  // namespace ctcocr::synth

#endif  // CTCOCR_SYNTHGEN_H_
