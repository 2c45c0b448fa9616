// Copyright 2026 The scriptline Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpora: charsets, manifests and a deterministic synthetic line
// generator.
//
// Charset file: one symbol per line (UTF-8, '\n' terminated). A line
// holding a single U+0020 is the word separator.
// Manifest file: one `<relative-image-path>\t<transcription>` record per
// line; image paths are relative to the manifest's directory.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"
#include "scriptline/imaging.hpp"
#include "scriptline/log.hpp"

namespace scriptline {

inline constexpr std::string_view kSpaceSymbol = " ";

/// Splits a UTF-8 string into code points; throws on malformed input.
inline std::vector<std::string> utf8_split(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) throw DataError("malformed UTF-8 text");
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) throw DataError("malformed UTF-8 text");
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

class Charset {
 public:
  Charset() = default;

  explicit Charset(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw DataError("charset is empty");
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      const std::string& s = symbols_[i];
      if (s.empty() || s.find('\n') != std::string::npos || s.find('\t') != std::string::npos)
        throw DataError("charset symbol " + std::to_string(i + 1) + " is empty or contains a tab/newline");
      utf8_split(s);
      if (!index_.emplace(s, i).second) throw DataError("charset symbol '" + s + "' is duplicated");
      max_len_ = std::max(max_len_, s.size());
    }
  }

  const std::vector<std::string>& symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }
  bool contains(std::string_view s) const { return index_.count(std::string(s)) != 0; }
  bool has_space() const { return contains(kSpaceSymbol); }

  /// Greedy longest-match tokenization into charset symbols. Throws a
  /// DataError naming the first code point that no symbol covers.
  std::vector<std::string> tokenize(std::string_view text) const {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t best = 0;
      for (std::size_t len = std::min(max_len_, text.size() - i); len > 0; --len) {
        if (index_.count(std::string(text.substr(i, len)))) {
          best = len;
          break;
        }
      }
      if (best == 0) {
        const auto cps = utf8_split(text.substr(i));
        throw DataError("character '" + cps.front() + "' is not in the charset");
      }
      out.emplace_back(text.substr(i, best));
      i += best;
    }
    return out;
  }

  friend bool operator==(const Charset& a, const Charset& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, std::size_t> index_;
  std::size_t max_len_ = 0;
};

inline std::string encode_charset(const Charset& charset) {
  std::string out;
  for (const auto& s : charset.symbols()) {
    out += s;
    out += '\n';
  }
  return out;
}

inline Charset parse_charset(std::string_view text, const std::string& source) {
  std::vector<std::string> symbols;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) throw DataError(source + ":" + std::to_string(line_no) + ": empty charset line");
    symbols.emplace_back(line);
    pos = end + 1;
  }
  try {
    return Charset(std::move(symbols));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline Charset load_charset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_charset(std::string_view(bytes.data(), bytes.size()), path.string());
}

inline void save_charset(const std::filesystem::path& path, const Charset& charset) {
  io::write_file_atomic(path, encode_charset(charset));
}

struct ManifestEntry {
  std::string image;  // as written, relative to the manifest directory
  std::string transcription;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::filesystem::path base_dir;
  std::string split;  // train / dev / test, informational
  std::vector<ManifestEntry> entries;

  std::filesystem::path image_path(std::size_t i) const { return base_dir / entries.at(i).image; }
  std::size_t size() const { return entries.size(); }
};

inline std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.image;
    out += '\t';
    out += e.transcription;
    out += '\n';
  }
  return out;
}

/// Parses and validates a manifest. Unknown characters raise a DataError
/// with the line number; missing images raise an IoError when
/// `check_images` is set.
inline CorpusManifest load_manifest(const std::filesystem::path& path, const Charset& charset,
                                    std::string split = {}, bool check_images = true) {
  if (!std::filesystem::exists(path)) throw IoError("manifest not found: " + path.string());
  const auto bytes = io::read_file(path);
  const std::string_view text(bytes.data(), bytes.size());
  CorpusManifest manifest;
  manifest.base_dir = path.parent_path();
  manifest.split = std::move(split);
  std::set<std::string> seen;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) throw DataError(where + ": expected <image>\\t<transcription>");
    ManifestEntry e{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))};
    try {
      charset.tokenize(e.transcription);
    } catch (const DataError& err) {
      throw DataError(where + ": " + err.what());
    }
    if (!seen.insert(e.image).second) throw DataError(where + ": duplicate image path '" + e.image + "'");
    if (check_images && !std::filesystem::exists(manifest.base_dir / e.image))
      throw IoError(where + ": image not found: " + (manifest.base_dir / e.image).string());
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) log::warn("manifest ", path.string(), " is empty");
  return manifest;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  io::write_file_atomic(path, encode_manifest(entries));
}

// ---------------------------------------------------------------------------
// Synthetic glyphs and lines.

/// Binary glyph bitmap; ink pixels are 1.
struct Glyph {
  std::string symbol;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> ink;

  bool at(std::size_t y, std::size_t x) const { return ink[y * width + x] != 0; }
  bool blank() const { return std::none_of(ink.begin(), ink.end(), [](auto v) { return v != 0; }); }
};

struct Alphabet {
  std::size_t height = 0;
  std::vector<Glyph> glyphs;

  const Glyph* find(std::string_view symbol) const {
    for (const auto& g : glyphs)
      if (g.symbol == symbol) return &g;
    return nullptr;
  }
  Charset charset() const {
    std::vector<std::string> symbols;
    for (const auto& g : glyphs) symbols.push_back(g.symbol);
    return Charset(std::move(symbols));
  }
};

namespace detail {

// Rasterizes primitives by testing pixel centres against the shape.
class GlyphCanvas {
 public:
  GlyphCanvas(std::string symbol, std::size_t height, std::size_t width) {
    glyph_.symbol = std::move(symbol);
    glyph_.height = height;
    glyph_.width = width;
    glyph_.ink.assign(height * width, 0);
  }

  void rect(double x0, double y0, double x1, double y1) {
    paint([&](double x, double y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; });
  }

  void line(double x0, double y0, double x1, double y1, double thickness) {
    const double vx = x1 - x0, vy = y1 - y0;
    const double len2 = vx * vx + vy * vy;
    paint([&](double x, double y) {
      double t = len2 > 0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (x0 + t * vx), dy = y - (y0 + t * vy);
      return std::sqrt(dx * dx + dy * dy) <= thickness / 2.0;
    });
  }

  void ring(double cx, double cy, double r, double thickness, double max_y = 1e9) {
    paint([&](double x, double y) {
      return y <= max_y && std::abs(std::hypot(x - cx, y - cy) - r) <= thickness / 2.0;
    });
  }

  void disc(double cx, double cy, double r) {
    paint([&](double x, double y) { return std::hypot(x - cx, y - cy) <= r; });
  }

  Glyph take() { return std::move(glyph_); }

 private:
  template <typename Inside>
  void paint(Inside inside) {
    for (std::size_t y = 0; y < glyph_.height; ++y)
      for (std::size_t x = 0; x < glyph_.width; ++x)
        if (inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) glyph_.ink[y * glyph_.width + x] = 1;
  }

  Glyph glyph_;
};

}  // namespace detail

/// Thirteen 32-px-tall glyphs built from strokes, loops and dots, plus a
/// blank space glyph. Every glyph carries a baseline bar across its full
/// width, so glyphs placed with negative spacing join like cursive
/// script. Glyphs "c", "d" and "j" have detached dots.
inline Alphabet builtin_alphabet() {
  constexpr std::size_t kHeight = 32;
  constexpr double kStroke = 3.0;
  constexpr double kBaseTop = 21.0, kBaseBottom = 24.0;
  Alphabet alphabet;
  alphabet.height = kHeight;

  auto make = [&](std::string symbol, std::size_t width, auto&& draw) {
    detail::GlyphCanvas c(std::move(symbol), kHeight, width);
    c.rect(0.0, kBaseTop, static_cast<double>(width), kBaseBottom);
    draw(c, static_cast<double>(width));
    alphabet.glyphs.push_back(c.take());
  };

  make("a", 22, [&](auto& c, double w) { c.line(w - 6, 3, w - 6, 22, kStroke); });
  make("b", 24, [&](auto& c, double w) { c.ring(w / 2, 14.5, 6.5, kStroke); });
  make("c", 22, [&](auto& c, double w) { c.disc(w / 2, 28.5, 2.5); });
  make("d", 24, [&](auto& c, double w) {
    c.disc(w / 2 - 4.5, 15.0, 2.5);
    c.disc(w / 2 + 4.5, 15.0, 2.5);
  });
  make("e", 24, [&](auto& c, double w) { c.line(3, 22, w - 4, 5, kStroke); });
  make("f", 24, [&](auto& c, double w) { c.ring(w / 2, 27.0, 4.0, kStroke); });
  make("g", 26, [&](auto& c, double w) {
    c.line(5, 7, 5, 22, kStroke);
    c.line(w - 6, 7, w - 6, 22, kStroke);
  });
  make("h", 26, [&](auto& c, double) {
    c.line(2, 22, 7.5, 9, kStroke);
    c.line(7.5, 9, 13, 22, kStroke);
    c.line(13, 22, 18.5, 9, kStroke);
    c.line(18.5, 9, 24, 22, kStroke);
  });
  make("i", 26, [&](auto& c, double w) { c.ring(w / 2, 22.0, 9.0, kStroke, 22.0); });
  make("j", 22, [&](auto& c, double w) {
    c.line(w / 2, 13, w / 2, 22, kStroke);
    c.disc(w / 2, 7.0, 2.5);
  });
  make("k", 22, [&](auto& c, double) {
    c.line(4.5, 22, 4.5, 29.5, kStroke);
    c.line(4.5, 29.5, 14, 29.5, kStroke);
  });
  make("l", 24, [&](auto& c, double w) {
    c.line(4, 5, w - 4, 22, kStroke);
    c.line(w - 4, 5, 4, 22, kStroke);
  });
  make("m", 24, [&](auto& c, double w) {
    c.line(4.5, 8, w - 4.5, 8, kStroke);
    c.line(4.5, 8, 4.5, 22, kStroke);
    c.line(w - 4.5, 8, w - 4.5, 22, kStroke);
  });

  detail::GlyphCanvas space(std::string(kSpaceSymbol), kHeight, 22);
  alphabet.glyphs.push_back(space.take());
  return alphabet;
}

struct SynthOptions {
  std::size_t n_lines = 10;
  std::size_t min_length = 3;  // glyphs per line, spaces excluded
  std::size_t max_length = 8;
  int spacing_min = 1;  // pixels between glyphs; negative values overlap
  int spacing_max = 3;
  std::size_t margin = 4;  // blank columns at each end
  std::size_t jitter = 0;  // max vertical glyph offset, pixels
  double salt_pepper = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double space_probability = 0.0;  // chance of a space between two glyphs
  std::uint64_t seed = 1;

  void validate() const {
    if (min_length < 1 || max_length < min_length) throw ConfigError("synth: need 1 <= min_length <= max_length");
    if (spacing_max < spacing_min) throw ConfigError("synth: spacing_max < spacing_min");
    if (!(salt_pepper >= 0.0 && salt_pepper <= 1.0)) throw ConfigError("synth: salt_pepper must lie in [0,1]");
    if (!(scale_min > 0.0 && scale_max >= scale_min)) throw ConfigError("synth: need 0 < scale_min <= scale_max");
    if (!(space_probability >= 0.0 && space_probability <= 1.0))
      throw ConfigError("synth: space_probability must lie in [0,1]");
  }
};

struct LineLayout {
  std::vector<std::size_t> glyphs;  // indices into the alphabet
  std::vector<int> spacings;        // glyphs.size() - 1 gaps
  std::vector<int> offsets;         // vertical offset per glyph
};

/// Pastes glyphs in right-to-left reading order: glyph 0 ends `margin`
/// columns from the right edge (ink = 0.0 on a 1.0 background). Width is
/// 2 * margin + sum(glyph widths) + sum(spacings).
inline GrayImage render_line(const Alphabet& alphabet, const LineLayout& layout, std::size_t margin,
                             std::size_t jitter) {
  if (layout.glyphs.empty()) throw DomainError("render_line: no glyphs");
  long width = 2 * static_cast<long>(margin);
  for (std::size_t i = 0; i < layout.glyphs.size(); ++i) {
    width += static_cast<long>(alphabet.glyphs.at(layout.glyphs[i]).width);
    if (i + 1 < layout.glyphs.size()) width += layout.spacings.at(i);
  }
  if (width < 1) throw DomainError("render_line: line has non-positive width");
  const std::size_t height = alphabet.height + 2 * jitter;
  GrayImage img(height, static_cast<std::size_t>(width), 1.0);
  long x = width - static_cast<long>(margin);
  for (std::size_t i = 0; i < layout.glyphs.size(); ++i) {
    const Glyph& g = alphabet.glyphs[layout.glyphs[i]];
    x -= static_cast<long>(g.width);
    const long y0 = static_cast<long>(jitter) + (layout.offsets.empty() ? 0 : layout.offsets[i]);
    for (std::size_t gy = 0; gy < g.height; ++gy) {
      for (std::size_t gx = 0; gx < g.width; ++gx) {
        if (!g.at(gy, gx)) continue;
        const long px = x + static_cast<long>(gx), py = y0 + static_cast<long>(gy);
        if (px < 0 || py < 0 || px >= width || py >= static_cast<long>(height)) continue;
        img.at(static_cast<std::size_t>(py), static_cast<std::size_t>(px)) = 0.0;
      }
    }
    if (i + 1 < layout.glyphs.size()) x -= layout.spacings[i];
  }
  return img;
}

/// Writes `options.n_lines` rendered lines as PGM files under
/// `out_dir/name/` plus the manifest `out_dir/name.tsv`, and returns the
/// manifest. Output is a pure function of the alphabet and options.
inline CorpusManifest synth_generate(const Alphabet& alphabet, const SynthOptions& options,
                                     const std::filesystem::path& out_dir, const std::string& name) {
  options.validate();
  std::vector<std::size_t> letters;
  std::size_t space = alphabet.glyphs.size();
  for (std::size_t i = 0; i < alphabet.glyphs.size(); ++i) {
    if (alphabet.glyphs[i].symbol == kSpaceSymbol)
      space = i;
    else
      letters.push_back(i);
  }
  if (letters.empty()) throw DomainError("synth_generate: alphabet has no non-space glyphs");
  for (const auto& g : alphabet.glyphs)
    if (g.height != alphabet.height) throw DomainError("synth_generate: glyph heights differ");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_length(options.min_length, options.max_length);
  std::uniform_int_distribution<std::size_t> pick_letter(0, letters.size() - 1);
  std::uniform_int_distribution<int> pick_spacing(options.spacing_min, options.spacing_max);
  std::uniform_int_distribution<int> pick_offset(-static_cast<int>(options.jitter), static_cast<int>(options.jitter));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  manifest.split = name;
  const int digits = std::max<int>(5, static_cast<int>(std::to_string(options.n_lines).size()));
  for (std::size_t line = 0; line < options.n_lines; ++line) {
    LineLayout layout;
    const std::size_t length = pick_length(rng);
    for (std::size_t k = 0; k < length; ++k) {
      if (k > 0 && space < alphabet.glyphs.size() && unit(rng) < options.space_probability)
        layout.glyphs.push_back(space);
      layout.glyphs.push_back(letters[pick_letter(rng)]);
    }
    for (std::size_t k = 0; k + 1 < layout.glyphs.size(); ++k) layout.spacings.push_back(pick_spacing(rng));
    for (std::size_t k = 0; k < layout.glyphs.size(); ++k) layout.offsets.push_back(pick_offset(rng));

    GrayImage img = render_line(alphabet, layout, options.margin, options.jitter);
    if (options.salt_pepper > 0.0) {
      for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
          if (unit(rng) < options.salt_pepper) img.at(y, x) = unit(rng) < 0.5 ? 0.0 : 1.0;
    }
    const double scale = options.scale_min == options.scale_max
                             ? options.scale_min
                             : options.scale_min + (options.scale_max - options.scale_min) * unit(rng);
    if (scale != 1.0) {
      const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(img.height() * scale)));
      const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(img.width() * scale)));
      img = resize_bilinear(img, h, w);
    }

    std::string text;
    for (std::size_t g : layout.glyphs) text += alphabet.glyphs[g].symbol;
    std::string index = std::to_string(line);
    index.insert(0, static_cast<std::size_t>(digits) - std::min<std::size_t>(digits, index.size()), '0');
    const std::string rel = name + "/line_" + index + ".pgm";
    save_pgm(out_dir / rel, img);
    manifest.entries.push_back({rel, std::move(text)});
  }
  save_manifest(out_dir / (name + ".tsv"), manifest.entries);
  return manifest;
}

}  // namespace scriptline
