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

// Grayscale text-line images: PGM/PPM loading, PGM writing and
// aspect-preserving height normalization.
//
// Intensities are stored as doubles in [0, 1] exactly as written in the
// file (ink is not inverted).

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"

namespace scriptline {

class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), pixels_(height * width, fill) {
    check_shape();
  }

  GrayImage(std::size_t height, std::size_t width, std::vector<double> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    check_shape();
    if (pixels_.size() != height_ * width_)
      throw ShapeError("GrayImage: pixel count " + std::to_string(pixels_.size()) + " != " +
                       std::to_string(height_) + "x" + std::to_string(width_));
    for (double& v : pixels_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("GrayImage: intensity outside [0,1]");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  double at(std::size_t y, std::size_t x) const { return pixels_[y * width_ + x]; }
  double& at(std::size_t y, std::size_t x) { return pixels_[y * width_ + x]; }

  std::span<const double> pixels() const { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  void check_shape() const {
    if (height_ == 0 || width_ == 0) throw ShapeError("GrayImage: dimensions must be >= 1");
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

namespace detail {

class PnmHeaderParser {
 public:
  PnmHeaderParser(const std::vector<char>& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  unsigned long number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError(source_ + ": malformed PNM header");
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<unsigned long>(bytes_[pos_] - '0');
      if (value > (1ul << 30)) throw FormatError(source_ + ": PNM header value too large");
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from binary raster data.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError(source_ + ": malformed PNM header");
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<char>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 2;
};

}  // namespace detail

/// Loads a PGM (P2/P5) or PPM (P3/P6) image. Color pixels are converted by
/// averaging the three channels. 16-bit rasters (maxval > 255) are accepted.
inline GrayImage load_image(const std::filesystem::path& path) {
  const std::string source = path.string();
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + source);
  const std::vector<char> bytes = io::read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw FormatError(source + ": unsupported image format (expected PGM/PPM)");
  const char kind = bytes[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw FormatError(source + ": unsupported PNM variant P" + std::string(1, kind));

  detail::PnmHeaderParser header(bytes, source);
  const unsigned long width = header.number();
  const unsigned long height = header.number();
  const unsigned long maxval = header.number();
  if (width == 0 || height == 0) throw FormatError(source + ": zero image dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError(source + ": invalid maxval");

  const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  std::vector<double> raw(samples);

  if (kind == '5' || kind == '6') {
    header.single_whitespace();
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    if (bytes.size() - header.pos() < samples * bytes_per_sample)
      throw FormatError(source + ": truncated raster");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + header.pos());
    for (std::size_t i = 0; i < samples; ++i) {
      const unsigned v = bytes_per_sample == 2 ? (unsigned{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
      if (v > maxval) throw FormatError(source + ": sample exceeds maxval");
      raw[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) {
      const unsigned long v = header.number();
      if (v > maxval) throw FormatError(source + ": sample exceeds maxval");
      raw[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }

  if (channels == 1) return GrayImage(height, width, std::move(raw));
  std::vector<double> gray(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < gray.size(); ++i)
    gray[i] = (raw[3 * i] + raw[3 * i + 1] + raw[3 * i + 2]) / 3.0;
  return GrayImage(height, width, std::move(gray));
}

/// Binary PGM (P5, maxval 255) encoding of an image.
inline std::vector<char> encode_pgm(const GrayImage& img) {
  std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels().size());
  for (double v : img.pixels()) {
    const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  return out;
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
  io::write_file_atomic(path, encode_pgm(img));
}

/// Bilinear resampling with pixel-center alignment. Each output pixel is a
/// convex combination of input pixels, so the output range never leaves the
/// input range.
inline GrayImage resize_bilinear(const GrayImage& img, std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) throw ShapeError("resize_bilinear: target dimensions must be >= 1");
  if (out_height == img.height() && out_width == img.width()) return img;

  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_width);

  struct Tap {
    std::size_t i0, i1;
    double w1;
  };
  auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, n_in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(out_height, img.height(), sy);
  const auto tx = taps(out_width, img.width(), sx);

  std::vector<double> out(out_height * out_width);
  for (std::size_t y = 0; y < out_height; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < out_width; ++x) {
      const Tap& b = tx[x];
      const double top = img.at(a.i0, b.i0) * (1.0 - b.w1) + img.at(a.i0, b.i1) * b.w1;
      const double bottom = img.at(a.i1, b.i0) * (1.0 - b.w1) + img.at(a.i1, b.i1) * b.w1;
      out[y * out_width + x] = std::clamp(top * (1.0 - a.w1) + bottom * a.w1, 0.0, 1.0);
    }
  }
  return GrayImage(out_height, out_width, std::move(out));
}

/// Rescales to `target_height` rows keeping the aspect ratio; the width is
/// round(width * target_height / height), at least 1.
inline GrayImage normalize_height(const GrayImage& img, std::size_t target_height) {
  if (target_height == 0) throw DomainError("normalize_height: target height must be >= 1");
  if (img.empty()) throw ShapeError("normalize_height: empty image");
  const double scaled = static_cast<double>(img.width()) * static_cast<double>(target_height) /
                        static_cast<double>(img.height());
  const auto width = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
  return resize_bilinear(img, target_height, width);
}

}  // namespace scriptline
