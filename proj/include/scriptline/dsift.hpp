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

// Dense SIFT: fixed-size patches sampled on a regular grid, each described
// by a spatial_bins x spatial_bins x orientation_bins gradient histogram.
//
// Geometry: a P x P patch is split into spatial_bins cells of P/spatial_bins
// pixels per axis (cells may be fractional, e.g. 1.25 px for P = 5). Each
// pixel's gradient magnitude is spread bilinearly over the neighbouring
// cell centres and linearly over the two nearest orientation bins, which
// cover the full circle [0, 2*pi). There is no Gaussian window. The result
// is L2-normalized, clamped at 0.2 and renormalized.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"
#include "scriptline/imaging.hpp"

namespace scriptline {

struct DsiftConfig {
  std::size_t patch_size = 5;
  std::size_t stride = 2;
  std::size_t spatial_bins = 4;
  std::size_t orientation_bins = 8;
  double clamp_value = 0.2;

  std::size_t descriptor_dim() const { return spatial_bins * spatial_bins * orientation_bins; }

  void validate() const {
    if (patch_size < 1 || stride < 1 || spatial_bins < 1 || orientation_bins < 1)
      throw DomainError("DsiftConfig: patch, stride and bin counts must be >= 1");
    if (!(clamp_value > 0.0)) throw DomainError("DsiftConfig: clamp value must be positive");
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct GradientField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> magnitude;
  std::vector<double> orientation;  // radians in [0, 2*pi)

  double mag(std::size_t y, std::size_t x) const { return magnitude[y * width + x]; }
  double angle(std::size_t y, std::size_t x) const { return orientation[y * width + x]; }
};

/// Central differences in the interior, one-sided differences on the border.
inline GradientField compute_gradients(const GrayImage& img) {
  if (img.height() < 3 || img.width() < 3)
    throw DomainError("compute_gradients: image must be at least 3x3, got " + std::to_string(img.height()) +
                      "x" + std::to_string(img.width()));
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  GradientField g;
  g.height = h;
  g.width = w;
  g.magnitude.resize(h * w);
  g.orientation.resize(h * w);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double dx, dy;
      if (x == 0)
        dx = img.at(y, 1) - img.at(y, 0);
      else if (x == w - 1)
        dx = img.at(y, w - 1) - img.at(y, w - 2);
      else
        dx = 0.5 * (img.at(y, x + 1) - img.at(y, x - 1));
      if (y == 0)
        dy = img.at(1, x) - img.at(0, x);
      else if (y == h - 1)
        dy = img.at(h - 1, x) - img.at(h - 2, x);
      else
        dy = 0.5 * (img.at(y + 1, x) - img.at(y - 1, x));
      const std::size_t i = y * w + x;
      g.magnitude[i] = std::hypot(dx, dy);
      double theta = std::atan2(dy, dx);
      if (theta < 0.0) theta += kTwoPi;
      if (theta >= kTwoPi) theta = 0.0;
      g.orientation[i] = theta;
    }
  }
  return g;
}

namespace detail {

// L2 normalize, clamp, renormalize. A zero vector stays zero.
inline void sift_normalize(std::vector<double>& v, double clamp_value) {
  auto normalize = [&v] {
    double ss = 0.0;
    for (double e : v) ss += e * e;
    if (ss <= 0.0) return false;
    const double inv = 1.0 / std::sqrt(ss);
    for (double& e : v) e *= inv;
    return true;
  };
  if (!normalize()) return;
  for (double& e : v) e = std::min(e, clamp_value);
  normalize();
}

}  // namespace detail

/// Describes the patch whose centre is `center`; the patch's top-left pixel
/// is center - (P-1)/2 on both axes. Throws if the patch leaves the image.
inline std::vector<double> describe_patch(const GradientField& grad, Point center, const DsiftConfig& config) {
  config.validate();
  const std::size_t p = config.patch_size;
  const double half = (static_cast<double>(p) - 1.0) / 2.0;
  const double ox = std::round(center.x - half);
  const double oy = std::round(center.y - half);
  if (ox < 0.0 || oy < 0.0 || ox + static_cast<double>(p) > static_cast<double>(grad.width) ||
      oy + static_cast<double>(p) > static_cast<double>(grad.height))
    throw DomainError("describe_patch: patch centred at (" + std::to_string(center.x) + "," +
                      std::to_string(center.y) + ") is out of bounds");
  const auto x0 = static_cast<std::size_t>(ox);
  const auto y0 = static_cast<std::size_t>(oy);

  const std::size_t nb = config.spatial_bins;
  const std::size_t no = config.orientation_bins;
  const double cell = static_cast<double>(p) / static_cast<double>(nb);
  const double orient_scale = static_cast<double>(no) / (2.0 * std::numbers::pi);

  // Per-offset spatial tap: two neighbouring cells and their weights.
  struct Tap {
    long lo;
    double w_lo, w_hi;
  };
  std::vector<Tap> taps(p);
  for (std::size_t u = 0; u < p; ++u) {
    const double t = (static_cast<double>(u) + 0.5) / cell - 0.5;
    const double lo = std::floor(t);
    const double frac = t - lo;
    taps[u] = {static_cast<long>(lo), 1.0 - frac, frac};
  }
  const long nbl = static_cast<long>(nb);

  std::vector<double> desc(config.descriptor_dim(), 0.0);
  for (std::size_t v = 0; v < p; ++v) {
    const Tap& ty = taps[v];
    for (std::size_t u = 0; u < p; ++u) {
      const Tap& tx = taps[u];
      const double m = grad.mag(y0 + v, x0 + u);
      if (m == 0.0) continue;
      const double o = grad.angle(y0 + v, x0 + u) * orient_scale;
      const double ofloor = std::floor(o);
      const double ofrac = o - ofloor;
      const std::size_t ob0 = static_cast<std::size_t>(ofloor) % no;
      const std::size_t ob1 = (ob0 + 1) % no;
      for (int dy = 0; dy < 2; ++dy) {
        const long cy = ty.lo + dy;
        if (cy < 0 || cy >= nbl) continue;
        const double wy = dy == 0 ? ty.w_lo : ty.w_hi;
        for (int dx = 0; dx < 2; ++dx) {
          const long cx = tx.lo + dx;
          if (cx < 0 || cx >= nbl) continue;
          const double wxy = wy * (dx == 0 ? tx.w_lo : tx.w_hi) * m;
          const std::size_t base = (static_cast<std::size_t>(cy) * nb + static_cast<std::size_t>(cx)) * no;
          desc[base + ob0] += wxy * (1.0 - ofrac);
          desc[base + ob1] += wxy * ofrac;
        }
      }
    }
  }
  detail::sift_normalize(desc, config.clamp_value);
  return desc;
}

/// Dense descriptors of one image, ordered by centre x, then y.
struct DescriptorGrid {
  std::size_t dim = 0;
  std::size_t image_width = 0;
  std::vector<Point> centers;
  std::vector<float> data;  // centers.size() x dim, row-major

  std::size_t size() const { return centers.size(); }
  bool empty() const { return centers.empty(); }
  std::span<const float> descriptor(std::size_t i) const { return {data.data() + i * dim, dim}; }

  friend bool operator==(const DescriptorGrid&, const DescriptorGrid&) = default;
};

/// Number of patch positions along an axis of length n.
inline std::size_t grid_positions(std::size_t n, std::size_t patch, std::size_t stride) {
  return n < patch ? 0 : (n - patch) / stride + 1;
}

/// Every P x P patch on a stride-D grid that fits inside the image. Images
/// narrower than P yield an empty grid; images shorter than P are an error.
inline DescriptorGrid extract_dense(const GrayImage& img, const DsiftConfig& config) {
  config.validate();
  DescriptorGrid grid;
  grid.dim = config.descriptor_dim();
  grid.image_width = img.width();
  if (img.height() < config.patch_size)
    throw DomainError("extract_dense: image height " + std::to_string(img.height()) + " < patch size " +
                      std::to_string(config.patch_size));
  const std::size_t nx = grid_positions(img.width(), config.patch_size, config.stride);
  const std::size_t ny = grid_positions(img.height(), config.patch_size, config.stride);
  if (nx == 0 || ny == 0) return grid;
  if (img.width() < 3) return grid;  // gradients undefined; only reachable when P < 3

  const GradientField grad = compute_gradients(img);
  const double half = (static_cast<double>(config.patch_size) - 1.0) / 2.0;
  grid.centers.reserve(nx * ny);
  grid.data.reserve(nx * ny * grid.dim);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const Point c{static_cast<double>(ix * config.stride) + half, static_cast<double>(iy * config.stride) + half};
      const std::vector<double> d = describe_patch(grad, c, config);
      grid.centers.push_back(c);
      for (double v : d) grid.data.push_back(static_cast<float>(v));
    }
  }
  return grid;
}

// DSG1: "DSG1", u32 count, u32 dim, u32 image_width, then per descriptor
// f32 x, f32 y, f32[dim]; little-endian.
inline std::vector<char> encode_descriptor_grid(const DescriptorGrid& grid) {
  io::Writer w;
  w.magic("DSG1");
  w.u32(grid.size());
  w.u32(grid.dim);
  w.u32(grid.image_width);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    w.put(static_cast<float>(grid.centers[i].x));
    w.put(static_cast<float>(grid.centers[i].y));
    for (float v : grid.descriptor(i)) w.put(v);
  }
  return w.bytes();
}

inline DescriptorGrid decode_descriptor_grid(std::vector<char> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.expect_magic("DSG1");
  DescriptorGrid grid;
  const std::size_t count = r.u32();
  grid.dim = r.u32();
  grid.image_width = r.u32();
  r.need_elements(count, (grid.dim + 2) * sizeof(float));
  grid.centers.reserve(count);
  grid.data.reserve(count * grid.dim);
  for (std::size_t i = 0; i < count; ++i) {
    const float x = r.f32();
    const float y = r.f32();
    grid.centers.push_back({x, y});
    for (std::size_t k = 0; k < grid.dim; ++k) grid.data.push_back(r.f32());
  }
  r.expect_end();
  return grid;
}

inline void save_descriptor_grid(const std::filesystem::path& path, const DescriptorGrid& grid) {
  io::write_file_atomic(path, encode_descriptor_grid(grid));
}

inline DescriptorGrid load_descriptor_grid(const std::filesystem::path& path) {
  return decode_descriptor_grid(io::read_file(path), path.string());
}

}  // namespace scriptline
