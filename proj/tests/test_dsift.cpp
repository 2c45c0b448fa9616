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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "scriptline/dsift.hpp"
#include "test_util.hpp"

namespace scriptline {
namespace {

GrayImage random_image(std::size_t h, std::size_t w, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(h * w);
  for (double& v : px) v = u(rng);
  return GrayImage(h, w, std::move(px));
}

// Straightforward accumulation: every pixel contributes to every cell and
// orientation bin with a triangular weight on the distance between centres.
std::vector<double> oracle_descriptor(const GradientField& g, std::size_t x0, std::size_t y0,
                                      const DsiftConfig& c) {
  const std::size_t p = c.patch_size, nb = c.spatial_bins, no = c.orientation_bins;
  const double cell = static_cast<double>(p) / static_cast<double>(nb);
  std::vector<double> d(c.descriptor_dim(), 0.0);
  for (std::size_t v = 0; v < p; ++v) {
    for (std::size_t u = 0; u < p; ++u) {
      const double m = g.mag(y0 + v, x0 + u);
      const double o = g.angle(y0 + v, x0 + u) * static_cast<double>(no) / (2.0 * std::numbers::pi);
      for (std::size_t cy = 0; cy < nb; ++cy) {
        const double wy = std::max(0.0, 1.0 - std::abs((v + 0.5) / cell - 0.5 - static_cast<double>(cy)));
        for (std::size_t cx = 0; cx < nb; ++cx) {
          const double wx = std::max(0.0, 1.0 - std::abs((u + 0.5) / cell - 0.5 - static_cast<double>(cx)));
          for (std::size_t b = 0; b < no; ++b) {
            double dist = std::abs(o - static_cast<double>(b));
            dist = std::min(dist, static_cast<double>(no) - dist);
            const double wo = std::max(0.0, 1.0 - dist);
            d[(cy * nb + cx) * no + b] += m * wx * wy * wo;
          }
        }
      }
    }
  }
  double ss = 0.0;
  for (double e : d) ss += e * e;
  if (ss == 0.0) return d;
  for (double& e : d) e = std::min(e / std::sqrt(ss), c.clamp_value);
  ss = 0.0;
  for (double e : d) ss += e * e;
  for (double& e : d) e /= std::sqrt(ss);
  return d;
}

double norm2(const std::vector<double>& v) {
  double ss = 0.0;
  for (double e : v) ss += e * e;
  return std::sqrt(ss);
}

TEST(Gradients, ConstantImageHasZeroMagnitude) {
  const GradientField g = compute_gradients(GrayImage(6, 7, 0.4));
  for (double m : g.magnitude) EXPECT_EQ(m, 0.0);
}

TEST(Gradients, HorizontalRampPointsAlongX) {
  const std::size_t w = 12;
  GrayImage img(5, w);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < w; ++x) img.at(y, x) = static_cast<double>(x) / w;
  const GradientField g = compute_gradients(img);
  for (std::size_t i = 0; i < g.magnitude.size(); ++i) {
    EXPECT_NEAR(g.magnitude[i], 1.0 / w, 1e-15);
    EXPECT_EQ(g.orientation[i], 0.0);
  }
}

TEST(Gradients, CheckerboardMatchesHandDifferences) {
  GrayImage img(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) img.at(y, x) = (x + y) % 2 ? 1.0 : 0.0;
  const GradientField g = compute_gradients(img);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      const double dx = x == 0   ? img.at(y, 1) - img.at(y, 0)
                        : x == 3 ? img.at(y, 3) - img.at(y, 2)
                                 : 0.5 * (img.at(y, x + 1) - img.at(y, x - 1));
      const double dy = y == 0   ? img.at(1, x) - img.at(0, x)
                        : y == 3 ? img.at(3, x) - img.at(2, x)
                                 : 0.5 * (img.at(y + 1, x) - img.at(y - 1, x));
      EXPECT_DOUBLE_EQ(g.mag(y, x), std::hypot(dx, dy));
      if (g.mag(y, x) > 0.0) {
        double theta = std::atan2(dy, dx);
        if (theta < 0) theta += 2.0 * std::numbers::pi;
        EXPECT_DOUBLE_EQ(g.angle(y, x), theta);
      }
    }
  }
  // Interior central differences of a checkerboard cancel out.
  EXPECT_EQ(g.mag(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(g.mag(0, 0), std::sqrt(2.0));
}

TEST(Gradients, OrientationRangeAndSmallImageError) {
  const GradientField g = compute_gradients(random_image(9, 9, 4));
  for (double a : g.orientation) {
    EXPECT_GE(a, 0.0);
    EXPECT_LT(a, 2.0 * std::numbers::pi);
  }
  EXPECT_THROW(compute_gradients(GrayImage(2, 5)), DomainError);
  EXPECT_THROW(compute_gradients(GrayImage(5, 2)), DomainError);
}

TEST(DescribePatch, MatchesBruteForceOracle) {
  const GrayImage img = random_image(20, 30, 7);
  const GradientField g = compute_gradients(img);
  for (std::size_t p : {4u, 5u, 8u}) {
    DsiftConfig c;
    c.patch_size = p;
    const double half = (static_cast<double>(p) - 1.0) / 2.0;
    for (std::size_t x0 = 0; x0 + p <= 30; x0 += 3) {
      for (std::size_t y0 = 0; y0 + p <= 20; y0 += 5) {
        const auto got = describe_patch(g, {x0 + half, y0 + half}, c);
        const auto want = oracle_descriptor(g, x0, y0, c);
        ASSERT_EQ(got.size(), 128u);
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12) << "p=" << p << " k=" << k;
      }
    }
  }
}

TEST(DescribePatch, ConstantPatchIsZero) {
  const GradientField g = compute_gradients(GrayImage(10, 10, 0.7));
  const auto d = describe_patch(g, {4, 4}, DsiftConfig{});
  for (double e : d) EXPECT_EQ(e, 0.0);
}

TEST(DescribePatch, RampMassOnlyInOrientationZero) {
  GrayImage img(10, 10);
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) img.at(y, x) = x / 10.0;
  const DsiftConfig c;
  const auto d = describe_patch(compute_gradients(img), {4, 4}, c);
  double bin0 = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (k % 8 == 0)
      bin0 += d[k];
    else
      EXPECT_EQ(d[k], 0.0);
  }
  EXPECT_GT(bin0, 0.0);
  // 4x4 symmetric cell weights: corner, edge and centre cells follow the
  // oracle's boundary weighting.
  const auto want = oracle_descriptor(compute_gradients(img), 2, 2, c);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(d[k], want[k], 1e-12);
  EXPECT_NEAR(d[0], d[3 * 8], 1e-12);
  EXPECT_NEAR(d[0], d[15 * 8], 1e-12);
}

TEST(DescribePatch, UnitNormAndClamp) {
  const GrayImage img = random_image(15, 15, 11);
  const GradientField g = compute_gradients(img);
  for (double cx = 2; cx <= 12; cx += 1) {
    const auto d = describe_patch(g, {cx, 7}, DsiftConfig{});
    EXPECT_NEAR(norm2(d), 1.0, 1e-6);
    for (double e : d) EXPECT_GE(e, 0.0);
  }
  // A single strong edge concentrates mass; clamping caps the pre-renormalized peak.
  GrayImage step(10, 10, 0.0);
  step.at(4, 5) = 1.0;
  const auto d = describe_patch(compute_gradients(step), {4, 4}, DsiftConfig{});
  EXPECT_NEAR(norm2(d), 1.0, 1e-6);
}

TEST(DescribePatch, OutOfBoundsThrows) {
  const GradientField g = compute_gradients(GrayImage(10, 10));
  EXPECT_THROW(describe_patch(g, {1, 4}, DsiftConfig{}), DomainError);
  EXPECT_THROW(describe_patch(g, {4, 8}, DsiftConfig{}), DomainError);
  DsiftConfig bad;
  bad.stride = 0;
  EXPECT_THROW(describe_patch(g, {4, 4}, bad), DomainError);
}

TEST(ExtractDense, CountFormula) {
  const DsiftConfig c;
  const DescriptorGrid sq = extract_dense(random_image(55, 55, 1), c);
  EXPECT_EQ(sq.size(), 676u);
  EXPECT_EQ(sq.dim, 128u);
  for (std::size_t w : {5u, 6u, 7u, 30u, 101u}) {
    for (std::size_t h : {5u, 9u, 55u}) {
      const DescriptorGrid g = extract_dense(random_image(h, w, static_cast<unsigned>(w * h)), c);
      EXPECT_EQ(g.size(), ((w - 5) / 2 + 1) * ((h - 5) / 2 + 1)) << w << "x" << h;
      EXPECT_EQ(g.data.size(), g.size() * 128);
    }
  }
}

TEST(ExtractDense, OrderingAndCentres) {
  const DescriptorGrid g = extract_dense(random_image(9, 11, 2), DsiftConfig{});
  // nx = 4, ny = 3; x-major then y.
  ASSERT_EQ(g.size(), 12u);
  EXPECT_EQ(g.centers[0], (Point{2, 2}));
  EXPECT_EQ(g.centers[1], (Point{2, 4}));
  EXPECT_EQ(g.centers[3], (Point{4, 2}));
  EXPECT_EQ(g.centers[11], (Point{8, 6}));
  EXPECT_EQ(g.image_width, 11u);
}

TEST(ExtractDense, NarrowAndShortImages) {
  const DescriptorGrid g = extract_dense(GrayImage(55, 4), DsiftConfig{});
  EXPECT_TRUE(g.empty());
  EXPECT_EQ(g.image_width, 4u);
  EXPECT_THROW(extract_dense(GrayImage(4, 55), DsiftConfig{}), DomainError);
}

TEST(ExtractDense, TranslationEquivariance) {
  const DsiftConfig c;
  const std::size_t h = 13, w = 31, shift = c.stride;
  const GrayImage a = random_image(h, w, 5);
  GrayImage b(h, w + shift, 0.5);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) b.at(y, x + shift) = a.at(y, x);
  const DescriptorGrid ga = extract_dense(a, c);
  const DescriptorGrid gb = extract_dense(b, c);
  const std::size_t ny = (h - 5) / 2 + 1;
  const std::size_t nxa = (w - 5) / 2 + 1;
  ASSERT_EQ(gb.size(), (nxa + 1) * ny);
  // Column 0 of `a` touches its one-sided left border, so start at 1.
  for (std::size_t ix = 1; ix < nxa; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const auto da = ga.descriptor(ix * ny + iy);
      const auto db = gb.descriptor((ix + 1) * ny + iy);
      for (std::size_t k = 0; k < 128; ++k) EXPECT_NEAR(da[k], db[k], 1e-9);
    }
  }
}

TEST(ExtractDense, Dsg1RoundTrip) {
  testing::TempDir dir("dsift");
  const DescriptorGrid g = extract_dense(random_image(12, 17, 9), DsiftConfig{});
  save_descriptor_grid(dir / "g.dsg", g);
  EXPECT_EQ(load_descriptor_grid(dir / "g.dsg"), g);
  const auto bytes = testing::read_bytes(dir / "g.dsg");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DSG1");
  EXPECT_EQ(bytes.size(), 16 + g.size() * (2 + 128) * 4);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_descriptor_grid(truncated, "t"), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_descriptor_grid(extra, "t"), FormatError);
}

}  // namespace
}  // namespace scriptline
