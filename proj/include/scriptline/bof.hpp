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

// Bag-of-features sequences: descriptor quantization against a visual
// dictionary (SAE hidden layer or K-means centroids) and right-to-left
// sliding-window histograms.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/dsift.hpp"
#include "scriptline/error.hpp"
#include "scriptline/frame_sequence.hpp"
#include "scriptline/sae.hpp"

namespace scriptline {

enum class Quantization { kSoft, kHard };

/// K-means visual dictionary; centroids are stored one per column.
struct KMeansCodebook {
  Eigen::MatrixXd centroids;  // dim x K

  std::size_t size() const { return static_cast<std::size_t>(centroids.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids.rows()); }

  /// Nearest centroid by squared Euclidean distance; ties go to the lower index.
  template <typename Vec>
  std::size_t nearest(const Vec& d) const {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < size(); ++k) {
      double dist = 0.0;
      for (std::size_t i = 0; i < dim(); ++i) {
        const double e = static_cast<double>(d[i]) - centroids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        dist += e * e;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    return best;
  }

  friend bool operator==(const KMeansCodebook& a, const KMeansCodebook& b) {
    return a.centroids.rows() == b.centroids.rows() && a.centroids.cols() == b.centroids.cols() &&
           a.centroids == b.centroids;
  }
};

/// Either dictionary behind one interface.
class Codebook {
 public:
  explicit Codebook(SaeParams sae) : impl_(std::move(sae)) { std::get<SaeParams>(impl_).validate(); }
  explicit Codebook(KMeansCodebook kmeans) : impl_(std::move(kmeans)) {}

  bool is_sae() const { return std::holds_alternative<SaeParams>(impl_); }
  const SaeParams& sae() const { return std::get<SaeParams>(impl_); }
  const KMeansCodebook& kmeans() const { return std::get<KMeansCodebook>(impl_); }

  std::size_t size() const { return is_sae() ? sae().hidden_size() : kmeans().size(); }
  std::size_t input_dim() const { return is_sae() ? sae().input_size() : kmeans().dim(); }

  /// Assignment weights for a batch of descriptors (dim x N -> K x N). SAE
  /// soft weights are the hidden activations; hard mode and K-means give
  /// one-hot columns.
  Eigen::MatrixXd assign(const Eigen::MatrixXd& descriptors, Quantization mode) const {
    check_dim(static_cast<std::size_t>(descriptors.rows()));
    const auto n = descriptors.cols();
    const auto k = static_cast<Eigen::Index>(size());
    if (is_sae()) {
      Eigen::MatrixXd z = encode_batch(sae(), descriptors);
      if (mode == Quantization::kSoft) return z;
      Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(k, n);
      for (Eigen::Index c = 0; c < n; ++c) one_hot(static_cast<Eigen::Index>(argmax(z.col(c))), c) = 1.0;
      return one_hot;
    }
    Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(k, n);
    for (Eigen::Index c = 0; c < n; ++c)
      one_hot(static_cast<Eigen::Index>(kmeans().nearest(descriptors.col(c))), c) = 1.0;
    return one_hot;
  }

  std::size_t hard_index(std::span<const double> d) const {
    check_dim(d.size());
    if (is_sae()) {
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
      return argmax(encode(sae(), x));
    }
    return kmeans().nearest(d);
  }

  template <typename Vec>
  static std::size_t argmax(const Vec& v) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
    return best;
  }

 private:
  void check_dim(std::size_t dim) const {
    if (dim != input_dim())
      throw ShapeError("codebook expects " + std::to_string(input_dim()) + "-d descriptors, got " +
                       std::to_string(dim));
  }

  std::variant<SaeParams, KMeansCodebook> impl_;
};

/// Soft quantization: the SAE hidden activation vector.
inline Eigen::VectorXd quantize_soft(const SaeParams& sae, std::span<const double> d) {
  if (d.size() != sae.input_size())
    throw ShapeError("quantize_soft: descriptor has " + std::to_string(d.size()) + " entries, expected " +
                     std::to_string(sae.input_size()));
  return encode(sae, Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
}

/// Hard quantization: argmax activation (SAE) or nearest centroid (K-means).
inline std::size_t quantize_hard(const Codebook& codebook, std::span<const double> d) {
  return codebook.hard_index(d);
}

struct KMeansResult {
  KMeansCodebook codebook;
  std::size_t iterations = 0;
  double inertia = 0.0;
};

/// Sum of squared distances from each sample (column) to its nearest centroid.
inline double kmeans_inertia(const KMeansCodebook& codebook, const Eigen::MatrixXd& samples) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const auto k = static_cast<Eigen::Index>(codebook.nearest(samples.col(i)));
    total += (samples.col(i) - codebook.centroids.col(k)).squaredNorm();
  }
  return total;
}

/// Lloyd's algorithm with k-means++ seeding. Stops after `max_iterations`
/// or when no centroid moves by more than `tolerance`. Empty clusters keep
/// their previous centroid.
inline KMeansResult kmeans_fit(const Eigen::MatrixXd& samples, std::size_t k, std::uint64_t seed,
                               std::size_t max_iterations = 100, double tolerance = 1e-6) {
  const auto n = static_cast<std::size_t>(samples.cols());
  if (k == 0) throw DomainError("kmeans_fit: K must be >= 1");
  if (n < k)
    throw DomainError("kmeans_fit: " + std::to_string(n) + " samples is fewer than K = " + std::to_string(k));
  const Eigen::Index dim = samples.rows();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  KMeansResult result;
  Eigen::MatrixXd& c = result.codebook.centroids;
  c.resize(dim, static_cast<Eigen::Index>(k));

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t j = 0; j < k; ++j) {
    c.col(static_cast<Eigen::Index>(j)) = samples.col(static_cast<Eigen::Index>(pick));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (samples.col(static_cast<Eigen::Index>(i)) - c.col(static_cast<Eigen::Index>(j))).squaredNorm());
      total += d2[i];
    }
    if (j + 1 == k) break;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      continue;
    }
    const double target = unit(rng) * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  std::vector<std::size_t> label(n);
  Eigen::MatrixXd sums(dim, static_cast<Eigen::Index>(k));
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) label[i] = result.codebook.nearest(samples.col(static_cast<Eigen::Index>(i)));
    sums.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.col(static_cast<Eigen::Index>(label[i])) += samples.col(static_cast<Eigen::Index>(i));
      ++counts[label[i]];
    }
    double max_move = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      const auto col = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd updated = sums.col(col) / static_cast<double>(counts[j]);
      max_move = std::max(max_move, (updated - c.col(col)).norm());
      c.col(col) = updated;
    }
    result.iterations = iter + 1;
    if (max_move < tolerance) break;
  }
  result.inertia = kmeans_inertia(result.codebook, samples);
  return result;
}

// KMC1: "KMC1", u32 K, u32 dim, f64 centroids (K x dim, one row per
// centroid); little-endian.
inline std::vector<char> encode_kmeans(const KMeansCodebook& codebook) {
  io::Writer w;
  w.magic("KMC1");
  w.u32(codebook.size());
  w.u32(codebook.dim());
  for (Eigen::Index k = 0; k < codebook.centroids.cols(); ++k)
    for (Eigen::Index i = 0; i < codebook.centroids.rows(); ++i) w.f64(codebook.centroids(i, k));
  return w.bytes();
}

inline KMeansCodebook decode_kmeans(std::vector<char> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.expect_magic("KMC1");
  const std::size_t k = r.u32();
  const std::size_t dim = r.u32();
  if (k == 0 || dim == 0) throw FormatError(r.source() + ": zero codebook dimension");
  r.need_elements(k * dim, sizeof(double));
  KMeansCodebook codebook;
  codebook.centroids.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < codebook.centroids.cols(); ++j)
    for (Eigen::Index i = 0; i < codebook.centroids.rows(); ++i) codebook.centroids(i, j) = r.f64();
  r.expect_end();
  return codebook;
}

inline void save_kmeans(const std::filesystem::path& path, const KMeansCodebook& codebook) {
  io::write_file_atomic(path, encode_kmeans(codebook));
}

inline KMeansCodebook load_kmeans(const std::filesystem::path& path) {
  return decode_kmeans(io::read_file(path), path.string());
}

/// Left edges of the sliding windows, left to right. Images narrower than
/// the window get a single window at x = 0 spanning the whole width.
inline std::vector<std::size_t> window_starts(std::size_t image_width, std::size_t window, std::size_t shift) {
  if (window < 1 || shift < 1) throw DomainError("window width and shift must be >= 1");
  std::vector<std::size_t> starts;
  if (image_width < window) {
    starts.push_back(0);
    return starts;
  }
  const std::size_t n = (image_width - window) / shift + 1;
  for (std::size_t t = 0; t < n; ++t) starts.push_back(t * shift);
  return starts;
}

/// Descriptor columns (dim x N) of a grid, in double precision.
inline Eigen::MatrixXd grid_matrix(const DescriptorGrid& grid) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(grid.dim), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto d = grid.descriptor(i);
    for (std::size_t k = 0; k < grid.dim; ++k) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = d[k];
  }
  return m;
}

/// Sums the assignment vectors of the descriptors whose centre x lies in
/// [x, x + window) for every window position. Frame 0 is the rightmost
/// window. Windows without descriptors yield zero histograms.
inline FrameSequence frame_sequence(const DescriptorGrid& grid, const Codebook& codebook, std::size_t window,
                                    std::size_t shift, Quantization mode) {
  const std::vector<std::size_t> starts = window_starts(grid.image_width, window, shift);
  const std::size_t k = codebook.size();
  FrameSequence seq(starts.size(), k);
  seq.frame_width = window;
  seq.shift = shift;
  seq.right_to_left = true;
  seq.source_image_width = grid.image_width;
  if (grid.empty()) return seq;
  if (grid.dim != codebook.input_dim())
    throw ShapeError("frame_sequence: descriptor dim " + std::to_string(grid.dim) + " != codebook input " +
                     std::to_string(codebook.input_dim()));

  const Eigen::MatrixXd weights = codebook.assign(grid_matrix(grid), mode);
  const std::size_t n_frames = starts.size();
  const double span_width = grid.image_width < window ? static_cast<double>(grid.image_width) : static_cast<double>(window);
  std::vector<double> acc(k);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double lo = static_cast<double>(starts[n_frames - 1 - f]);
    const double hi = lo + span_width;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid.centers[i].x;
      if (x < lo || x >= hi) continue;
      const auto col = weights.col(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < k; ++j) acc[j] += col[static_cast<Eigen::Index>(j)];
    }
    auto out = seq.frame(f);
    for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<float>(acc[j]);
  }
  return seq;
}

}  // namespace scriptline
