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

// Single-hidden-layer sparse autoencoder used as the visual dictionary.
//
//   z     = sigmoid(W1 x + b1)              W1: K x L
//   x_hat = sigmoid(W2 z + b2)              W2: L x K
//   J     = 1/(2N) sum_i |x_hat_i - x_i|^2
//         + lambda (|W1|_F^2 + |W2|_F^2)
//         + beta sum_j KL(p || p_hat_j),    p_hat = mean_i z_i
//
// Each hidden unit is one visual word; encode() is the quantizer.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"
#include "scriptline/log.hpp"

namespace scriptline {

struct SaeParams {
  Eigen::MatrixXd w1;  // K x L
  Eigen::VectorXd b1;  // K
  Eigen::MatrixXd w2;  // L x K
  Eigen::VectorXd b2;  // L

  std::size_t input_size() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(w1.rows()); }

  static SaeParams zeros(std::size_t input, std::size_t hidden) {
    const auto l = static_cast<Eigen::Index>(input);
    const auto k = static_cast<Eigen::Index>(hidden);
    return {Eigen::MatrixXd::Zero(k, l), Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(l, k),
            Eigen::VectorXd::Zero(l)};
  }

  void validate() const {
    if (w1.rows() != b1.size() || w2.cols() != w1.rows() || w2.rows() != w1.cols() || b2.size() != w2.rows())
      throw ShapeError("SaeParams: inconsistent dimensions");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
      throw DomainError("SaeParams: non-finite parameter");
  }

  friend bool operator==(const SaeParams& a, const SaeParams& b) {
    auto same = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.w1, b.w1) && same(a.b1, b.b1) && same(a.w2, b.w2) && same(a.b2, b.b2);
  }
};

struct SaeTrainConfig {
  std::size_t hidden_size = 500;
  double l2_weight = 0.1;
  double sparsity_weight = 1.0;
  double sparsity_target = 0.95;
  std::size_t epochs = 30;
  double learning_rate = 0.5;
  double momentum = 0.9;
  std::size_t batch_size = 100;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (hidden_size < 1) throw DomainError("SaeTrainConfig: hidden_size must be >= 1");
    if (!(sparsity_target > 0.0 && sparsity_target < 1.0))
      throw DomainError("SaeTrainConfig: sparsity_target must lie in (0,1)");
    if (!(l2_weight >= 0.0)) throw DomainError("SaeTrainConfig: l2_weight must be >= 0");
    if (!(sparsity_weight >= 0.0)) throw DomainError("SaeTrainConfig: sparsity_weight must be >= 0");
    if (!(learning_rate > 0.0)) throw DomainError("SaeTrainConfig: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("SaeTrainConfig: momentum must lie in [0,1)");
    if (batch_size < 1) throw DomainError("SaeTrainConfig: batch_size must be >= 1");
  }
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  return (1.0 + (-a).exp()).inverse();
}

inline constexpr double kActivationClip = 1e-10;

}  // namespace detail

/// Hidden activations for a batch of column vectors (L x N -> K x N).
inline Eigen::MatrixXd encode_batch(const SaeParams& params, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != params.input_size())
    throw ShapeError("encode: input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(params.input_size()));
  return detail::sigmoid(((params.w1 * x).colwise() + params.b1).array()).matrix();
}

/// Reconstructions for a batch of hidden codes (K x N -> L x N).
inline Eigen::MatrixXd decode_batch(const SaeParams& params, const Eigen::MatrixXd& z) {
  if (static_cast<std::size_t>(z.rows()) != params.hidden_size())
    throw ShapeError("decode: code has " + std::to_string(z.rows()) + " rows, expected " +
                     std::to_string(params.hidden_size()));
  return detail::sigmoid(((params.w2 * z).colwise() + params.b2).array()).matrix();
}

inline Eigen::VectorXd encode(const SaeParams& params, const Eigen::VectorXd& x) {
  return encode_batch(params, x);
}

inline Eigen::VectorXd decode(const SaeParams& params, const Eigen::VectorXd& z) {
  return decode_batch(params, z);
}

/// sum_j KL(p || p_hat_j) for Bernoulli means; p_hat is clipped to
/// [1e-10, 1 - 1e-10].
inline double kl_divergence(double p, const Eigen::VectorXd& p_hat) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("kl_divergence: target p must lie in (0,1)");
  double total = 0.0;
  for (Eigen::Index j = 0; j < p_hat.size(); ++j) {
    const double q = std::clamp(p_hat[j], detail::kActivationClip, 1.0 - detail::kActivationClip);
    total += p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  }
  return std::max(total, 0.0);
}

struct SaeGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

/// Objective value and its gradient with respect to every parameter.
inline std::pair<double, SaeGradient> loss_and_gradient(const SaeParams& params, const Eigen::MatrixXd& batch,
                                                        const SaeTrainConfig& config, bool with_gradient = true) {
  if (batch.cols() == 0) throw DomainError("sae loss: empty batch");
  const double n = static_cast<double>(batch.cols());
  const double lambda = config.l2_weight;
  const double beta = config.sparsity_weight;
  const double p = config.sparsity_target;

  const Eigen::MatrixXd z = encode_batch(params, batch);
  const Eigen::MatrixXd x_hat = decode_batch(params, z);
  const Eigen::MatrixXd diff = x_hat - batch;
  const Eigen::VectorXd p_hat = z.rowwise().mean();

  double value = 0.5 / n * diff.squaredNorm() + lambda * (params.w1.squaredNorm() + params.w2.squaredNorm());
  if (beta != 0.0) value += beta * kl_divergence(p, p_hat);

  SaeGradient g;
  if (!with_gradient) return {value, std::move(g)};

  // Output layer error, through the decoder sigmoid.
  const Eigen::MatrixXd delta_out = (diff.array() / n * x_hat.array() * (1.0 - x_hat.array())).matrix();
  g.w2 = delta_out * z.transpose() + 2.0 * lambda * params.w2;
  g.b2 = delta_out.rowwise().sum();

  Eigen::MatrixXd dz = params.w2.transpose() * delta_out;
  if (beta != 0.0) {
    // d/dz_ji of beta*KL(p || mean_i z_ji) = beta/N * (-p/p_hat_j + (1-p)/(1-p_hat_j)).
    Eigen::VectorXd sparsity(p_hat.size());
    for (Eigen::Index j = 0; j < p_hat.size(); ++j) {
      const double q = std::clamp(p_hat[j], detail::kActivationClip, 1.0 - detail::kActivationClip);
      sparsity[j] = beta / n * (-p / q + (1.0 - p) / (1.0 - q));
    }
    dz.colwise() += sparsity;
  }
  const Eigen::MatrixXd delta_hidden = (dz.array() * z.array() * (1.0 - z.array())).matrix();
  g.w1 = delta_hidden * batch.transpose() + 2.0 * lambda * params.w1;
  g.b1 = delta_hidden.rowwise().sum();
  return {value, std::move(g)};
}

inline double loss(const SaeParams& params, const Eigen::MatrixXd& batch, const SaeTrainConfig& config) {
  return loss_and_gradient(params, batch, config, false).first;
}

inline SaeGradient loss_gradient(const SaeParams& params, const Eigen::MatrixXd& batch,
                                 const SaeTrainConfig& config) {
  return loss_and_gradient(params, batch, config, true).second;
}

/// Uniform(-r, r) weights with r = sqrt(6 / (K + L)); zero biases.
inline SaeParams initialize_sae(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed) {
  SaeParams params = SaeParams::zeros(input_size, hidden_size);
  std::mt19937_64 rng(seed);
  const double r = std::sqrt(6.0 / static_cast<double>(input_size + hidden_size));
  std::uniform_real_distribution<double> dist(-r, r);
  for (Eigen::Index i = 0; i < params.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < params.w1.cols(); ++j) params.w1(i, j) = dist(rng);
  for (Eigen::Index i = 0; i < params.w2.rows(); ++i)
    for (Eigen::Index j = 0; j < params.w2.cols(); ++j) params.w2(i, j) = dist(rng);
  return params;
}

struct SaeTrainResult {
  SaeParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-pool objective after each epoch
};

/// Mini-batch gradient descent with momentum over a pool of descriptors
/// (one column per descriptor). Deterministic for a fixed rng_seed.
inline SaeTrainResult train_sae(const Eigen::MatrixXd& pool, const SaeTrainConfig& config,
                                const std::function<void(std::size_t, double)>& on_epoch = {}) {
  config.validate();
  if (pool.cols() == 0) throw DomainError("train_sae: empty descriptor pool");
  if (static_cast<std::size_t>(pool.cols()) < config.hidden_size)
    log::warn("SAE pool has ", pool.cols(), " descriptors for ", config.hidden_size, " hidden units");

  const auto n = static_cast<std::size_t>(pool.cols());
  SaeTrainResult result;
  result.params = initialize_sae(static_cast<std::size_t>(pool.rows()), config.hidden_size, config.rng_seed);
  SaeParams& params = result.params;
  result.initial_loss = loss(params, pool, config);

  SaeParams velocity = SaeParams::zeros(params.input_size(), params.hidden_size());
  std::mt19937_64 rng(config.rng_seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd batch(pool.rows(), static_cast<Eigen::Index>(std::min(config.batch_size, n)));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      batch.resize(pool.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t c = 0; c < count; ++c) batch.col(static_cast<Eigen::Index>(c)) = pool.col(order[start + c]);
      const SaeGradient g = loss_gradient(params, batch, config);
      const double mu = config.momentum;
      const double lr = config.learning_rate;
      velocity.w1 = mu * velocity.w1 - lr * g.w1;
      velocity.b1 = mu * velocity.b1 - lr * g.b1;
      velocity.w2 = mu * velocity.w2 - lr * g.w2;
      velocity.b2 = mu * velocity.b2 - lr * g.b2;
      params.w1 += velocity.w1;
      params.b1 += velocity.b1;
      params.w2 += velocity.w2;
      params.b2 += velocity.b2;
    }
    const double epoch_loss = loss(params, pool, config);
    if (!std::isfinite(epoch_loss)) throw DomainError("train_sae: objective diverged; lower the learning rate");
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

// SAE1: "SAE1", u32 L, u32 K, f64 W1 (K x L), b1 (K), W2 (L x K), b2 (L);
// matrices row-major, little-endian.
inline std::vector<char> encode_sae(const SaeParams& params) {
  params.validate();
  io::Writer w;
  w.magic("SAE1");
  w.u32(params.input_size());
  w.u32(params.hidden_size());
  auto matrix = [&w](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  };
  auto vector = [&w](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
  };
  matrix(params.w1);
  vector(params.b1);
  matrix(params.w2);
  vector(params.b2);
  return w.bytes();
}

inline SaeParams decode_sae(std::vector<char> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.expect_magic("SAE1");
  const std::size_t l = r.u32();
  const std::size_t k = r.u32();
  if (l == 0 || k == 0) throw FormatError(r.source() + ": zero SAE dimension");
  r.need_elements(2 * l * k + l + k, sizeof(double));
  SaeParams params = SaeParams::zeros(l, k);
  auto matrix = [&r](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  };
  auto vector = [&r](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
  };
  matrix(params.w1);
  vector(params.b1);
  matrix(params.w2);
  vector(params.b2);
  r.expect_end();
  params.validate();
  return params;
}

inline void save_sae(const std::filesystem::path& path, const SaeParams& params) {
  io::write_file_atomic(path, encode_sae(params));
}

inline SaeParams load_sae(const std::filesystem::path& path) { return decode_sae(io::read_file(path), path.string()); }

}  // namespace scriptline
