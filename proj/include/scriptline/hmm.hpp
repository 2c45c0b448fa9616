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

// Character HMMs with diagonal-covariance Gaussian mixture emissions.
//
// Every character model is a linear chain: a non-emitting entry state,
// n emitting states with only self and next transitions, and a
// non-emitting exit state. Training concatenates the models of an
// utterance's transcription into a composite chain and runs embedded
// Baum-Welch; decoding runs Viterbi over an ergodic network in which any
// model's exit leads to any model's entry, so no lexicon is needed.
//
// All probabilities are handled in the log domain.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"
#include "scriptline/frame_sequence.hpp"
#include "scriptline/log.hpp"
#include "scriptline/parallel.hpp"

namespace scriptline::hmm {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

/// Diagonal-covariance Gaussian mixture. Immutable once built; the
/// constructor checks the invariants and caches log normalizers.
class GaussianMixture {
 public:
  GaussianMixture() = default;

  explicit GaussianMixture(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw DomainError("GaussianMixture: no components");
    dim_ = components_.front().mean.size();
    double total = 0.0;
    for (const auto& c : components_) {
      if (c.mean.size() != dim_ || c.variance.size() != dim_)
        throw ShapeError("GaussianMixture: component dimensions disagree");
      if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw DomainError("GaussianMixture: weights must be > 0");
      for (double v : c.variance)
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("GaussianMixture: variances must be > 0");
      for (double m : c.mean)
        if (!std::isfinite(m)) throw DomainError("GaussianMixture: non-finite mean");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("GaussianMixture: weights do not sum to 1");

    const std::size_t m = components_.size();
    log_const_.resize(m);
    means_.resize(m * dim_);
    inv_var_.resize(m * dim_);
    for (std::size_t k = 0; k < m; ++k) {
      double log_det = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        log_det += std::log(components_[k].variance[d]);
        means_[k * dim_ + d] = components_[k].mean[d];
        inv_var_[k * dim_ + d] = 1.0 / components_[k].variance[d];
      }
      log_const_[k] = std::log(components_[k].weight) -
                      0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + log_det);
    }
  }

  static GaussianMixture single(std::vector<double> mean, std::vector<double> variance) {
    return GaussianMixture({GaussianComponent{1.0, std::move(mean), std::move(variance)}});
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }

  /// log(w_k) + log N(x; mu_k, Sigma_k) for every component k.
  void component_log_densities(std::span<const float> x, std::span<double> out) const {
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const double* mu = means_.data() + k * dim_;
      const double* iv = inv_var_.data() + k * dim_;
      double q = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double e = static_cast<double>(x[d]) - mu[d];
        q += e * e * iv[d];
      }
      out[k] = log_const_[k] - 0.5 * q;
    }
  }

  double log_density(std::span<const float> x) const {
    if (x.size() != dim_)
      throw ShapeError("GaussianMixture: observation has dim " + std::to_string(x.size()) + ", expected " +
                       std::to_string(dim_));
    double buf[64];
    std::vector<double> heap;
    std::span<double> out;
    if (size() <= 64) {
      out = std::span<double>(buf, size());
    } else {
      heap.resize(size());
      out = heap;
    }
    component_log_densities(x, out);
    double total = kLogZero;
    for (double v : out) total = log_add(total, v);
    return total;
  }

  friend bool operator==(const GaussianMixture& a, const GaussianMixture& b) {
    return a.components_ == b.components_;
  }

 private:
  std::vector<GaussianComponent> components_;
  std::size_t dim_ = 0;
  std::vector<double> log_const_;
  std::vector<double> means_;
  std::vector<double> inv_var_;
};

/// Linear left-to-right character model. `transitions` is the full
/// (n+2) x (n+2) row-stochastic matrix: row 0 is the entry state, rows
/// 1..n the emitting states, row n+1 the (absorbing) exit state.
struct CharacterModel {
  std::string label;
  std::size_t n_states = 0;
  std::vector<double> transitions;
  std::vector<GaussianMixture> emissions;

  std::size_t order() const { return n_states + 2; }
  double transition(std::size_t from, std::size_t to) const { return transitions[from * order() + to]; }
  double& transition(std::size_t from, std::size_t to) { return transitions[from * order() + to]; }

  /// Self-loop and forward probabilities of emitting state s (0-based).
  double self_prob(std::size_t s) const { return transition(s + 1, s + 1); }
  double next_prob(std::size_t s) const { return transition(s + 1, s + 2); }

  std::size_t dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }
  std::size_t n_components() const { return emissions.empty() ? 0 : emissions.front().size(); }

  static CharacterModel linear(std::string label, std::size_t n_states, double self_prob,
                               const GaussianMixture& emission) {
    if (n_states < 1) throw DomainError("CharacterModel: needs at least one emitting state");
    CharacterModel m;
    m.label = std::move(label);
    m.n_states = n_states;
    m.transitions.assign(m.order() * m.order(), 0.0);
    m.transition(0, 1) = 1.0;
    for (std::size_t s = 1; s <= n_states; ++s) {
      m.transition(s, s) = self_prob;
      m.transition(s, s + 1) = 1.0 - self_prob;
    }
    m.transition(n_states + 1, n_states + 1) = 1.0;
    m.emissions.assign(n_states, emission);
    return m;
  }

  void validate() const {
    if (n_states < 1 || transitions.size() != order() * order() || emissions.size() != n_states)
      throw ShapeError("CharacterModel '" + label + "': inconsistent sizes");
    for (std::size_t i = 0; i < order(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < order(); ++j) {
        const double a = transition(i, j);
        if (!(a >= 0.0) || a > 1.0) throw DomainError("CharacterModel '" + label + "': invalid transition");
        const bool allowed = (i == 0 && j == 1) || (i >= 1 && i <= n_states && (j == i || j == i + 1)) ||
                             (i == n_states + 1 && j == i);
        if (!allowed && a != 0.0)
          throw DomainError("CharacterModel '" + label + "': transition outside linear topology");
        row += a;
      }
      if (std::abs(row - 1.0) > 1e-9) throw DomainError("CharacterModel '" + label + "': row does not sum to 1");
    }
    if (transition(0, 1) != 1.0) throw DomainError("CharacterModel '" + label + "': entry must lead to state 1");
    for (const auto& e : emissions)
      if (e.dim() != dim() || e.size() != n_components())
        throw ShapeError("CharacterModel '" + label + "': emission shapes differ across states");
  }

  friend bool operator==(const CharacterModel&, const CharacterModel&) = default;
};

using ModelSet = std::vector<CharacterModel>;

inline std::map<std::string, std::size_t> label_index(const ModelSet& models) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < models.size(); ++i) index.emplace(models[i].label, i);
  return index;
}

/// Concatenation of character models following a transcription; the exit
/// of model i feeds the entry of model i+1.
struct CompositeModel {
  struct State {
    std::size_t model;
    std::size_t state;
    double log_self;
    double log_next;  // to the next composite state, or out of the chain for the last
  };
  std::vector<State> states;
  std::size_t dim = 0;

  std::size_t size() const { return states.size(); }
};

inline CompositeModel build_composite(const ModelSet& models, std::span<const std::size_t> sequence) {
  if (sequence.empty()) throw DomainError("build_composite: empty transcription");
  CompositeModel c;
  c.dim = models.at(sequence.front()).dim();
  for (std::size_t idx : sequence) {
    const CharacterModel& m = models.at(idx);
    if (m.dim() != c.dim) throw ShapeError("build_composite: models disagree on dimension");
    for (std::size_t s = 0; s < m.n_states; ++s)
      c.states.push_back({idx, s, safe_log(m.self_prob(s)), safe_log(m.next_prob(s))});
  }
  return c;
}

/// T x S table of log emission densities, S = composite states.
struct EmissionTable {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<double> values;
  double operator()(std::size_t t, std::size_t s) const { return values[t * states + s]; }
};

namespace detail {

inline void check_obs(std::size_t model_dim, const FrameSequence& obs) {
  if (obs.empty()) throw DomainError("empty observation sequence");
  if (obs.dim != model_dim)
    throw ShapeError("observation dim " + std::to_string(obs.dim) + " != model dim " + std::to_string(model_dim));
}

}  // namespace detail

inline EmissionTable composite_emissions(const ModelSet& models, const CompositeModel& c, const FrameSequence& obs) {
  detail::check_obs(c.dim, obs);
  EmissionTable table;
  table.frames = obs.size();
  table.states = c.size();
  table.values.resize(table.frames * table.states);
  // Evaluate each distinct (model, state) once per frame.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> first;
  for (std::size_t s = 0; s < c.size(); ++s) {
    auto key = std::make_pair(c.states[s].model, c.states[s].state);
    auto [it, fresh] = first.emplace(key, s);
    for (std::size_t t = 0; t < table.frames; ++t) {
      table.values[t * table.states + s] =
          fresh ? models[key.first].emissions[key.second].log_density(obs.frame(t))
                : table.values[t * table.states + it->second];
    }
  }
  return table;
}

/// T x S forward or backward lattice.
struct Lattice {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<double> values;
  double total = kLogZero;  // log P(obs | model)
  double operator()(std::size_t t, std::size_t s) const { return values[t * states + s]; }
  double& operator()(std::size_t t, std::size_t s) { return values[t * states + s]; }
};

inline Lattice forward_lattice(const CompositeModel& c, const EmissionTable& b) {
  Lattice a{b.frames, c.size(), std::vector<double>(b.frames * c.size(), kLogZero)};
  const std::size_t n = c.size();
  a(0, 0) = b(0, 0);
  for (std::size_t t = 1; t < b.frames; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = a(t - 1, j) + c.states[j].log_self;
      if (j > 0) v = log_add(v, a(t - 1, j - 1) + c.states[j - 1].log_next);
      a(t, j) = v == kLogZero ? kLogZero : v + b(t, j);
    }
  }
  a.total = a(b.frames - 1, n - 1) + c.states[n - 1].log_next;
  return a;
}

inline Lattice backward_lattice(const CompositeModel& c, const EmissionTable& b) {
  Lattice beta{b.frames, c.size(), std::vector<double>(b.frames * c.size(), kLogZero)};
  const std::size_t n = c.size();
  const std::size_t last = b.frames - 1;
  beta(last, n - 1) = c.states[n - 1].log_next;
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = c.states[j].log_self + b(t + 1, j) + beta(t + 1, j);
      if (j + 1 < n) v = log_add(v, c.states[j].log_next + b(t + 1, j + 1) + beta(t + 1, j + 1));
      beta(t, j) = std::isnan(v) ? kLogZero : v;
    }
  }
  beta.total = b(0, 0) + beta(0, 0);
  return beta;
}

/// log P(obs | composite). -inf when no path fits (e.g. fewer frames than
/// emitting states).
inline double log_forward(const ModelSet& models, const CompositeModel& c, const FrameSequence& obs) {
  return forward_lattice(c, composite_emissions(models, c, obs)).total;
}

inline Lattice log_backward(const ModelSet& models, const CompositeModel& c, const FrameSequence& obs) {
  return backward_lattice(c, composite_emissions(models, c, obs));
}

// ---------------------------------------------------------------------------
// Initialization and re-estimation.

struct FlatStart {
  ModelSet models;
  std::vector<double> variance_floor;
};

/// Every emitting state of every character gets a single Gaussian with the
/// corpus-global mean and (population) variance. The variance floor is
/// `floor_scale` times the global variance per dimension, never below
/// `min_variance`.
inline FlatStart flat_start(std::span<const FrameSequence> corpus, std::span<const std::string> labels,
                            std::size_t n_states, std::size_t dim, double floor_scale = 1e-4,
                            double min_variance = 1e-10, double self_prob = 0.6) {
  if (labels.empty()) throw DomainError("flat_start: empty charset");
  std::vector<double> sum(dim, 0.0);
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    if (seq.empty()) continue;
    if (seq.dim != dim) throw ShapeError("flat_start: frame dim " + std::to_string(seq.dim) + " != " + std::to_string(dim));
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto f = seq.frame(t);
      for (std::size_t d = 0; d < dim; ++d) sum[d] += f[d];
    }
    count += seq.size();
  }
  if (count == 0) throw DomainError("flat_start: empty feature corpus");
  std::vector<double> mean(dim), var(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) mean[d] = sum[d] / static_cast<double>(count);
  for (const auto& seq : corpus) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto f = seq.frame(t);
      for (std::size_t d = 0; d < dim; ++d) {
        const double e = f[d] - mean[d];
        var[d] += e * e;
      }
    }
  }
  FlatStart out;
  out.variance_floor.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    var[d] /= static_cast<double>(count);
    out.variance_floor[d] = std::max(floor_scale * var[d], min_variance);
    var[d] = std::max(var[d], out.variance_floor[d]);
  }
  const GaussianMixture g = GaussianMixture::single(mean, var);
  for (const auto& label : labels) out.models.push_back(CharacterModel::linear(label, n_states, self_prob, g));
  return out;
}

struct TrainingUtterance {
  std::string id;
  FrameSequence frames;
  std::vector<std::string> transcription;  // one charset symbol per entry
};

struct ReestimationOptions {
  std::vector<double> variance_floor;  // empty: no floor beyond positivity
  double min_mixture_weight = 1e-5;
  std::size_t jobs = 1;
};

namespace detail {

struct StateStats {
  double occupancy = 0.0;
  double self = 0.0;
  std::vector<double> mix_occ;
  std::vector<double> sum;     // components x dim
  std::vector<double> sum_sq;  // components x dim
};

struct Accumulator {
  std::vector<std::vector<StateStats>> models;
  double log_likelihood = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;

  explicit Accumulator(const ModelSet& set) {
    models.resize(set.size());
    for (std::size_t m = 0; m < set.size(); ++m) {
      const std::size_t k = set[m].n_components();
      const std::size_t d = set[m].dim();
      models[m].resize(set[m].n_states);
      for (auto& s : models[m]) {
        s.mix_occ.assign(k, 0.0);
        s.sum.assign(k * d, 0.0);
        s.sum_sq.assign(k * d, 0.0);
      }
    }
  }

  void merge(const Accumulator& o) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      for (std::size_t s = 0; s < models[m].size(); ++s) {
        StateStats& a = models[m][s];
        const StateStats& b = o.models[m][s];
        a.occupancy += b.occupancy;
        a.self += b.self;
        for (std::size_t i = 0; i < a.mix_occ.size(); ++i) a.mix_occ[i] += b.mix_occ[i];
        for (std::size_t i = 0; i < a.sum.size(); ++i) {
          a.sum[i] += b.sum[i];
          a.sum_sq[i] += b.sum_sq[i];
        }
      }
    }
    log_likelihood += o.log_likelihood;
    used += o.used;
    skipped += o.skipped;
  }
};

inline void accumulate_utterance(const ModelSet& models, const CompositeModel& c, const FrameSequence& obs,
                                 Accumulator& acc) {
  const EmissionTable b = composite_emissions(models, c, obs);
  const Lattice alpha = forward_lattice(c, b);
  if (alpha.total == kLogZero || !std::isfinite(alpha.total)) {
    ++acc.skipped;
    return;
  }
  const Lattice beta = backward_lattice(c, b);
  const double total = alpha.total;
  const std::size_t n = c.size();
  std::vector<double> comp;
  for (std::size_t t = 0; t < b.frames; ++t) {
    const auto x = obs.frame(t);
    for (std::size_t j = 0; j < n; ++j) {
      const double lg = alpha(t, j) + beta(t, j) - total;
      if (lg == kLogZero || lg < -700.0) continue;
      const double gamma = std::exp(lg);
      const auto& st = c.states[j];
      StateStats& s = acc.models[st.model][st.state];
      s.occupancy += gamma;
      if (t + 1 < b.frames) {
        const double lx = alpha(t, j) + st.log_self + b(t + 1, j) + beta(t + 1, j) - total;
        if (lx > -700.0) s.self += std::exp(lx);
      }
      const GaussianMixture& g = models[st.model].emissions[st.state];
      comp.resize(g.size());
      g.component_log_densities(x, comp);
      const double lb = b(t, j);
      const std::size_t dim = g.dim();
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = gamma * std::exp(comp[k] - lb);
        if (gk == 0.0) continue;
        s.mix_occ[k] += gk;
        double* sum = s.sum.data() + k * dim;
        double* sq = s.sum_sq.data() + k * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          const double v = x[d];
          sum[d] += gk * v;
          sq[d] += gk * v * v;
        }
      }
    }
  }
  acc.log_likelihood += total;
  ++acc.used;
}

inline std::vector<std::size_t> resolve_transcription(const TrainingUtterance& u,
                                                      const std::map<std::string, std::size_t>& index) {
  std::vector<std::size_t> seq;
  seq.reserve(u.transcription.size());
  for (const auto& sym : u.transcription) {
    auto it = index.find(sym);
    if (it == index.end())
      throw DataError("utterance '" + u.id + "': character '" + sym + "' is not in the charset");
    seq.push_back(it->second);
  }
  if (seq.empty()) throw DataError("utterance '" + u.id + "': empty transcription");
  return seq;
}

}  // namespace detail

struct BaumWelchResult {
  ModelSet models;
  double log_likelihood = 0.0;  // of the models before this update
  std::size_t utterances_used = 0;
  std::size_t utterances_skipped = 0;
};

/// One round of embedded re-estimation over the whole corpus. Statistics
/// of a character are pooled over all of its occurrences. Utterances too
/// short for their transcription are skipped. Accumulation is chunked in
/// a fixed order, so the result does not depend on `options.jobs`.
inline BaumWelchResult baum_welch_epoch(const ModelSet& models, std::span<const TrainingUtterance> corpus,
                                        const ReestimationOptions& options = {}) {
  if (models.empty()) throw DomainError("baum_welch_epoch: no models");
  for (const auto& m : models) m.validate();
  const auto index = label_index(models);

  std::vector<std::vector<std::size_t>> sequences(corpus.size());
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    sequences[u] = detail::resolve_transcription(corpus[u], index);
    detail::check_obs(models.front().dim(), corpus[u].frames);
  }

  constexpr std::size_t kChunk = 8;
  const std::size_t n_chunks = (corpus.size() + kChunk - 1) / kChunk;
  std::vector<detail::Accumulator> partial(n_chunks, detail::Accumulator(models));
  parallel_for(n_chunks, options.jobs, [&](std::size_t ci) {
    const std::size_t end = std::min(corpus.size(), (ci + 1) * kChunk);
    for (std::size_t u = ci * kChunk; u < end; ++u) {
      const CompositeModel c = build_composite(models, sequences[u]);
      detail::accumulate_utterance(models, c, corpus[u].frames, partial[ci]);
    }
  });
  detail::Accumulator acc(models);
  for (const auto& p : partial) acc.merge(p);

  BaumWelchResult result;
  result.log_likelihood = acc.log_likelihood;
  result.utterances_used = acc.used;
  result.utterances_skipped = acc.skipped;
  result.models = models;

  for (std::size_t m = 0; m < models.size(); ++m) {
    CharacterModel& model = result.models[m];
    const std::size_t dim = model.dim();
    for (std::size_t s = 0; s < model.n_states; ++s) {
      const detail::StateStats& st = acc.models[m][s];
      if (!(st.occupancy > 0.0)) continue;  // unseen state keeps its parameters
      const double self = std::clamp(st.self / st.occupancy, 0.0, 1.0);
      model.transition(s + 1, s + 1) = self;
      model.transition(s + 1, s + 2) = 1.0 - self;

      const auto& old = model.emissions[s].components();
      std::vector<GaussianComponent> comps(old.size());
      double weight_total = 0.0;
      for (std::size_t k = 0; k < old.size(); ++k) {
        GaussianComponent& c = comps[k];
        const double occ = st.mix_occ[k];
        c.weight = std::max(occ / st.occupancy, options.min_mixture_weight);
        weight_total += c.weight;
        if (occ > 1e-12) {
          c.mean.resize(dim);
          c.variance.resize(dim);
          for (std::size_t d = 0; d < dim; ++d) {
            const double mu = st.sum[k * dim + d] / occ;
            c.mean[d] = mu;
            c.variance[d] = st.sum_sq[k * dim + d] / occ - mu * mu;
          }
        } else {
          c.mean = old[k].mean;
          c.variance = old[k].variance;
        }
        for (std::size_t d = 0; d < dim; ++d) {
          const double floor = options.variance_floor.empty() ? 0.0 : options.variance_floor[d];
          c.variance[d] = std::max(c.variance[d], floor);
          if (!(c.variance[d] > 0.0)) c.variance[d] = std::numeric_limits<double>::min();
        }
      }
      for (auto& c : comps) c.weight /= weight_total;
      model.emissions[s] = GaussianMixture(std::move(comps));
    }
  }
  return result;
}

/// Doubles every mixture: each component becomes two with half the weight
/// and means offset by +/- 0.2 standard deviations per dimension.
inline ModelSet split_mixtures(const ModelSet& models, double offset = 0.2) {
  ModelSet out = models;
  for (auto& model : out) {
    for (auto& g : model.emissions) {
      std::vector<GaussianComponent> comps;
      comps.reserve(2 * g.size());
      for (const auto& c : g.components()) {
        GaussianComponent up = c, down = c;
        up.weight = down.weight = 0.5 * c.weight;
        for (std::size_t d = 0; d < c.mean.size(); ++d) {
          const double delta = offset * std::sqrt(c.variance[d]);
          up.mean[d] += delta;
          down.mean[d] -= delta;
        }
        comps.push_back(std::move(up));
        comps.push_back(std::move(down));
      }
      g = GaussianMixture(std::move(comps));
    }
  }
  return out;
}

/// Log-likelihood of the corpus under fixed models (no update).
inline double corpus_log_likelihood(const ModelSet& models, std::span<const TrainingUtterance> corpus,
                                    std::size_t jobs = 1) {
  const auto index = label_index(models);
  std::vector<double> ll(corpus.size(), 0.0);
  parallel_for(corpus.size(), jobs, [&](std::size_t u) {
    const auto seq = detail::resolve_transcription(corpus[u], index);
    const CompositeModel c = build_composite(models, seq);
    const double v = log_forward(models, c, corpus[u].frames);
    ll[u] = std::isfinite(v) ? v : 0.0;
  });
  double total = 0.0;
  for (double v : ll) total += v;
  return total;
}

struct TrainingSchedule {
  std::size_t epochs_per_stage = 4;
  std::size_t target_mixtures = 4;  // power of two
};

struct EpochReport {
  std::size_t mixtures;
  std::size_t epoch;  // within the stage
  double log_likelihood;
  std::size_t used;
  std::size_t skipped;
};

/// Flat start, then `epochs_per_stage` Baum-Welch rounds per mixture stage
/// (1, 2, 4, ... components) until `target_mixtures` is reached.
/// `on_stage` receives the trained models at the end of every stage.
inline ModelSet train_models(std::span<const TrainingUtterance> corpus, std::span<const std::string> labels,
                             std::size_t n_states, const TrainingSchedule& schedule,
                             ReestimationOptions options, double floor_scale = 1e-4,
                             const std::function<void(const EpochReport&)>& on_epoch = {},
                             const std::function<void(std::size_t, const ModelSet&)>& on_stage = {}) {
  if (corpus.empty()) throw DomainError("train_models: empty training corpus");
  const std::size_t tm = schedule.target_mixtures;
  if (tm < 1 || (tm & (tm - 1)) != 0) throw ConfigError("target_mixtures must be a power of two");
  std::vector<FrameSequence> frames;
  frames.reserve(corpus.size());
  for (const auto& u : corpus) frames.push_back(u.frames);
  FlatStart fs = flat_start(frames, labels, n_states, corpus.front().frames.dim, floor_scale);
  options.variance_floor = fs.variance_floor;
  ModelSet models = std::move(fs.models);
  for (std::size_t mixtures = 1;; mixtures *= 2) {
    if (mixtures > 1) models = split_mixtures(models);
    for (std::size_t e = 0; e < schedule.epochs_per_stage; ++e) {
      BaumWelchResult r = baum_welch_epoch(models, corpus, options);
      if (on_epoch) on_epoch({mixtures, e, r.log_likelihood, r.utterances_used, r.utterances_skipped});
      models = std::move(r.models);
    }
    if (on_stage) on_stage(mixtures, models);
    if (mixtures >= tm) break;
  }
  return models;
}

// ---------------------------------------------------------------------------
// Decoding.

/// Ergodic composition: every model's exit leads to every model's entry
/// with probability 1/|models|. `insertion_log_penalty` is added to the log
/// score on each character-to-character transition.
struct RecognitionNetwork {
  ModelSet models;
  double log_loop = 0.0;
  double insertion_log_penalty = 0.0;

  std::size_t total_states() const {
    std::size_t n = 0;
    for (const auto& m : models) n += m.n_states;
    return n;
  }
};

inline RecognitionNetwork build_ergodic_network(ModelSet models, double insertion_log_penalty = 0.0) {
  if (models.empty()) throw DomainError("build_ergodic_network: no models");
  const std::size_t dim = models.front().dim();
  for (const auto& m : models) {
    m.validate();
    if (m.dim() != dim) throw ShapeError("build_ergodic_network: models disagree on dimension");
  }
  RecognitionNetwork net;
  net.log_loop = -std::log(static_cast<double>(models.size()));
  net.insertion_log_penalty = insertion_log_penalty;
  net.models = std::move(models);
  return net;
}

struct Segment {
  std::size_t model = 0;
  std::size_t begin = 0;  // first frame
  std::size_t end = 0;    // one past the last frame
};

struct DecodeResult {
  bool ok = false;
  std::vector<std::size_t> labels;
  std::string text;
  double log_score = kLogZero;
  std::vector<Segment> segments;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (model, state) per frame
};

/// T x S table of log emissions for every network state; states are
/// numbered model by model.
inline EmissionTable network_emissions(const RecognitionNetwork& net, const FrameSequence& obs) {
  detail::check_obs(net.models.front().dim(), obs);
  EmissionTable table;
  table.frames = obs.size();
  table.states = net.total_states();
  table.values.resize(table.frames * table.states);
  for (std::size_t t = 0; t < table.frames; ++t) {
    std::size_t g = 0;
    for (const auto& m : net.models)
      for (std::size_t s = 0; s < m.n_states; ++s) table.values[t * table.states + g++] = m.emissions[s].log_density(obs.frame(t));
  }
  return table;
}

/// Viterbi over precomputed log emissions. Ties prefer the predecessor
/// with the lower (model index, state index); a self-loop beats re-entering
/// the same single-state model.
inline DecodeResult viterbi_decode(const RecognitionNetwork& net, const EmissionTable& b) {
  const std::size_t n_models = net.models.size();
  std::vector<std::size_t> offset(n_models + 1, 0);
  for (std::size_t m = 0; m < n_models; ++m) offset[m + 1] = offset[m] + net.models[m].n_states;
  const std::size_t n = offset[n_models];
  if (b.states != n) throw ShapeError("viterbi_decode: emission table does not match network");
  DecodeResult result;
  if (b.frames == 0) return result;

  std::vector<double> log_self(n), log_next(n);
  std::vector<std::size_t> model_of(n), state_of(n);
  for (std::size_t m = 0; m < n_models; ++m) {
    for (std::size_t s = 0; s < net.models[m].n_states; ++s) {
      const std::size_t g = offset[m] + s;
      log_self[g] = safe_log(net.models[m].self_prob(s));
      log_next[g] = safe_log(net.models[m].next_prob(s));
      model_of[g] = m;
      state_of[g] = s;
    }
  }

  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  const std::size_t T = b.frames;
  std::vector<double> delta(n, kLogZero), next_delta(n);
  std::vector<std::uint32_t> back(T * n, kNone);
  std::vector<std::uint8_t> entered(T * n, 0);

  for (std::size_t m = 0; m < n_models; ++m) {
    const std::size_t g = offset[m];
    delta[g] = net.log_loop + b(0, g);
    entered[g] = 1;
  }

  for (std::size_t t = 1; t < T; ++t) {
    // Best model exit at t-1, lowest model index on ties.
    double best_exit = kLogZero;
    std::size_t best_exit_state = 0;
    for (std::size_t m = 0; m < n_models; ++m) {
      const std::size_t last = offset[m + 1] - 1;
      const double v = delta[last] + log_next[last];
      if (v > best_exit) {
        best_exit = v;
        best_exit_state = last;
      }
    }
    const double entry_score = best_exit + net.log_loop + net.insertion_log_penalty;

    for (std::size_t m = 0; m < n_models; ++m) {
      for (std::size_t g = offset[m]; g < offset[m + 1]; ++g) {
        const double stay = delta[g] + log_self[g];
        double best = stay;
        std::uint32_t from = static_cast<std::uint32_t>(g);
        std::uint8_t is_entry = 0;
        if (g == offset[m]) {
          if (best_exit != kLogZero &&
              (entry_score > stay || (entry_score == stay && best_exit_state < g))) {
            best = entry_score;
            from = static_cast<std::uint32_t>(best_exit_state);
            is_entry = 1;
          }
        } else {
          const double advance = delta[g - 1] + log_next[g - 1];
          if (advance >= stay && advance != kLogZero) {
            best = advance;
            from = static_cast<std::uint32_t>(g - 1);
          }
        }
        if (best == kLogZero) {
          next_delta[g] = kLogZero;
          continue;
        }
        next_delta[g] = best + b(t, g);
        back[t * n + g] = from;
        entered[t * n + g] = is_entry;
      }
    }
    std::swap(delta, next_delta);
  }

  double best = kLogZero;
  std::size_t end_state = 0;
  for (std::size_t m = 0; m < n_models; ++m) {
    const std::size_t last = offset[m + 1] - 1;
    const double v = delta[last] + log_next[last];
    if (v > best) {
      best = v;
      end_state = last;
    }
  }
  if (best == kLogZero || std::isnan(best)) return result;

  std::vector<std::size_t> states(T);
  std::vector<std::uint8_t> starts(T);
  std::size_t g = end_state;
  for (std::size_t t = T; t-- > 0;) {
    states[t] = g;
    starts[t] = entered[t * n + g];
    if (t > 0) g = back[t * n + g];
  }
  result.ok = true;
  result.log_score = best;
  result.path.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t m = model_of[states[t]];
    result.path.emplace_back(m, state_of[states[t]]);
    if (starts[t]) {
      if (!result.segments.empty()) result.segments.back().end = t;
      result.segments.push_back({m, t, T});
      result.labels.push_back(m);
      result.text += net.models[m].label;
    }
  }
  return result;
}

inline DecodeResult viterbi_decode(const RecognitionNetwork& net, const FrameSequence& obs) {
  return viterbi_decode(net, network_emissions(net, obs));
}

// ---------------------------------------------------------------------------
// HMM1 model set format: "HMM1", u32 n_models, then per model: label
// (u32 byte length + UTF-8), u32 n_states, u32 dim, u32 n_components,
// f64 transitions ((n_states+2)^2, row-major), then per emitting state and
// per component: f64 weight, f64 mean[dim], f64 variance[dim].
// Little-endian throughout.

inline std::vector<char> encode_models(const ModelSet& models) {
  io::Writer w;
  w.magic("HMM1");
  w.u32(models.size());
  for (const auto& m : models) {
    m.validate();
    w.string(m.label);
    w.u32(m.n_states);
    w.u32(m.dim());
    w.u32(m.n_components());
    for (double a : m.transitions) w.f64(a);
    for (const auto& g : m.emissions) {
      for (const auto& c : g.components()) {
        w.f64(c.weight);
        for (double v : c.mean) w.f64(v);
        for (double v : c.variance) w.f64(v);
      }
    }
  }
  return w.bytes();
}

inline ModelSet decode_models(std::vector<char> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.expect_magic("HMM1");
  const std::size_t count = r.u32();
  ModelSet models;
  for (std::size_t i = 0; i < count; ++i) {
    CharacterModel m;
    m.label = r.string();
    m.n_states = r.u32();
    const std::size_t dim = r.u32();
    const std::size_t k = r.u32();
    if (m.n_states == 0 || dim == 0 || k == 0) throw FormatError(r.source() + ": zero model dimension");
    r.need_elements(m.order() * m.order() + m.n_states * k * (1 + 2 * dim), sizeof(double));
    m.transitions.resize(m.order() * m.order());
    for (double& a : m.transitions) a = r.f64();
    for (std::size_t s = 0; s < m.n_states; ++s) {
      std::vector<GaussianComponent> comps(k);
      for (auto& c : comps) {
        c.weight = r.f64();
        c.mean.resize(dim);
        c.variance.resize(dim);
        for (double& v : c.mean) v = r.f64();
        for (double& v : c.variance) v = r.f64();
      }
      try {
        m.emissions.emplace_back(std::move(comps));
      } catch (const Error& e) {
        throw FormatError(r.source() + ": model '" + m.label + "': " + e.what());
      }
    }
    try {
      m.validate();
    } catch (const Error& e) {
      throw FormatError(r.source() + ": " + e.what());
    }
    models.push_back(std::move(m));
  }
  r.expect_end();
  return models;
}

inline void save_models(const std::filesystem::path& path, const ModelSet& models) {
  io::write_file_atomic(path, encode_models(models));
}

inline ModelSet load_models(const std::filesystem::path& path) {
  return decode_models(io::read_file(path), path.string());
}

/// Human-readable dump for inspection and diffing.
inline std::string dump_text(const ModelSet& models) {
  std::ostringstream out;
  out << std::setprecision(9);
  out << "models " << models.size() << "\n";
  for (const auto& m : models) {
    out << "model \"" << m.label << "\" states " << m.n_states << " dim " << m.dim() << " mixtures "
        << m.n_components() << "\n";
    for (std::size_t s = 0; s < m.n_states; ++s) {
      out << "  state " << s + 1 << " self " << m.self_prob(s) << " next " << m.next_prob(s) << "\n";
      for (std::size_t k = 0; k < m.emissions[s].size(); ++k) {
        const auto& c = m.emissions[s].components()[k];
        out << "    mix " << k + 1 << " weight " << c.weight << "\n      mean";
        for (double v : c.mean) out << ' ' << v;
        out << "\n      var";
        for (double v : c.variance) out << ' ' << v;
        out << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace scriptline::hmm
