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
#include <functional>
#include <numbers>
#include <random>

#include "scriptline/hmm.hpp"
#include "test_util.hpp"

namespace scriptline::hmm {
namespace {

FrameSequence frames(const std::vector<std::vector<float>>& rows) {
  FrameSequence s(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t d = 0; d < s.dim; ++d) s.frame(t)[d] = rows[t][d];
  return s;
}

FrameSequence random_frames(std::size_t n, std::size_t dim, std::mt19937& rng, double spread = 1.0) {
  std::normal_distribution<float> g(0.0f, static_cast<float>(spread));
  FrameSequence s(n, dim);
  for (float& v : s.data) v = g(rng);
  return s;
}

GaussianMixture unit(double mu) { return GaussianMixture::single({mu}, {1.0}); }

// Linear model with random per-state self-loops and 1-d Gaussians.
CharacterModel random_model(const std::string& label, std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> self(0.1, 0.9), mu(-2.0, 2.0), var(0.5, 2.0);
  CharacterModel m = CharacterModel::linear(label, n, 0.5, unit(0.0));
  for (std::size_t s = 1; s <= n; ++s) {
    const double a = self(rng);
    m.transition(s, s) = a;
    m.transition(s, s + 1) = 1.0 - a;
    m.emissions[s - 1] = GaussianMixture::single({mu(rng)}, {var(rng)});
  }
  return m;
}

// Sum (or max) over every state path of a composite by explicit enumeration.
double enumerate_composite(const ModelSet& models, const CompositeModel& c, const FrameSequence& obs, bool max) {
  const std::size_t T = obs.size(), n = c.size();
  double acc = kLogZero;
  std::vector<std::size_t> path(T);
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double score) {
    const std::size_t j = path[t];
    const auto& st = c.states[j];
    score += models[st.model].emissions[st.state].log_density(obs.frame(t));
    if (t + 1 == T) {
      if (j == n - 1) {
        const double v = score + st.log_next;
        acc = max ? std::max(acc, v) : log_add(acc, v);
      }
      return;
    }
    path[t + 1] = j;
    rec(t + 1, score + st.log_self);
    if (j + 1 < n) {
      path[t + 1] = j + 1;
      rec(t + 1, score + st.log_next);
    }
  };
  path[0] = 0;
  rec(0, 0.0);
  return acc;
}

struct BruteDecode {
  double score = kLogZero;
  std::vector<std::size_t> labels;
};

// Best labelling and alignment through the ergodic network by enumeration.
BruteDecode enumerate_network(const RecognitionNetwork& net, const FrameSequence& obs) {
  BruteDecode best;
  std::vector<std::size_t> labels;
  std::function<void(std::size_t, std::size_t, std::size_t, double)> rec = [&](std::size_t t, std::size_t m,
                                                                               std::size_t s, double score) {
    const CharacterModel& model = net.models[m];
    score += model.emissions[s].log_density(obs.frame(t));
    if (t + 1 == obs.size()) {
      if (s + 1 == model.n_states) {
        const double v = score + safe_log(model.next_prob(s));
        if (v > best.score) best = {v, labels};
      }
      return;
    }
    rec(t + 1, m, s, score + safe_log(model.self_prob(s)));
    if (s + 1 < model.n_states) rec(t + 1, m, s + 1, score + safe_log(model.next_prob(s)));
    if (s + 1 == model.n_states) {
      for (std::size_t m2 = 0; m2 < net.models.size(); ++m2) {
        labels.push_back(m2);
        rec(t + 1, m2, 0, score + safe_log(model.next_prob(s)) + net.log_loop + net.insertion_log_penalty);
        labels.pop_back();
      }
    }
  };
  for (std::size_t m = 0; m < net.models.size(); ++m) {
    labels = {m};
    rec(0, m, 0, net.log_loop);
  }
  return best;
}

// Score of a decoded path under `net`, recomputed frame by frame.
double rescore(const RecognitionNetwork& net, const FrameSequence& obs, const DecodeResult& r) {
  std::vector<bool> starts(obs.size(), false);
  for (const auto& seg : r.segments) starts[seg.begin] = true;
  double score = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const auto [m, s] = r.path[t];
    const CharacterModel& model = net.models[m];
    if (t == 0) {
      score += net.log_loop;
    } else {
      const auto [pm, ps] = r.path[t - 1];
      const CharacterModel& prev = net.models[pm];
      if (starts[t])
        score += safe_log(prev.next_prob(ps)) + net.log_loop + net.insertion_log_penalty;
      else if (ps == s)
        score += safe_log(prev.self_prob(ps));
      else
        score += safe_log(prev.next_prob(ps));
    }
    score += model.emissions[s].log_density(obs.frame(t));
  }
  const auto [m, s] = r.path.back();
  return score + safe_log(net.models[m].next_prob(s));
}

std::vector<TrainingUtterance> random_corpus(std::size_t n, std::mt19937& rng) {
  // Two characters with distinct frame statistics; lengths vary.
  std::uniform_int_distribution<int> len(3, 6), pick(0, 1);
  std::normal_distribution<float> noise(0.0f, 0.4f);
  std::vector<TrainingUtterance> corpus;
  for (std::size_t u = 0; u < n; ++u) {
    TrainingUtterance utt;
    utt.id = "u" + std::to_string(u);
    std::vector<std::vector<float>> rows;
    for (int c = 0; c < 3; ++c) {
      const int ch = pick(rng);
      utt.transcription.push_back(ch == 0 ? "a" : "b");
      const int l = len(rng);
      for (int k = 0; k < l; ++k) {
        const float base = ch == 0 ? (k < l / 2 ? -1.0f : 1.0f) : (k < l / 2 ? 2.0f : 0.0f);
        rows.push_back({base + noise(rng), -base + noise(rng)});
      }
    }
    utt.frames = frames(rows);
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

void expect_invariants(const ModelSet& models, const std::vector<double>& floor) {
  for (const auto& m : models) {
    EXPECT_NO_THROW(m.validate());
    for (std::size_t i = 0; i < m.order(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m.order(); ++j) row += m.transition(i, j);
      if (i > 0) {
        EXPECT_NEAR(row, 1.0, 1e-9);
      }
    }
    EXPECT_EQ(m.transition(0, m.n_states + 1), 0.0);
    for (const auto& g : m.emissions) {
      double w = 0.0;
      for (const auto& c : g.components()) {
        w += c.weight;
        for (std::size_t d = 0; d < c.variance.size(); ++d) EXPECT_GE(c.variance[d], floor[d]);
      }
      EXPECT_NEAR(w, 1.0, 1e-9);
    }
  }
}

TEST(GaussianMixture, InvariantsAndDensity) {
  EXPECT_THROW(GaussianMixture(std::vector<GaussianComponent>{}), DomainError);
  EXPECT_THROW(GaussianMixture::single({0.0}, {0.0}), DomainError);
  EXPECT_THROW(GaussianMixture({{0.5, {0.0}, {1.0}}}), DomainError);
  EXPECT_THROW(GaussianMixture({{0.5, {0.0}, {1.0}}, {0.5, {0.0, 1.0}, {1.0, 1.0}}}), ShapeError);
  const GaussianMixture g = unit(0.0);
  const std::vector<float> x = {0.0f};
  EXPECT_NEAR(g.log_density(x), -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_THROW(g.log_density(std::vector<float>{0.0f, 1.0f}), ShapeError);
  const GaussianMixture two({{0.25, {0.0}, {1.0}}, {0.75, {3.0}, {4.0}}});
  const std::vector<float> y = {1.0f};
  const double want = std::log(0.25 * std::exp(-0.5) / std::sqrt(2 * std::numbers::pi) +
                               0.75 * std::exp(-0.5 * 4.0 / 4.0) / std::sqrt(2 * std::numbers::pi * 4.0));
  EXPECT_NEAR(two.log_density(y), want, 1e-12);
}

TEST(CharacterModel, LinearTopology) {
  const CharacterModel m = CharacterModel::linear("a", 3, 0.6, unit(0));
  EXPECT_EQ(m.order(), 5u);
  EXPECT_EQ(m.transition(0, 1), 1.0);
  EXPECT_EQ(m.self_prob(0), 0.6);
  EXPECT_DOUBLE_EQ(m.next_prob(2), 0.4);
  EXPECT_EQ(m.transition(0, 4), 0.0);
  EXPECT_NO_THROW(m.validate());
  CharacterModel skip = m;
  skip.transition(1, 3) = 0.1;
  skip.transition(1, 2) = 0.3;
  EXPECT_THROW(skip.validate(), DomainError);
  EXPECT_THROW(CharacterModel::linear("a", 0, 0.6, unit(0)), DomainError);
}

TEST(FlatStart, HandArithmetic) {
  const std::vector<FrameSequence> corpus = {frames({{0.0f}}), frames({{2.0f}})};
  const std::vector<std::string> labels = {"a", "b"};
  const FlatStart fs = flat_start(corpus, labels, 3, 1);
  ASSERT_EQ(fs.models.size(), 2u);
  for (const auto& m : fs.models) {
    EXPECT_EQ(m.n_states, 3u);
    EXPECT_DOUBLE_EQ(m.self_prob(1), 0.6);
    EXPECT_DOUBLE_EQ(m.next_prob(1), 0.4);
    for (const auto& g : m.emissions) {
      EXPECT_DOUBLE_EQ(g.components()[0].mean[0], 1.0);
      EXPECT_DOUBLE_EQ(g.components()[0].variance[0], 1.0);
    }
  }
  EXPECT_DOUBLE_EQ(fs.variance_floor[0], 1e-4);
}

TEST(FlatStart, IdenticalFramesGetFloor) {
  const std::vector<FrameSequence> corpus = {frames({{0.5f, 2.0f}, {0.5f, 2.0f}})};
  const std::vector<std::string> labels = {"a"};
  const FlatStart fs = flat_start(corpus, labels, 2, 2);
  const auto& c = fs.models[0].emissions[0].components()[0];
  EXPECT_EQ(c.mean, (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(c.variance, fs.variance_floor);
  EXPECT_GT(c.variance[0], 0.0);
}

TEST(FlatStart, MatchesStreamingOracle) {
  std::mt19937 rng(1);
  std::vector<FrameSequence> corpus;
  for (int i = 0; i < 7; ++i) corpus.push_back(random_frames(5 + i, 3, rng, 2.0));
  const std::vector<std::string> labels = {"x"};
  const FlatStart fs = flat_start(corpus, labels, 1, 3);
  // Welford's single-pass recurrence.
  std::vector<double> mean(3, 0.0), m2(3, 0.0);
  double n = 0;
  for (const auto& s : corpus)
    for (std::size_t t = 0; t < s.size(); ++t) {
      n += 1;
      for (std::size_t d = 0; d < 3; ++d) {
        const double x = s.frame(t)[d];
        const double delta = x - mean[d];
        mean[d] += delta / n;
        m2[d] += delta * (x - mean[d]);
      }
    }
  const auto& c = fs.models[0].emissions[0].components()[0];
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_NEAR(c.mean[d], mean[d], 1e-10);
    EXPECT_NEAR(c.variance[d], m2[d] / n, 1e-10);
  }
}

TEST(FlatStart, Errors) {
  const std::vector<std::string> labels = {"a"};
  EXPECT_THROW(flat_start(std::vector<FrameSequence>{}, labels, 1, 1), DomainError);
  EXPECT_THROW(flat_start(std::vector<FrameSequence>{FrameSequence(0, 2)}, labels, 1, 2), DomainError);
  EXPECT_THROW(flat_start(std::vector<FrameSequence>{frames({{1.0f}})}, labels, 1, 2), ShapeError);
}

TEST(Forward, SingleStateSinglePath) {
  CharacterModel m = CharacterModel::linear("a", 1, 0.5, unit(0.0));
  const ModelSet models = {m};
  const std::vector<std::size_t> seq = {0};
  const CompositeModel c = build_composite(models, seq);
  const double ll = log_forward(models, c, frames({{0.0f}}));
  EXPECT_NEAR(ll, std::log(0.5 / std::sqrt(2.0 * std::numbers::pi)), 1e-12);
  EXPECT_NEAR(log_backward(models, c, frames({{0.0f}})).total, ll, 1e-12);
}

TEST(Forward, TooFewFramesIsMinusInfinity) {
  const ModelSet models = {CharacterModel::linear("a", 3, 0.5, unit(0.0))};
  const std::vector<std::size_t> seq = {0, 0};
  const CompositeModel c = build_composite(models, seq);
  EXPECT_EQ(c.size(), 6u);
  EXPECT_EQ(log_forward(models, c, frames({{0}, {0}, {0}, {0}, {0}})), kLogZero);
  EXPECT_EQ(log_backward(models, c, frames({{0}, {0}, {0}, {0}, {0}})).total, kLogZero);
  EXPECT_TRUE(std::isfinite(log_forward(models, c, frames({{0}, {0}, {0}, {0}, {0}, {0}}))));
}

TEST(Forward, MatchesPathEnumeration) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSet models = {random_model("a", 1 + trial % 3, rng), random_model("b", 2, rng)};
    std::vector<std::size_t> seq;
    if (trial % 2 == 0)
      seq = {0};
    else
      seq = {1, 0};
    const CompositeModel c = build_composite(models, seq);
    if (c.size() > 4) continue;
    std::normal_distribution<float> g(0.0f, 1.5f);
    for (std::size_t T = 1; T <= 6; ++T) {
      FrameSequence obs(T, 1);
      for (float& v : obs.data) v = g(rng);
      const double brute = enumerate_composite(models, c, obs, false);
      const double fwd = log_forward(models, c, obs);
      const double bwd = log_backward(models, c, obs).total;
      if (brute == kLogZero) {
        EXPECT_EQ(fwd, kLogZero);
        continue;
      }
      EXPECT_NEAR(fwd, brute, 1e-8) << "trial " << trial << " T " << T;
      EXPECT_NEAR(bwd, fwd, 1e-8);
    }
  }
}

TEST(Forward, DimensionMismatch) {
  const ModelSet models = {CharacterModel::linear("a", 1, 0.5, unit(0.0))};
  const std::vector<std::size_t> seq = {0};
  const CompositeModel c = build_composite(models, seq);
  EXPECT_THROW(log_forward(models, c, frames({{0.0f, 1.0f}})), ShapeError);
  EXPECT_THROW(log_forward(models, c, FrameSequence(0, 1)), DomainError);
  EXPECT_THROW(build_composite(models, std::vector<std::size_t>{}), DomainError);
}

TEST(BaumWelch, SingleStateClosedForm) {
  const ModelSet models = {CharacterModel::linear("a", 1, 0.6, GaussianMixture::single({0.0}, {3.0}))};
  TrainingUtterance u{"u", frames({{1.0f}, {2.0f}, {4.0f}, {5.0f}}), {"a"}};
  const std::vector<TrainingUtterance> corpus = {u};
  const BaumWelchResult r = baum_welch_epoch(models, corpus);
  const auto& c = r.models[0].emissions[0].components()[0];
  EXPECT_NEAR(c.mean[0], 3.0, 1e-12);
  EXPECT_NEAR(c.variance[0], 2.5, 1e-12);
  EXPECT_NEAR(r.models[0].self_prob(0), 0.75, 1e-12);
  EXPECT_NEAR(r.models[0].next_prob(0), 0.25, 1e-12);
  EXPECT_EQ(r.utterances_used, 1u);
  // Pre-update likelihood is the forward score of the input models.
  const CompositeModel comp = build_composite(models, std::vector<std::size_t>{0});
  EXPECT_NEAR(r.log_likelihood, log_forward(models, comp, u.frames), 1e-9);
}

TEST(BaumWelch, FixedPointDoesNotMove) {
  const std::vector<float> xs = {0.5f, -1.0f, 2.0f, 0.25f, 1.25f};
  double mean = 0, var = 0;
  for (float x : xs) mean += x / 5.0;
  for (float x : xs) var += (x - mean) * (x - mean) / 5.0;
  CharacterModel m = CharacterModel::linear("a", 1, 0.8, GaussianMixture::single({mean}, {var}));
  const ModelSet models = {m};
  std::vector<std::vector<float>> rows;
  for (float x : xs) rows.push_back({x});
  const std::vector<TrainingUtterance> corpus = {{"u", frames(rows), {"a"}}};
  const ModelSet next = baum_welch_epoch(models, corpus).models;
  const auto& c = next[0].emissions[0].components()[0];
  EXPECT_NEAR(c.mean[0], mean, 1e-6);
  EXPECT_NEAR(c.variance[0], var, 1e-6);
  EXPECT_NEAR(next[0].self_prob(0), 0.8, 1e-6);
}

TEST(BaumWelch, MonotoneAndStochastic) {
  std::mt19937 rng(3);
  const auto corpus = random_corpus(12, rng);
  std::vector<FrameSequence> fr;
  for (const auto& u : corpus) fr.push_back(u.frames);
  const std::vector<std::string> labels = {"a", "b"};
  FlatStart fs = flat_start(fr, labels, 3, 2);
  ReestimationOptions opt;
  opt.variance_floor = fs.variance_floor;
  ModelSet models = fs.models;
  for (int stage = 0; stage < 3; ++stage) {
    if (stage > 0) models = split_mixtures(models);
    double prev = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < 5; ++e) {
      const BaumWelchResult r = baum_welch_epoch(models, corpus, opt);
      EXPECT_GE(r.log_likelihood, prev - 1e-6) << "stage " << stage << " epoch " << e;
      prev = r.log_likelihood;
      models = r.models;
      expect_invariants(models, fs.variance_floor);
    }
    EXPECT_GE(corpus_log_likelihood(models, corpus), prev - 1e-6);
  }
}

TEST(BaumWelch, SplitThenReestimateDoesNotLoseLikelihood) {
  std::mt19937 rng(4);
  const auto corpus = random_corpus(10, rng);
  const std::vector<std::string> labels = {"a", "b"};
  std::vector<double> before, after;
  TrainingSchedule sched{3, 2};
  ReestimationOptions opt;
  train_models(corpus, labels, 2, sched, opt, 1e-4, {}, [&](std::size_t mix, const ModelSet& m) {
    if (mix == 1) {
      before.push_back(corpus_log_likelihood(m, corpus));
      std::vector<FrameSequence> fr;
      for (const auto& u : corpus) fr.push_back(u.frames);
      ReestimationOptions o;
      o.variance_floor = flat_start(fr, labels, 2, 2).variance_floor;
      const ModelSet split = split_mixtures(m);
      after.push_back(baum_welch_epoch(baum_welch_epoch(split, corpus, o).models, corpus, o).log_likelihood);
    }
  });
  ASSERT_EQ(before.size(), 1u);
  EXPECT_GE(after[0], before[0] - 1e-6);
}

TEST(BaumWelch, IndependentOfJobs) {
  std::mt19937 rng(5);
  const auto corpus = random_corpus(30, rng);
  std::vector<FrameSequence> fr;
  for (const auto& u : corpus) fr.push_back(u.frames);
  const std::vector<std::string> labels = {"a", "b"};
  const FlatStart fs = flat_start(fr, labels, 2, 2);
  ReestimationOptions one, many;
  one.variance_floor = many.variance_floor = fs.variance_floor;
  many.jobs = 4;
  const ModelSet split = split_mixtures(baum_welch_epoch(fs.models, corpus, one).models);
  const BaumWelchResult a = baum_welch_epoch(split, corpus, one);
  const BaumWelchResult b = baum_welch_epoch(split, corpus, many);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_TRUE(a.models == b.models);
  EXPECT_EQ(corpus_log_likelihood(a.models, corpus, 1), corpus_log_likelihood(a.models, corpus, 3));
}

TEST(BaumWelch, UnknownCharacterIsDataError) {
  const ModelSet models = {CharacterModel::linear("a", 1, 0.5, unit(0.0))};
  const std::vector<TrainingUtterance> corpus = {{"line-7", frames({{0.0f}, {1.0f}}), {"a", "z"}}};
  try {
    baum_welch_epoch(models, corpus);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line-7"), std::string::npos);
  }
}

TEST(BaumWelch, ShortUtterancesAreSkipped) {
  const ModelSet models = {CharacterModel::linear("a", 3, 0.5, unit(0.0))};
  const std::vector<TrainingUtterance> corpus = {{"short", frames({{0.0f}, {1.0f}}), {"a"}},
                                                 {"ok", frames({{0.0f}, {1.0f}, {2.0f}, {3.0f}}), {"a"}}};
  const BaumWelchResult r = baum_welch_epoch(models, corpus);
  EXPECT_EQ(r.utterances_used, 1u);
  EXPECT_EQ(r.utterances_skipped, 1u);
}

TEST(Split, DoublesComponents) {
  const GaussianMixture g = GaussianMixture::single({1.0, -2.0}, {4.0, 0.25});
  const ModelSet models = {CharacterModel::linear("a", 2, 0.6, g)};
  const ModelSet split = split_mixtures(models);
  const auto& comps = split[0].emissions[1].components();
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].weight, 0.5);
  EXPECT_EQ(comps[1].weight, 0.5);
  EXPECT_DOUBLE_EQ(comps[0].mean[0], 1.4);
  EXPECT_DOUBLE_EQ(comps[1].mean[0], 0.6);
  EXPECT_DOUBLE_EQ(comps[0].mean[1], -1.9);
  EXPECT_DOUBLE_EQ(comps[1].mean[1], -2.1);
  EXPECT_EQ(comps[0].variance, g.components()[0].variance);
  EXPECT_EQ(split_mixtures(split)[0].emissions[0].size(), 4u);
  EXPECT_EQ(split[0].transitions, models[0].transitions);
}

TEST(Network, UniformLoop) {
  ModelSet four;
  for (const char* l : {"a", "b", "c", "d"}) four.push_back(CharacterModel::linear(l, 2, 0.5, unit(0)));
  EXPECT_DOUBLE_EQ(std::exp(build_ergodic_network(four).log_loop), 0.25);
  EXPECT_EQ(build_ergodic_network({four[0]}).log_loop, 0.0);
  EXPECT_THROW(build_ergodic_network({}), DomainError);
  ModelSet mixed = {four[0], CharacterModel::linear("e", 1, 0.5, GaussianMixture::single({0, 0}, {1, 1}))};
  EXPECT_THROW(build_ergodic_network(mixed), ShapeError);
}

TEST(Viterbi, TwoFarApartCharacters) {
  const ModelSet models = {CharacterModel::linear("A", 1, 0.5, unit(0.0)),
                           CharacterModel::linear("B", 1, 0.5, unit(10.0))};
  const RecognitionNetwork net = build_ergodic_network(models);
  const DecodeResult r = viterbi_decode(net, frames({{0}, {0}, {10}, {10}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.text, "AB");
  ASSERT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(r.segments[0].begin, 0u);
  EXPECT_EQ(r.segments[0].end, 2u);
  EXPECT_EQ(r.segments[1].begin, 2u);
  EXPECT_EQ(r.segments[1].end, 4u);
  const BruteDecode brute = enumerate_network(net, frames({{0}, {0}, {10}, {10}}));
  EXPECT_NEAR(r.log_score, brute.score, 1e-9);
}

TEST(Viterbi, SingleCharacterWithDominantSelfLoop) {
  const ModelSet models = {CharacterModel::linear("A", 2, 0.9, unit(0.0))};
  const DecodeResult r = viterbi_decode(build_ergodic_network(models), frames({{0.1f}, {-0.3f}, {0.2f}, {0.0f}, {1.0f}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.text, "A");
}

TEST(Viterbi, MatchesBruteForce) {
  std::mt19937 rng(11);
  std::normal_distribution<float> g(0.0f, 2.0f);
  for (int trial = 0; trial < 40; ++trial) {
    ModelSet models;
    for (const char* l : {"x", "y", "z"})
      models.push_back(random_model(l, 1 + static_cast<std::size_t>(rng() % 2), rng));
    const RecognitionNetwork net = build_ergodic_network(models, trial % 3 == 0 ? -0.7 : 0.0);
    FrameSequence obs(4, 1);
    for (float& v : obs.data) v = g(rng);
    const BruteDecode brute = enumerate_network(net, obs);
    const DecodeResult r = viterbi_decode(net, obs);
    ASSERT_TRUE(r.ok);
    EXPECT_NEAR(r.log_score, brute.score, 1e-8) << "trial " << trial;
    EXPECT_EQ(r.labels, brute.labels) << "trial " << trial;
    EXPECT_NEAR(rescore(net, obs, r), r.log_score, 1e-9);
  }
}

TEST(Viterbi, InsertionPenaltyShiftsScore) {
  std::mt19937 rng(12);
  const ModelSet models = {CharacterModel::linear("A", 2, 0.5, unit(0.0)),
                           CharacterModel::linear("B", 2, 0.5, unit(8.0)),
                           CharacterModel::linear("C", 2, 0.5, unit(-8.0))};
  const FrameSequence obs = frames({{0}, {0}, {8}, {8}, {-8}, {-8}, {0}, {0}});
  const DecodeResult base = viterbi_decode(build_ergodic_network(models), obs);
  ASSERT_EQ(base.text, "ABCA");
  for (double kappa : {-1.5, -0.25, 0.5}) {
    const DecodeResult r = viterbi_decode(build_ergodic_network(models, kappa), obs);
    EXPECT_EQ(r.text, base.text);
    EXPECT_NEAR(r.log_score - base.log_score, kappa * static_cast<double>(r.labels.size() - 1), 1e-9);
  }
}

TEST(Viterbi, EmissionOffsetLeavesPathUnchanged) {
  std::mt19937 rng(13);
  std::normal_distribution<float> g(0.0f, 2.0f);
  ModelSet models;
  for (const char* l : {"p", "q", "r"}) models.push_back(random_model(l, 2, rng));
  const RecognitionNetwork net = build_ergodic_network(models);
  FrameSequence obs(9, 1);
  for (float& v : obs.data) v = g(rng);
  EmissionTable table = network_emissions(net, obs);
  const DecodeResult a = viterbi_decode(net, table);
  for (double& v : table.values) v += 17.25;
  const DecodeResult b = viterbi_decode(net, table);
  EXPECT_EQ(a.path, b.path);
  EXPECT_EQ(a.text, b.text);
  EXPECT_NEAR(b.log_score - a.log_score, 17.25 * 9, 1e-9);
}

TEST(Viterbi, ImpossibleObservationFails) {
  const ModelSet models = {CharacterModel::linear("A", 3, 0.5, unit(0.0))};
  const DecodeResult r = viterbi_decode(build_ergodic_network(models), frames({{0}, {0}}));
  EXPECT_FALSE(r.ok);
  EXPECT_TRUE(r.text.empty());
  EXPECT_EQ(r.log_score, kLogZero);
}

TEST(Viterbi, TiesPreferLowerModel) {
  // Identical models: every labelling scores the same; model 0 must win.
  const ModelSet models = {CharacterModel::linear("A", 1, 0.5, unit(0.0)),
                           CharacterModel::linear("B", 1, 0.5, unit(0.0))};
  const DecodeResult r = viterbi_decode(build_ergodic_network(models), frames({{0}, {0}, {0}}));
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.text, "A");
}

TEST(ModelIo, RoundTripIsByteExact) {
  testing::TempDir dir("hmm");
  std::mt19937 rng(6);
  const auto corpus = random_corpus(8, rng);
  const std::vector<std::string> labels = {"a", "b"};
  const ModelSet models = train_models(corpus, labels, 2, {2, 2}, {});
  save_models(dir / "m.hmm", models);
  const ModelSet back = load_models(dir / "m.hmm");
  EXPECT_TRUE(back == models);
  save_models(dir / "n.hmm", back);
  const auto bytes = testing::read_bytes(dir / "m.hmm");
  EXPECT_EQ(bytes, testing::read_bytes(dir / "n.hmm"));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HMM1");

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(decode_models(cut, "cut"), FormatError);
  // Corrupt the first transition (entry -> entry) so the row no longer sums to 1.
  auto bad = bytes;
  const std::size_t first_transition = 4 + 4 + 4 + 1 + 12;
  bad[first_transition + 7] = 0x3f;
  EXPECT_THROW(decode_models(bad, "bad"), FormatError);

  const std::string text = dump_text(models);
  EXPECT_NE(text.find("models 2"), std::string::npos);
  EXPECT_NE(text.find("model \"a\" states 2 dim 2 mixtures 2"), std::string::npos);
}

TEST(Training, ScheduleAndErrors) {
  std::mt19937 rng(9);
  const auto corpus = random_corpus(6, rng);
  const std::vector<std::string> labels = {"a", "b"};
  std::vector<std::size_t> stages;
  std::size_t epochs = 0;
  const ModelSet m = train_models(
      corpus, labels, 2, {2, 4}, {}, 1e-4, [&](const EpochReport&) { ++epochs; },
      [&](std::size_t mix, const ModelSet& s) {
        stages.push_back(mix);
        EXPECT_EQ(s[0].n_components(), mix);
      });
  EXPECT_EQ(stages, (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(epochs, 6u);
  EXPECT_EQ(m[1].n_components(), 4u);
  EXPECT_THROW(train_models(corpus, labels, 2, {2, 3}, {}), ConfigError);
  EXPECT_THROW(train_models(std::vector<TrainingUtterance>{}, labels, 2, {2, 1}, {}), DomainError);
}

}  // namespace
}  // namespace scriptline::hmm
