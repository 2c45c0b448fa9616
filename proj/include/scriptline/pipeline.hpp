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

// The commands behind the `scriptline` tool. Each one reads its inputs
// from the paths in a PipelineConfig and writes its outputs atomically.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/bof.hpp"
#include "scriptline/config.hpp"
#include "scriptline/corpus.hpp"
#include "scriptline/dsift.hpp"
#include "scriptline/error.hpp"
#include "scriptline/eval.hpp"
#include "scriptline/frame_sequence.hpp"
#include "scriptline/hmm.hpp"
#include "scriptline/imaging.hpp"
#include "scriptline/log.hpp"
#include "scriptline/parallel.hpp"
#include "scriptline/sae.hpp"

namespace scriptline {

namespace fs = std::filesystem;

using hmm::DecodeResult;
using hmm::EpochReport;
using hmm::ModelSet;
using hmm::RecognitionNetwork;
using hmm::ReestimationOptions;
using hmm::TrainingSchedule;
using hmm::TrainingUtterance;

inline constexpr std::uint64_t kTestSeedSalt = 0x7465737453706c74ull;

/// Height-normalizes an image and extracts its dense descriptor grid.
inline DescriptorGrid line_descriptors(const fs::path& image, const PipelineConfig& config) {
  const GrayImage img = normalize_height(load_image(image), config.height);
  return extract_dense(img, config.dsift());
}

/// Frame sequence of one line image under a codebook.
inline FrameSequence line_frames(const DescriptorGrid& grid, const Codebook& codebook, const PipelineConfig& config) {
  FrameSequence seq = frame_sequence(grid, codebook, config.window, config.shift, config.quantization_mode());
  if (config.normalize_histograms) normalize_frames_l1(seq);
  return seq;
}

inline fs::path features_path(const PipelineConfig& config, const std::string& split, const ManifestEntry& entry) {
  fs::path rel(entry.image);
  rel.replace_extension(".bof");
  return config.resolve(config.features_dir) / split / rel;
}

inline Charset load_config_charset(const PipelineConfig& config) {
  const fs::path path = config.resolve(config.charset);
  if (!fs::exists(path)) throw IoError("charset not found: " + path.string());
  return load_charset(path);
}

inline CorpusManifest load_split(const PipelineConfig& config, const Charset& charset, const std::string& split) {
  const std::string& rel = split == "train" ? config.train_manifest : config.test_manifest;
  if (rel.empty()) throw ConfigError(split + "_manifest is not set");
  return load_manifest(config.resolve(rel), charset, split);
}

inline Codebook load_codebook(const PipelineConfig& config) {
  if (config.codebook == "kmeans") {
    const fs::path path = config.resolve(config.kmeans_model);
    if (!fs::exists(path)) throw IoError("K-means codebook not found (run train-sae): " + path.string());
    return Codebook(load_kmeans(path));
  }
  const fs::path path = config.resolve(config.sae_model);
  if (!fs::exists(path)) throw IoError("SAE model not found (run train-sae): " + path.string());
  return Codebook(load_sae(path));
}

// ---------------------------------------------------------------------------

inline void cmd_synth(const PipelineConfig& config) {
  config.validate();
  const Alphabet alphabet = builtin_alphabet();
  const fs::path dir = config.resolve(config.synth_dir);
  const auto train = synth_generate(alphabet, config.synth(config.synth_train_lines, config.synth_seed), dir, "train");
  log::info("synth: wrote ", train.size(), " training lines to ", (dir / "train.tsv").string());
  if (config.synth_test_lines > 0) {
    const auto test =
        synth_generate(alphabet, config.synth(config.synth_test_lines, config.synth_seed ^ kTestSeedSalt), dir, "test");
    log::info("synth: wrote ", test.size(), " test lines to ", (dir / "test.tsv").string());
  }
  save_charset(config.resolve(config.charset), alphabet.charset());
}

/// Descriptor pool for dictionary learning: up to ceil(sae_samples / n)
/// descriptors drawn without replacement from each of the n training
/// images, concatenated in manifest order.
inline Eigen::MatrixXd descriptor_pool(const PipelineConfig& config, const CorpusManifest& manifest) {
  const std::size_t n = manifest.size();
  if (n == 0) throw DataError("training manifest is empty");
  const std::size_t per_image = (config.sae_samples + n - 1) / n;
  std::vector<Eigen::MatrixXd> parts(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const DescriptorGrid grid = line_descriptors(manifest.image_path(i), config);
    const std::size_t take = std::min(per_image, grid.size());
    std::vector<std::size_t> idx(grid.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    std::mt19937_64 rng(config.sae_seed * 0x9e3779b97f4a7c15ull + i);
    for (std::size_t j = 0; j < take; ++j) {
      const std::size_t r = j + std::uniform_int_distribution<std::size_t>(0, idx.size() - 1 - j)(rng);
      std::swap(idx[j], idx[r]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(grid.dim), static_cast<Eigen::Index>(take));
    for (std::size_t j = 0; j < take; ++j) {
      const auto d = grid.descriptor(idx[j]);
      for (std::size_t k = 0; k < grid.dim; ++k) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = d[k];
    }
    parts[i] = std::move(m);
  });
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.cols();
  if (total == 0) throw DataError("no descriptors in the training images (lines narrower than the patch?)");
  Eigen::MatrixXd pool(static_cast<Eigen::Index>(config.dsift().descriptor_dim()), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    pool.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return pool;
}

/// Largest standard deviation of any hidden unit's activation over the
/// columns of `pool`.
inline double activation_spread(const SaeParams& params, const Eigen::MatrixXd& pool) {
  const Eigen::MatrixXd z = encode_batch(params, pool);
  const Eigen::VectorXd mean = z.rowwise().mean();
  return ((z.colwise() - mean).array().square().rowwise().mean()).sqrt().maxCoeff();
}

inline void cmd_train_sae(const PipelineConfig& config) {
  config.validate();
  const Charset charset = load_config_charset(config);
  const CorpusManifest manifest = load_split(config, charset, "train");
  const Eigen::MatrixXd pool = descriptor_pool(config, manifest);
  log::info("train-sae: pool of ", pool.cols(), " descriptors (dim ", pool.rows(), ")");
  if (config.codebook == "kmeans") {
    const KMeansResult r = kmeans_fit(pool, config.hidden_size, config.kmeans_seed, config.kmeans_iterations);
    log::info("train-sae: K-means K=", config.hidden_size, " iterations ", r.iterations, " inertia ", r.inertia);
    save_kmeans(config.resolve(config.kmeans_model), r.codebook);
    return;
  }
  const SaeTrainResult r = train_sae(pool, config.sae_train(), [](std::size_t epoch, double value) {
    log::info("train-sae: epoch ", epoch + 1, " loss ", value);
  });
  log::info("train-sae: initial loss ", r.initial_loss);
  const double spread = activation_spread(r.params, pool);
  log::info("train-sae: largest hidden-unit activation std over the pool ", spread);
  if (spread < 1e-6)
    log::warn("SAE hidden units are constant over the training descriptors (std ", spread,
              "); soft histograms will carry no information. Lower l2_weight.");
  save_sae(config.resolve(config.sae_model), r.params);
}

inline void cmd_extract(const PipelineConfig& config) {
  config.validate();
  const Charset charset = load_config_charset(config);
  const Codebook codebook = load_codebook(config);
  if (codebook.input_dim() != config.dsift().descriptor_dim())
    throw ConfigError("codebook input size " + std::to_string(codebook.input_dim()) +
                      " does not match the descriptor size " + std::to_string(config.dsift().descriptor_dim()));
  for (const std::string split : {"train", "test"}) {
    if ((split == "train" ? config.train_manifest : config.test_manifest).empty()) continue;
    const CorpusManifest manifest = load_split(config, charset, split);
    std::vector<std::size_t> frames(manifest.size());
    parallel_for(manifest.size(), config.jobs, [&](std::size_t i) {
      const DescriptorGrid grid = line_descriptors(manifest.image_path(i), config);
      if (!config.descriptor_dump_dir.empty()) {
        fs::path rel(manifest.entries[i].image);
        rel.replace_extension(".dsg");
        save_descriptor_grid(config.resolve(config.descriptor_dump_dir) / split / rel, grid);
      }
      const FrameSequence seq = line_frames(grid, codebook, config);
      save_frames(features_path(config, split, manifest.entries[i]), seq);
      frames[i] = seq.size();
    });
    std::size_t total = 0;
    for (std::size_t f : frames) total += f;
    log::info("extract: ", split, ": ", manifest.size(), " lines, ", total, " frames");
  }
}

inline std::vector<TrainingUtterance> load_utterances(const PipelineConfig& config, const Charset& charset,
                                                      const CorpusManifest& manifest, const std::string& split) {
  std::vector<TrainingUtterance> corpus(manifest.size());
  parallel_for(manifest.size(), config.jobs, [&](std::size_t i) {
    const fs::path path = features_path(config, split, manifest.entries[i]);
    if (!fs::exists(path)) throw IoError("features not found (run extract): " + path.string());
    corpus[i].id = manifest.entries[i].image;
    corpus[i].frames = load_frames(path);
    corpus[i].transcription = charset.tokenize(manifest.entries[i].transcription);
  });
  return corpus;
}

/// Trains the character models; `on_stage` sees the models after every
/// mixture stage.
inline ModelSet train_hmm(const PipelineConfig& config,
                          const std::function<void(std::size_t, const ModelSet&)>& on_stage = {}) {
  config.validate();
  const Charset charset = load_config_charset(config);
  const CorpusManifest manifest = load_split(config, charset, "train");
  const std::vector<TrainingUtterance> corpus = load_utterances(config, charset, manifest, "train");
  TrainingSchedule schedule;
  schedule.epochs_per_stage = config.bw_epochs;
  schedule.target_mixtures = config.target_mixtures;
  ReestimationOptions options;
  options.jobs = config.jobs;
  return hmm::train_models(
      corpus, charset.symbols(), config.n_states, schedule, options, config.variance_floor_scale,
      [](const EpochReport& r) {
        log::info("train-hmm: mixtures ", r.mixtures, " epoch ", r.epoch + 1, " log-likelihood ", r.log_likelihood,
                  " (", r.used, " used, ", r.skipped, " skipped)");
      },
      on_stage);
}

inline void cmd_train_hmm(const PipelineConfig& config, bool dump = false) {
  const ModelSet models = train_hmm(config);
  const fs::path path = config.resolve(config.hmm_model);
  hmm::save_models(path, models);
  if (dump) io::write_file_atomic(fs::path(path.string() + ".txt"), hmm::dump_text(models));
}

struct Hypothesis {
  std::string image;
  bool ok = false;
  std::string text;
  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Hypothesis file: one `<image>\t<ok|fail>\t<text>` line per test line,
// in manifest order. Failed decodes carry an empty text.
inline std::string encode_hypotheses(const std::vector<Hypothesis>& hyps) {
  std::string out;
  for (const auto& h : hyps) out += h.image + '\t' + (h.ok ? "ok" : "fail") + '\t' + h.text + '\n';
  return out;
}

inline std::vector<Hypothesis> load_hypotheses(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("hypothesis file not found: " + path.string());
  const auto bytes = io::read_file(path);
  const std::string_view text(bytes.data(), bytes.size());
  std::vector<Hypothesis> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (t2 == std::string_view::npos) throw FormatError(where + ": expected <image>\\t<ok|fail>\\t<text>");
    const std::string_view status = line.substr(t1 + 1, t2 - t1 - 1);
    if (status != "ok" && status != "fail") throw FormatError(where + ": status must be ok or fail");
    out.push_back({std::string(line.substr(0, t1)), status == "ok", std::string(line.substr(t2 + 1))});
  }
  return out;
}

inline std::vector<Hypothesis> decode_split(const PipelineConfig& config, const ModelSet& models,
                                            const Charset& charset, const CorpusManifest& manifest) {
  const auto utterances = load_utterances(config, charset, manifest, "test");
  const RecognitionNetwork net = hmm::build_ergodic_network(models, config.insertion_penalty);
  std::vector<Hypothesis> hyps(manifest.size());
  parallel_for(manifest.size(), config.jobs, [&](std::size_t i) {
    hyps[i].image = manifest.entries[i].image;
    const DecodeResult r = hmm::viterbi_decode(net, utterances[i].frames);
    hyps[i].ok = r.ok;
    if (r.ok) hyps[i].text = r.text;
  });
  return hyps;
}

inline void cmd_decode(const PipelineConfig& config) {
  config.validate();
  const Charset charset = load_config_charset(config);
  const fs::path model_path = config.resolve(config.hmm_model);
  if (!fs::exists(model_path)) throw IoError("HMM file not found (run train-hmm): " + model_path.string());
  const ModelSet models = hmm::load_models(model_path);
  const CorpusManifest manifest = load_split(config, charset, "test");
  const auto hyps = decode_split(config, models, charset, manifest);
  std::size_t failed = 0;
  for (const auto& h : hyps) failed += h.ok ? 0 : 1;
  io::write_file_atomic(config.resolve(config.hypotheses), encode_hypotheses(hyps));
  log::info("decode: ", hyps.size(), " lines, ", failed, " failed");
}

inline EvalReport evaluate_hypotheses(const CorpusManifest& manifest, const std::vector<Hypothesis>& hyps,
                                      const Charset& charset) {
  if (hyps.size() != manifest.size())
    throw DataError("hypothesis count " + std::to_string(hyps.size()) + " != test manifest size " +
                    std::to_string(manifest.size()));
  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (hyps[i].image != manifest.entries[i].image)
      throw DataError("hypothesis line " + std::to_string(i + 1) + " is for '" + hyps[i].image + "', expected '" +
                      manifest.entries[i].image + "'");
    pairs.push_back({hyps[i].image, manifest.entries[i].transcription, hyps[i].ok ? hyps[i].text : std::string()});
  }
  return score_corpus(pairs, charset);
}

inline EvalReport cmd_evaluate(const PipelineConfig& config) {
  config.validate();
  const Charset charset = load_config_charset(config);
  const CorpusManifest manifest = load_split(config, charset, "test");
  const auto hyps = load_hypotheses(config.resolve(config.hypotheses));
  const EvalReport report = evaluate_hypotheses(manifest, hyps, charset);
  const fs::path base = config.resolve(config.report);
  io::write_file_atomic(fs::path(base.string() + ".txt"), report_text(report));
  io::write_file_atomic(fs::path(base.string() + ".json"), report_json(report).dump(2) + "\n");
  log::info("evaluate: CRR ", 100.0 * report.crr(), "%, LRR ", 100.0 * report.lrr(), "%");
  return report;
}

// ---------------------------------------------------------------------------
// Ablation sweeps.

/// One sweep axis: keys varied jointly, e.g. patch/stride = 3/1,5/2.
struct SweepAxis {
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> values;
};

using SweepSetting = std::vector<std::pair<std::string, std::string>>;

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = s.find(sep, pos);
    out.emplace_back(detail::trim(s.substr(pos, end == std::string_view::npos ? end : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

/// Grammar: axis (';' axis)*, axis = keys '=' tuple (',' tuple)*, where
/// keys and tuples are '/'-separated lists of equal length.
inline std::vector<SweepAxis> parse_sweep(std::string_view text) {
  std::vector<SweepAxis> axes;
  if (detail::trim(text).empty()) throw ConfigError("sweep is empty");
  for (const std::string& part : split_on(text, ';')) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep axis '" + part + "' lacks '='");
    SweepAxis axis;
    axis.keys = split_on(std::string_view(part).substr(0, eq), '/');
    for (const auto& k : axis.keys) {
      if (!is_config_key(k)) throw ConfigError("sweep: unknown config key '" + k + "'");
      if (k == "sweep" || k == "ablation_dir" || k == "ablation_csv" || k == "work_dir")
        throw ConfigError("sweep: key '" + k + "' cannot be swept");
    }
    for (const std::string& tuple : split_on(std::string_view(part).substr(eq + 1), ',')) {
      auto values = split_on(tuple, '/');
      if (values.size() != axis.keys.size())
        throw ConfigError("sweep: tuple '" + tuple + "' does not match keys of axis '" + part + "'");
      axis.values.push_back(std::move(values));
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

/// Cartesian product of the axes; the last axis varies fastest.
inline std::vector<SweepSetting> expand_sweep(const std::vector<SweepAxis>& axes) {
  std::vector<SweepSetting> settings{{}};
  for (const auto& axis : axes) {
    std::vector<SweepSetting> next;
    for (const auto& base : settings) {
      for (const auto& tuple : axis.values) {
        SweepSetting s = base;
        for (std::size_t k = 0; k < axis.keys.size(); ++k) s.emplace_back(axis.keys[k], tuple[k]);
        next.push_back(std::move(s));
      }
    }
    settings = std::move(next);
  }
  return settings;
}

inline std::string setting_label(const SweepSetting& s) {
  std::string out;
  for (const auto& [k, v] : s) out += (out.empty() ? "" : " ") + k + "=" + v;
  return out;
}

namespace detail {

inline const std::vector<std::string_view>& codebook_keys() {
  static const std::vector<std::string_view> keys = {
      "charset",    "train_manifest",  "height",          "patch",           "stride",
      "codebook",   "hidden_size",     "l2_weight",       "sparsity_weight", "sparsity_target",
      "sae_epochs", "sae_learning_rate", "sae_momentum",  "sae_batch_size",  "sae_samples",
      "sae_seed",   "kmeans_iterations", "kmeans_seed"};
  return keys;
}

inline const std::vector<std::string_view>& feature_keys() {
  static const std::vector<std::string_view> keys = [] {
    auto k = codebook_keys();
    for (std::string_view extra : {"test_manifest", "quantization", "window", "shift", "normalize_histograms"})
      k.push_back(extra);
    return k;
  }();
  return keys;
}

inline const std::vector<std::string_view>& hmm_keys() {
  static const std::vector<std::string_view> keys = [] {
    auto k = feature_keys();
    for (std::string_view extra : {"n_states", "bw_epochs", "variance_floor_scale"}) k.push_back(extra);
    return k;
  }();
  return keys;
}

/// FNV-1a over the canonical key=value lines: names a cache directory.
/// The charset and manifests enter by content, not by path, so the same
/// corpus gives the same names wherever it lives.
inline std::string stage_hash(const PipelineConfig& config, const std::vector<std::string_view>& keys) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::string_view text) {
    for (char c : text) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
  };
  for (std::string_view key : keys) {
    mix(key);
    mix("=");
    if (key == "charset" || key == "train_manifest" || key == "test_manifest") {
      const auto bytes = io::read_file(config.resolve(get_config_value(config, key)));
      mix(std::string_view(bytes.data(), bytes.size()));
    } else {
      mix(get_config_value(config, key));
    }
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace detail

struct AblationRow {
  std::string setting;
  double crr = 0.0;
  double lrr = 0.0;
};

/// Runs train-sae / extract / train-hmm / decode / evaluate for every
/// setting of the sweep and writes a CSV of (setting, CRR, LRR) in percent.
/// Stage outputs are cached under `ablation_dir` keyed by the settings they
/// depend on, so settings that differ only in later stages share work.
inline std::vector<AblationRow> cmd_ablate(const PipelineConfig& config) {
  config.validate();
  const auto settings = expand_sweep(parse_sweep(config.sweep));
  std::vector<PipelineConfig> configs;
  for (const auto& s : settings) {
    PipelineConfig c = config;
    for (const auto& [k, v] : s) set_config_value(c, k, v);
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("sweep setting '" + setting_label(s) + "': " + e.what());
    }
    configs.push_back(std::move(c));
  }

  const fs::path root = fs::absolute(config.resolve(config.ablation_dir));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    PipelineConfig c = configs[i];
    c.charset = fs::absolute(c.resolve(c.charset)).string();
    c.train_manifest = fs::absolute(c.resolve(c.train_manifest)).string();
    c.test_manifest = fs::absolute(c.resolve(c.test_manifest)).string();
    const std::string label = setting_label(settings[i]);
    log::info("ablate: [", i + 1, "/", settings.size(), "] ", label);

    const fs::path cb_dir = root / ("codebook-" + detail::stage_hash(c, detail::codebook_keys()));
    c.sae_model = (cb_dir / "codebook.sae").string();
    c.kmeans_model = (cb_dir / "codebook.kmc").string();
    if (!fs::exists(c.codebook == "kmeans" ? c.kmeans_model : c.sae_model)) cmd_train_sae(c);

    const fs::path feat_dir = root / ("features-" + detail::stage_hash(c, detail::feature_keys()));
    c.features_dir = feat_dir.string();
    c.descriptor_dump_dir.clear();
    if (!fs::exists(feat_dir / "complete")) {
      cmd_extract(c);
      io::write_file_atomic(feat_dir / "complete", std::string_view("ok\n"));
    }

    const fs::path hmm_dir = root / ("hmm-" + detail::stage_hash(c, detail::hmm_keys()));
    auto stage_file = [&](std::size_t m) { return hmm_dir / ("mixtures-" + std::to_string(m) + ".hmm"); };
    c.hmm_model = stage_file(c.target_mixtures).string();
    if (!fs::exists(c.hmm_model))
      train_hmm(c, [&](std::size_t m, const ModelSet& models) { hmm::save_models(stage_file(m), models); });

    const fs::path out_dir = root / ("run-" + detail::stage_hash(c, [&] {
                                       std::vector<std::string_view> k = detail::hmm_keys();
                                       k.push_back("target_mixtures");
                                       k.push_back("insertion_penalty");
                                       return k;
                                     }()));
    c.hypotheses = (out_dir / "hypotheses.tsv").string();
    c.report = (out_dir / "report").string();
    cmd_decode(c);
    const EvalReport report = cmd_evaluate(c);
    rows.push_back({label, 100.0 * report.crr(), 100.0 * report.lrr()});
  }

  std::string csv = "setting,crr,lrr\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.4f,%.4f\n", r.crr, r.lrr);
    csv += "\"" + r.setting + "\"" + buf;
  }
  io::write_file_atomic(config.resolve(config.ablation_csv), csv);
  return rows;
}

}  // namespace scriptline
