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

// Pipeline configuration: a flat key=value file plus `--key value`
// overrides. Precedence is overrides > file > built-in defaults.
//
// Relative paths are resolved against `work_dir`, which itself defaults to
// the directory holding the config file.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/bof.hpp"
#include "scriptline/corpus.hpp"
#include "scriptline/dsift.hpp"
#include "scriptline/error.hpp"
#include "scriptline/sae.hpp"

namespace scriptline {

struct PipelineConfig {
  std::string work_dir = ".";

  // Corpus.
  std::string charset = "charset.txt";
  std::string train_manifest = "corpus/train.tsv";
  std::string test_manifest = "corpus/test.tsv";
  std::string synth_dir = "corpus";
  std::size_t synth_train_lines = 300;
  std::size_t synth_test_lines = 100;
  std::size_t synth_min_length = 3;
  std::size_t synth_max_length = 8;
  std::int64_t synth_spacing_min = -2;
  std::int64_t synth_spacing_max = 3;
  std::size_t synth_jitter = 2;
  double synth_salt_pepper = 0.01;
  double synth_scale_min = 1.0;
  double synth_scale_max = 1.0;
  double synth_space_probability = 0.15;
  std::size_t synth_seed = 1;

  // Descriptors.
  std::size_t height = 55;
  std::size_t patch = 5;
  std::size_t stride = 2;

  // Codebook.
  std::string codebook = "sae";      // sae | kmeans
  std::string quantization = "soft";  // soft | hard
  std::size_t hidden_size = 500;
  double l2_weight = 0.1;
  double sparsity_weight = 1.0;
  double sparsity_target = 0.95;
  std::size_t sae_epochs = 30;
  double sae_learning_rate = 0.5;
  double sae_momentum = 0.9;
  std::size_t sae_batch_size = 100;
  std::size_t sae_samples = 20000;
  std::size_t sae_seed = 1;
  std::size_t kmeans_iterations = 100;
  std::size_t kmeans_seed = 1;

  // Frames.
  std::size_t window = 4;
  std::size_t shift = 3;
  bool normalize_histograms = true;

  // HMMs.
  std::size_t n_states = 10;
  std::size_t target_mixtures = 4;
  std::size_t bw_epochs = 4;  // per mixture stage
  double variance_floor_scale = 1e-4;
  double insertion_penalty = 0.0;  // log-domain, added per character transition

  // Artifacts.
  std::string sae_model = "model/codebook.sae";
  std::string kmeans_model = "model/codebook.kmc";
  std::string features_dir = "features";
  std::string descriptor_dump_dir;  // empty: no descriptor dump
  std::string hmm_model = "model/characters.hmm";
  std::string hypotheses = "results/hypotheses.tsv";
  std::string report = "results/report";  // writes <report>.txt and <report>.json

  // Ablation.
  std::string sweep;  // e.g. patch/stride=3/1,5/2;target_mixtures=1,2,4
  std::string ablation_dir = "ablation";
  std::string ablation_csv = "results/ablation.csv";

  std::size_t jobs = 1;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::path(work_dir) / path;
  }

  DsiftConfig dsift() const {
    DsiftConfig c;
    c.patch_size = patch;
    c.stride = stride;
    return c;
  }

  SaeTrainConfig sae_train() const {
    SaeTrainConfig c;
    c.hidden_size = hidden_size;
    c.l2_weight = l2_weight;
    c.sparsity_weight = sparsity_weight;
    c.sparsity_target = sparsity_target;
    c.epochs = sae_epochs;
    c.learning_rate = sae_learning_rate;
    c.momentum = sae_momentum;
    c.batch_size = sae_batch_size;
    c.rng_seed = sae_seed;
    return c;
  }

  Quantization quantization_mode() const {
    return quantization == "hard" ? Quantization::kHard : Quantization::kSoft;
  }

  SynthOptions synth(std::size_t n_lines, std::uint64_t seed) const {
    SynthOptions o;
    o.n_lines = n_lines;
    o.min_length = synth_min_length;
    o.max_length = synth_max_length;
    o.spacing_min = static_cast<int>(synth_spacing_min);
    o.spacing_max = static_cast<int>(synth_spacing_max);
    o.jitter = synth_jitter;
    o.salt_pepper = synth_salt_pepper;
    o.scale_min = synth_scale_min;
    o.scale_max = synth_scale_max;
    o.space_probability = synth_space_probability;
    o.seed = seed;
    return o;
  }

  void validate() const;
};

namespace detail {

using FieldRef = std::variant<std::string PipelineConfig::*, std::size_t PipelineConfig::*,
                              std::int64_t PipelineConfig::*,
                              double PipelineConfig::*, bool PipelineConfig::*>;

/// Every recognized key, in the canonical order used by to_text().
inline const std::vector<std::pair<std::string_view, FieldRef>>& config_fields() {
  using C = PipelineConfig;
  static const std::vector<std::pair<std::string_view, FieldRef>> fields = {
      {"work_dir", &C::work_dir},
      {"charset", &C::charset},
      {"train_manifest", &C::train_manifest},
      {"test_manifest", &C::test_manifest},
      {"synth_dir", &C::synth_dir},
      {"synth_train_lines", &C::synth_train_lines},
      {"synth_test_lines", &C::synth_test_lines},
      {"synth_min_length", &C::synth_min_length},
      {"synth_max_length", &C::synth_max_length},
      {"synth_spacing_min", &C::synth_spacing_min},
      {"synth_spacing_max", &C::synth_spacing_max},
      {"synth_jitter", &C::synth_jitter},
      {"synth_salt_pepper", &C::synth_salt_pepper},
      {"synth_scale_min", &C::synth_scale_min},
      {"synth_scale_max", &C::synth_scale_max},
      {"synth_space_probability", &C::synth_space_probability},
      {"synth_seed", &C::synth_seed},
      {"height", &C::height},
      {"patch", &C::patch},
      {"stride", &C::stride},
      {"codebook", &C::codebook},
      {"quantization", &C::quantization},
      {"hidden_size", &C::hidden_size},
      {"l2_weight", &C::l2_weight},
      {"sparsity_weight", &C::sparsity_weight},
      {"sparsity_target", &C::sparsity_target},
      {"sae_epochs", &C::sae_epochs},
      {"sae_learning_rate", &C::sae_learning_rate},
      {"sae_momentum", &C::sae_momentum},
      {"sae_batch_size", &C::sae_batch_size},
      {"sae_samples", &C::sae_samples},
      {"sae_seed", &C::sae_seed},
      {"kmeans_iterations", &C::kmeans_iterations},
      {"kmeans_seed", &C::kmeans_seed},
      {"window", &C::window},
      {"shift", &C::shift},
      {"normalize_histograms", &C::normalize_histograms},
      {"n_states", &C::n_states},
      {"target_mixtures", &C::target_mixtures},
      {"bw_epochs", &C::bw_epochs},
      {"variance_floor_scale", &C::variance_floor_scale},
      {"insertion_penalty", &C::insertion_penalty},
      {"sae_model", &C::sae_model},
      {"kmeans_model", &C::kmeans_model},
      {"features_dir", &C::features_dir},
      {"descriptor_dump_dir", &C::descriptor_dump_dir},
      {"hmm_model", &C::hmm_model},
      {"hypotheses", &C::hypotheses},
      {"report", &C::report},
      {"sweep", &C::sweep},
      {"ablation_dir", &C::ablation_dir},
      {"ablation_csv", &C::ablation_csv},
      {"jobs", &C::jobs},
  };
  return fields;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename Int>
Int parse_integer(std::string_view key, std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" + std::string(text) + "'");
  return value;
}

inline double parse_double(std::string_view key, std::string_view text) {
  const std::string s(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(value))
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + s + "'");
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" + std::string(text) + "'");
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline bool is_config_key(std::string_view key) {
  for (const auto& [name, field] : detail::config_fields())
    if (name == key) return true;
  return false;
}

/// Assigns one key from its textual value; unknown keys and unparsable
/// values raise ConfigError.
inline void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  for (const auto& [name, field] : detail::config_fields()) {
    if (name != key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(config.*member)>;
          if constexpr (std::is_same_v<T, std::string>) {
            config.*member = std::string(value);
          } else if constexpr (std::is_same_v<T, bool>) {
            config.*member = detail::parse_bool(key, value);
          } else if constexpr (std::is_same_v<T, double>) {
            config.*member = detail::parse_double(key, value);
          } else {
            config.*member = detail::parse_integer<T>(key, value);
          }
        },
        field);
    return;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline std::string get_config_value(const PipelineConfig& config, std::string_view key) {
  for (const auto& [name, field] : detail::config_fields()) {
    if (name != key) continue;
    return std::visit(
        [&](auto member) -> std::string {
          using T = std::remove_cvref_t<decltype(config.*member)>;
          if constexpr (std::is_same_v<T, std::string>) {
            return config.*member;
          } else if constexpr (std::is_same_v<T, bool>) {
            return config.*member ? "true" : "false";
          } else if constexpr (std::is_same_v<T, double>) {
            return detail::format_double(config.*member);
          } else {
            return std::to_string(config.*member);
          }
        },
        field);
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// All keys in canonical order, one `key = value` line each.
inline std::string config_to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& [name, field] : detail::config_fields()) {
    out += name;
    out += " = ";
    out += get_config_value(config, name);
    out += '\n';
  }
  return out;
}

/// Parses `key = value` lines; `#` starts a comment line. Duplicate keys
/// are an error.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                          const std::string& source) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, std::size_t> seen;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    std::string key(detail::trim(line.substr(0, eq)));
    std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!is_config_key(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError(where + ": duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

/// Defaults, then the file (if any), then overrides; validates the result.
inline PipelineConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  PipelineConfig config;
  if (!path.empty()) {
    if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
    const auto bytes = io::read_file(path);
    const std::filesystem::path dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    config.work_dir = dir.string();
    for (const auto& [key, value] : parse_config_text(std::string_view(bytes.data(), bytes.size()), path.string())) {
      if (key == "work_dir") {
        const std::filesystem::path w(value);
        config.work_dir = (w.is_absolute() ? w : dir / w).lexically_normal().string();
      } else {
        set_config_value(config, key, value);
      }
    }
  }
  for (const auto& [key, value] : overrides) set_config_value(config, key, value);
  config.validate();
  return config;
}

inline void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(!work_dir.empty(), "work_dir must not be empty");
  require(height >= 8, "height must be >= 8");
  try {
    dsift().validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  require(patch <= height, "patch must not exceed height");
  require(codebook == "sae" || codebook == "kmeans", "codebook must be 'sae' or 'kmeans'");
  require(quantization == "soft" || quantization == "hard", "quantization must be 'soft' or 'hard'");
  require(!(codebook == "kmeans" && quantization == "soft"), "a kmeans codebook supports only quantization=hard");
  try {
    sae_train().validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  require(sae_samples >= 1, "sae_samples must be >= 1");
  require(kmeans_iterations >= 1, "kmeans_iterations must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(shift >= 1, "shift must be >= 1");
  require(n_states >= 1, "n_states must be >= 1");
  require(target_mixtures >= 1 && (target_mixtures & (target_mixtures - 1)) == 0,
          "target_mixtures must be a power of two");
  require(bw_epochs >= 1, "bw_epochs must be >= 1");
  require(variance_floor_scale > 0.0, "variance_floor_scale must be > 0");
  require(jobs >= 1, "jobs must be >= 1");
  require(synth_train_lines >= 1, "synth_train_lines must be >= 1");
  try {
    synth(synth_train_lines, synth_seed).validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  require(synth_spacing_min >= -64 && synth_spacing_max <= 1024, "synth spacing out of range");
}

}  // namespace scriptline
