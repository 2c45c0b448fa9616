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

// scriptline {synth|train-sae|extract|train-hmm|decode|evaluate|ablate}
//            --config <path> [--jobs N] [--<key> <value> ...]

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "scriptline.hpp"

namespace {

// Turns leftover `--key value` / `--key=value` arguments into overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) throw scriptline::ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= args.size()) throw scriptline::ConfigError("missing value for '" + a + "'");
      value = args[++i];
    }
    for (char& c : key)
      if (c == '-') c = '_';
    if (!scriptline::is_config_key(key)) throw scriptline::ConfigError("unknown config key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scriptline: segmentation-free text-line recognition"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t jobs = 0;
  bool quiet = false;
  bool dump = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "render a synthetic corpus with the built-in alphabet"},
      {"train-sae", "learn the visual dictionary (SAE or K-means)"},
      {"extract", "write per-line BoF frame sequences"},
      {"train-hmm", "train character HMMs by embedded Baum-Welch"},
      {"decode", "Viterbi-decode the test split"},
      {"evaluate", "score hypotheses against the test transcriptions"},
      {"ablate", "run a parameter sweep and write a CSV of CRR/LRR"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--jobs", jobs, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", quiet, "only print warnings and errors");
    if (name == "train-hmm") sub->add_flag("--dump-text", dump, "also write a readable <hmm_model>.txt");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (quiet) scriptline::log::set_level(scriptline::log::Level::kWarning);
    CLI::App* sub = nullptr;
    for (CLI::App* s : subs)
      if (s->parsed()) sub = s;
    auto overrides = parse_overrides(sub->remaining());
    if (jobs > 0) overrides.emplace_back("jobs", std::to_string(jobs));
    const scriptline::PipelineConfig config = scriptline::load_config(config_path, overrides);

    const std::string name = sub->get_name();
    if (name == "synth") {
      scriptline::cmd_synth(config);
    } else if (name == "train-sae") {
      scriptline::cmd_train_sae(config);
    } else if (name == "extract") {
      scriptline::cmd_extract(config);
    } else if (name == "train-hmm") {
      scriptline::cmd_train_hmm(config, dump);
    } else if (name == "decode") {
      scriptline::cmd_decode(config);
    } else if (name == "evaluate") {
      std::cout << scriptline::report_text(scriptline::cmd_evaluate(config));
    } else if (name == "ablate") {
      for (const auto& row : scriptline::cmd_ablate(config))
        std::cout << row.setting << "\tCRR " << row.crr << "\tLRR " << row.lrr << "\n";
    }
    return 0;
  } catch (const scriptline::Error& e) {
    std::cerr << "scriptline: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "scriptline: I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "scriptline: internal error: " << e.what() << "\n";
    return 1;
  }
}
