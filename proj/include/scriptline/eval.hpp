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

// Recognition scoring in the style of HTK's HResults: minimum edit
// alignment, substitution/deletion/insertion counts, Correctness
// (N-S-D)/N and Accuracy (N-S-D-I)/N. Character recognition rate (CRR)
// is reported as Accuracy.

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "scriptline/corpus.hpp"
#include "scriptline/error.hpp"

namespace scriptline {

struct AlignedPair {
  std::optional<std::size_t> ref;  // empty for an insertion
  std::optional<std::size_t> hyp;  // empty for a deletion
  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct Alignment {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::vector<AlignedPair> pairs;

  std::size_t errors() const { return substitutions + deletions + insertions; }
};

/// Unit-cost Levenshtein alignment. Among minimum-cost alignments the one
/// with the fewest substitutions, then the fewest insertions, is returned.
template <typename Token>
Alignment edit_alignment(std::span<const Token> ref, std::span<const Token> hyp) {
  using Cost = std::tuple<std::size_t, std::size_t, std::size_t>;  // total, subs, ins
  const std::size_t n = ref.size(), m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<Cost> cost((n + 1) * w);
  enum Move : unsigned char { kMatch, kSub, kDel, kIns };
  std::vector<unsigned char> move((n + 1) * w, kMatch);

  for (std::size_t i = 1; i <= n; ++i) {
    cost[i * w] = {i, 0, 0};
    move[i * w] = kDel;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    cost[j] = {j, 0, j};
    move[j] = kIns;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      const Cost& d = cost[(i - 1) * w + (j - 1)];
      Cost best = same ? d : Cost{std::get<0>(d) + 1, std::get<1>(d) + 1, std::get<2>(d)};
      unsigned char best_move = same ? kMatch : kSub;
      const Cost& up = cost[(i - 1) * w + j];
      const Cost del{std::get<0>(up) + 1, std::get<1>(up), std::get<2>(up)};
      if (del < best) {
        best = del;
        best_move = kDel;
      }
      const Cost& left = cost[i * w + (j - 1)];
      const Cost ins{std::get<0>(left) + 1, std::get<1>(left), std::get<2>(left) + 1};
      if (ins < best) {
        best = ins;
        best_move = kIns;
      }
      cost[i * w + j] = best;
      move[i * w + j] = best_move;
    }
  }

  Alignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (move[i * w + j]) {
      case kMatch:
      case kSub:
        if (move[i * w + j] == kSub) ++a.substitutions;
        a.pairs.push_back({i - 1, j - 1});
        --i;
        --j;
        break;
      case kDel:
        ++a.deletions;
        a.pairs.push_back({i - 1, std::nullopt});
        --i;
        break;
      case kIns:
        ++a.insertions;
        a.pairs.push_back({std::nullopt, j - 1});
        --j;
        break;
    }
  }
  std::reverse(a.pairs.begin(), a.pairs.end());
  return a;
}

template <typename Token>
Alignment edit_alignment(const std::vector<Token>& ref, const std::vector<Token>& hyp) {
  return edit_alignment(std::span<const Token>(ref), std::span<const Token>(hyp));
}

enum class Granularity { kCharacter, kWord, kLine };

inline const char* granularity_name(Granularity g) {
  switch (g) {
    case Granularity::kCharacter: return "character";
    case Granularity::kWord: return "word";
    case Granularity::kLine: return "line";
  }
  return "?";
}

/// Splits a transcription into tokens of the requested granularity. Words
/// are maximal runs of non-space symbols.
inline std::vector<std::string> tokenize(const Charset& charset, std::string_view text, Granularity g) {
  if (g == Granularity::kLine) return {std::string(text)};
  std::vector<std::string> symbols = charset.tokenize(text);
  if (g == Granularity::kCharacter) return symbols;
  std::vector<std::string> words;
  std::string current;
  for (const auto& s : symbols) {
    if (s == kSpaceSymbol) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += s;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

struct ErrorCounts {
  std::size_t n = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  double correctness() const {
    return n == 0 ? 1.0 : static_cast<double>(n - substitutions - deletions) / static_cast<double>(n);
  }
  double accuracy() const {
    if (n == 0) return insertions == 0 ? 1.0 : 0.0;
    return (static_cast<double>(n) - static_cast<double>(substitutions + deletions + insertions)) /
           static_cast<double>(n);
  }
  std::size_t errors() const { return substitutions + deletions + insertions; }

  void add(const Alignment& a, std::size_t ref_len) {
    n += ref_len;
    substitutions += a.substitutions;
    deletions += a.deletions;
    insertions += a.insertions;
  }
};

struct UtteranceScore {
  std::string id;
  ErrorCounts characters;
  ErrorCounts words;
  bool line_correct = false;
};

struct EvalReport {
  ErrorCounts characters;
  ErrorCounts words;
  ErrorCounts lines;
  std::size_t utterances = 0;
  std::size_t lines_correct = 0;
  std::vector<UtteranceScore> per_utterance;

  /// Fraction of utterances recognized without any character error.
  double lrr() const { return utterances == 0 ? 0.0 : static_cast<double>(lines_correct) / utterances; }
  double crr() const { return characters.accuracy(); }
  double wrr() const { return words.accuracy(); }
  double cer() const { return 1.0 - characters.accuracy(); }
  double wer() const { return 1.0 - words.accuracy(); }

  const ErrorCounts& counts(Granularity g) const {
    return g == Granularity::kCharacter ? characters : g == Granularity::kWord ? words : lines;
  }
};

struct ScoredPair {
  std::string id;
  std::string reference;
  std::string hypothesis;
};

/// Sums alignment counts over utterances at character, word and line
/// granularity. Hypotheses containing symbols outside the charset are
/// tokenized by code point.
inline EvalReport score_corpus(std::span<const ScoredPair> results, const Charset& charset) {
  if (results.empty()) throw DomainError("score_corpus: no utterances to score");
  auto tokens = [&](const std::string& text, Granularity g) {
    try {
      return tokenize(charset, text, g);
    } catch (const DataError&) {
      return g == Granularity::kCharacter ? utf8_split(text) : std::vector<std::string>{text};
    }
  };
  EvalReport report;
  for (const auto& r : results) {
    UtteranceScore u;
    u.id = r.id;
    const auto rc = tokens(r.reference, Granularity::kCharacter);
    const auto hc = tokens(r.hypothesis, Granularity::kCharacter);
    u.characters.add(edit_alignment(rc, hc), rc.size());
    const auto rw = tokens(r.reference, Granularity::kWord);
    const auto hw = tokens(r.hypothesis, Granularity::kWord);
    u.words.add(edit_alignment(rw, hw), rw.size());
    u.line_correct = u.characters.errors() == 0;

    report.characters.n += u.characters.n;
    report.characters.substitutions += u.characters.substitutions;
    report.characters.deletions += u.characters.deletions;
    report.characters.insertions += u.characters.insertions;
    report.words.n += u.words.n;
    report.words.substitutions += u.words.substitutions;
    report.words.deletions += u.words.deletions;
    report.words.insertions += u.words.insertions;
    report.lines.n += 1;
    if (!u.line_correct) report.lines.substitutions += 1;
    report.lines_correct += u.line_correct ? 1 : 0;
    ++report.utterances;
    report.per_utterance.push_back(std::move(u));
  }
  return report;
}

/// Machine-readable report. Top-level keys (character granularity):
/// N, S, D, I, correctness, accuracy, lrr; plus "word" and "line" objects
/// with N, S, D, I, correctness, accuracy, and "utterances".
inline nlohmann::ordered_json report_json(const EvalReport& report) {
  auto counts = [](const ErrorCounts& c) {
    nlohmann::ordered_json j;
    j["N"] = c.n;
    j["S"] = c.substitutions;
    j["D"] = c.deletions;
    j["I"] = c.insertions;
    j["correctness"] = c.correctness();
    j["accuracy"] = c.accuracy();
    return j;
  };
  nlohmann::ordered_json j = counts(report.characters);
  j["lrr"] = report.lrr();
  j["utterances"] = report.utterances;
  j["lines_correct"] = report.lines_correct;
  j["word"] = counts(report.words);
  j["line"] = counts(report.lines);
  return j;
}

inline std::string report_text(const EvalReport& report) {
  std::string out;
  char buf[160];
  out += "------------------------------ Overall Results -------------------------------\n";
  std::snprintf(buf, sizeof buf, "LINE: %%Correct=%.2f [H=%zu, S=%zu, N=%zu]\n", 100.0 * report.lrr(),
                report.lines_correct, report.utterances - report.lines_correct, report.utterances);
  out += buf;
  auto row = [&](const char* tag, const ErrorCounts& c) {
    std::snprintf(buf, sizeof buf, "%s: %%Corr=%.2f, Acc=%.2f [H=%zu, D=%zu, S=%zu, I=%zu, N=%zu]\n", tag,
                  100.0 * c.correctness(), 100.0 * c.accuracy(), c.n - c.substitutions - c.deletions, c.deletions,
                  c.substitutions, c.insertions, c.n);
    out += buf;
  };
  row("CHAR", report.characters);
  row("WORD", report.words);
  std::snprintf(buf, sizeof buf, "CRR=%.2f%%  LRR=%.2f%%  CER=%.2f%%  WER=%.2f%%\n", 100.0 * report.crr(),
                100.0 * report.lrr(), 100.0 * report.cer(), 100.0 * report.wer());
  out += buf;
  out += "==============================================================================\n";
  return out;
}

}  // namespace scriptline
