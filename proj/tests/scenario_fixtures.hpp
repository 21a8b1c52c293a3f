// Copyright 2026 The Saturn Authors.
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

#pragma once

// Seeded synthetic sentiment data: documents mix a few polar words into
// neutral filler, so PPMI embeddings separate the two classes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace saturn::testing {

struct SyntheticDoc {
  int label = 0;
  std::string group;
  std::string text;
};

inline std::vector<SyntheticDoc> synthetic_docs(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> pos{"good",  "great", "excellent", "happy",  "love",
                                            "fine",  "nice",  "superb",    "bright", "win"};
  static const std::vector<std::string> neg{"bad",   "awful", "terrible", "sad",  "hate",
                                            "poor",  "ugly",  "dreadful", "dark", "lose"};
  static const std::vector<std::string> neutral{"the",   "a",      "movie", "plot",  "actor", "scene", "story",
                                                "film",  "was",    "is",    "and",   "with",  "it",    "this",
                                                "show",  "series", "cast",  "ended", "began", "felt"};
  std::mt19937_64 rng(seed);
  std::vector<SyntheticDoc> out;
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticDoc d;
    // Both groups get the same label mix, so a perfect model has dpd 0.
    d.label = static_cast<int>((i / 2) % 2);
    d.group = (i / 4) % 2 ? "a" : "b";
    const auto& polar = d.label ? pos : neg;
    std::vector<std::string> words;
    for (int k = 0; k < 3; ++k) words.push_back(polar[rng() % polar.size()]);
    for (int k = 0; k < 5; ++k) words.push_back(neutral[rng() % neutral.size()]);
    std::shuffle(words.begin(), words.end(), rng);
    for (std::size_t k = 0; k < words.size(); ++k) d.text += (k ? " " : "") + words[k];
    out.push_back(std::move(d));
  }
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string labeled_tsv(const std::vector<SyntheticDoc>& docs) {
  std::string s;
  for (const auto& d : docs) s += std::to_string(d.label) + "\t" + d.group + "\t" + d.text + "\n";
  return s;
}

inline std::string corpus_text(const std::vector<SyntheticDoc>& docs) {
  std::string s;
  for (const auto& d : docs) s += d.text + "\n";
  return s;
}

/// corpus.txt, train.tsv, heldout.tsv under dir.
inline void write_scenario_data(const std::filesystem::path& dir, std::uint64_t seed) {
  write_text(dir / "corpus.txt", corpus_text(synthetic_docs(600, seed)));
  write_text(dir / "train.tsv", labeled_tsv(synthetic_docs(200, seed + 1)));
  write_text(dir / "heldout.tsv", labeled_tsv(synthetic_docs(200, seed + 2)));
}

}  // namespace saturn::testing
