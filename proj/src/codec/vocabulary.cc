// Copyright (c) 2026 The pngbert-ja Authors
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

#include "pngbert/codec/vocabulary.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "pngbert/common/errors.h"
#include "pngbert/common/hash.h"

namespace pngbert::codec {

namespace {

constexpr const char* kSpecialNames[kSpecialCount] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]"};

std::string prefix(Segment s) { return s == Segment::kPhoneme ? "p:" : "g:"; }

std::vector<std::string> sorted_unique(std::vector<std::string> symbols, const char* what) {
  std::sort(symbols.begin(), symbols.end());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i].empty()) throw DataError(std::string("empty ") + what + " symbol");
    if (i > 0 && symbols[i] == symbols[i - 1]) throw DataError(std::string("duplicate ") + what + " symbol '" + symbols[i] + "'");
  }
  return symbols;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> phonemes, std::vector<std::string> graphemes) {
  if (phonemes.empty() || graphemes.empty()) throw DataError("vocabulary needs phonemes and graphemes");
  phonemes = sorted_unique(std::move(phonemes), "phoneme");
  graphemes = sorted_unique(std::move(graphemes), "grapheme");
  names_.assign(std::begin(kSpecialNames), std::end(kSpecialNames));
  for (const auto& p : phonemes) names_.push_back(prefix(Segment::kPhoneme) + p);
  grapheme_begin_ = static_cast<int>(names_.size());
  for (const auto& g : graphemes) names_.push_back(prefix(Segment::kGrapheme) + g);
  for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<int>(i);
}

std::string Vocabulary::symbol(int id) const {
  const std::string& n = name(id);
  return id < kSpecialCount ? n : n.substr(2);
}

std::optional<int> Vocabulary::find(Segment segment, const std::string& symbol) const {
  auto it = index_.find(prefix(segment) + symbol);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(Segment segment, const std::string& symbol) const {
  auto v = find(segment, symbol);
  if (!v) {
    throw DataError(std::string(segment == Segment::kPhoneme ? "phoneme" : "grapheme") + " '" + symbol +
                    "' is not in the vocabulary");
  }
  return *v;
}

std::string Vocabulary::hash() const {
  std::string text;
  for (const auto& n : names_) text += n + "\n";
  return sha256_hex(text);
}

Vocabulary build_vocabulary(const corpus::Lexicon& lexicon) {
  return Vocabulary(lexicon.phoneme_inventory, lexicon.grapheme_inventory);
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& n : vocab.names()) out << n << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < kSpecialCount) throw DataError(path.string() + ": too few entries for a vocabulary");
  for (int i = 0; i < kSpecialCount; ++i) {
    if (lines[i] != kSpecialNames[i]) {
      throw DataError(path.string() + ": line " + std::to_string(i + 1) + " must be " + kSpecialNames[i]);
    }
  }
  std::vector<std::string> phonemes, graphemes;
  for (std::size_t i = kSpecialCount; i < lines.size(); ++i) {
    const std::string& l = lines[i];
    if (l.rfind("p:", 0) == 0 && graphemes.empty()) {
      phonemes.push_back(l.substr(2));
    } else if (l.rfind("g:", 0) == 0) {
      graphemes.push_back(l.substr(2));
    } else {
      throw DataError(path.string() + ": line " + std::to_string(i + 1) + ": unexpected entry '" + l + "'");
    }
  }
  Vocabulary v(phonemes, graphemes);
  if (v.names() != lines) throw DataError(path.string() + ": entries are not in canonical order");
  return v;
}

}  // namespace pngbert::codec
