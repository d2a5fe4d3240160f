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

#include "pngbert/corpus/frames.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pngbert/common/errors.h"
#include "pngbert/common/rng.h"

namespace pngbert::corpus {

namespace {

double distance(const std::array<double, kEmbeddingDim>& a, const std::array<double, kEmbeddingDim>& b) {
  double s = 0.0;
  for (int i = 0; i < kEmbeddingDim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

int PhonemeEmbedding::index_of(const std::string& symbol) const {
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] == symbol) return static_cast<int>(i);
  }
  return -1;
}

double PhonemeEmbedding::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) best = std::min(best, distance(vectors[i], vectors[j]));
  }
  return best;
}

PhonemeEmbedding make_phoneme_embedding(const std::vector<std::string>& symbols, std::uint64_t seed,
                                        double min_distance) {
  PhonemeEmbedding emb;
  emb.symbols = symbols;
  Rng rng = make_rng(seed, {0xf4a3e5ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kMaxTries = 100000;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    int tries = 0;
    for (;;) {
      if (++tries > kMaxTries) {
        throw ConfigError("cannot place " + std::to_string(symbols.size()) + " phoneme embeddings " +
                          std::to_string(min_distance) + " apart");
      }
      std::array<double, kEmbeddingDim> v;
      double norm = 0.0;
      for (double& x : v) {
        x = normal(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
      bool ok = true;
      for (const auto& u : emb.vectors) ok = ok && distance(u, v) >= min_distance;
      if (ok) {
        emb.vectors.push_back(v);
        break;
      }
    }
  }
  return emb;
}

void write_embedding(const std::filesystem::path& path, const PhonemeEmbedding& embedding) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < embedding.symbols.size(); ++i) {
    out << embedding.symbols[i];
    for (double x : embedding.vectors[i]) out << '\t' << x;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

PhonemeEmbedding read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  PhonemeEmbedding emb;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string symbol;
    std::getline(ss, symbol, '\t');
    std::array<double, kEmbeddingDim> v;
    for (double& x : v) {
      if (!(ss >> x)) throw DataError(path.string() + ": line " + std::to_string(n) + ": expected 8 values");
    }
    emb.symbols.push_back(symbol);
    emb.vectors.push_back(v);
  }
  return emb;
}

double tone_f0(Tone tone) {
  switch (tone) {
    case Tone::kPhraseStartLow: return 0.2;
    case Tone::kLow: return 0.3;
    case Tone::kHigh: return 0.8;
    case Tone::kAccent: return 1.0;
    case Tone::kPhraseEndLow: return 0.1;
  }
  throw std::invalid_argument("bad tone");
}

Frames render_frames(const Sentence& sentence, const PhonemeEmbedding& embedding) {
  const auto phonemes = sentence.phonemes();
  const auto tones = sentence.tones();
  if (phonemes.empty()) throw DataError("render_frames: sentence has no phonemes");
  if (tones.size() != phonemes.size()) throw DataError("render_frames: tones not aligned to phonemes");
  std::size_t total = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) total += static_cast<std::size_t>(phoneme_duration(i));
  Frames f;
  f.values = nn::Tensor::zeros(total, kFrameDim);
  f.stop.assign(total, 0.0);
  std::size_t t = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    const int id = embedding.index_of(phonemes[i]);
    if (id < 0) throw DataError("render_frames: unknown phoneme '" + phonemes[i] + "'");
    for (int k = 0; k < phoneme_duration(i); ++k, ++t) {
      for (int d = 0; d < kEmbeddingDim; ++d) f.values(t, d) = embedding.vectors[id][d];
      f.values(t, kF0Column) = tone_f0(tones[i]);
      f.values(t, kEnergyColumn) = 1.0;
      f.phoneme_of.push_back(static_cast<int>(i));
    }
  }
  f.stop.back() = 1.0;
  return f;
}

}  // namespace pngbert::corpus
