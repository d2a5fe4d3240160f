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

#ifndef PNGBERT_CORPUS_FRAMES_H_
#define PNGBERT_CORPUS_FRAMES_H_

// Synthetic acoustic frames. Each phoneme becomes a run of identical
// 10-dim frames: an 8-dim unit vector naming the phoneme, f0 from its tone
// and a constant energy of 1.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/nn/tensor.h"

namespace pngbert::corpus {

inline constexpr int kEmbeddingDim = 8;
inline constexpr int kFrameDim = kEmbeddingDim + 2;
inline constexpr int kF0Column = kEmbeddingDim;
inline constexpr int kEnergyColumn = kEmbeddingDim + 1;

struct PhonemeEmbedding {
  std::vector<std::string> symbols;
  std::vector<std::array<double, kEmbeddingDim>> vectors;

  int index_of(const std::string& symbol) const;  // -1 if absent
  double min_pairwise_distance() const;
};

// Rejection-samples unit vectors until every pair is at least min_distance
// apart. Throws ConfigError if that is not reachable.
PhonemeEmbedding make_phoneme_embedding(const std::vector<std::string>& symbols, std::uint64_t seed,
                                        double min_distance = 0.9);

void write_embedding(const std::filesystem::path& path, const PhonemeEmbedding& embedding);
PhonemeEmbedding read_embedding(const std::filesystem::path& path);

double tone_f0(Tone tone);

inline int phoneme_duration(std::size_t index) { return 2 + static_cast<int>(index % 3); }

struct Frames {
  nn::Tensor values;             // [frames x kFrameDim]
  std::vector<double> stop;      // 1 on the last frame only
  std::vector<int> phoneme_of;   // source phoneme index per frame
};

// Throws DataError on a phoneme missing from the embedding.
Frames render_frames(const Sentence& sentence, const PhonemeEmbedding& embedding);

}  // namespace pngbert::corpus

#endif  // PNGBERT_CORPUS_FRAMES_H_
