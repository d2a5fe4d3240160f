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

#ifndef PNGBERT_DOWNSTREAM_DECODER_H_
#define PNGBERT_DOWNSTREAM_DECODER_H_

// Autoregressive acoustic decoder: pre-net bottleneck, two LSTM layers and
// forward attention with additive energies over an encoder memory.

#include <cstdint>
#include <string>
#include <vector>

#include "pngbert/common/rng.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/ops.h"

namespace pngbert::downstream {

inline const std::string kDecoderPrefix = "decoder/";

struct DecoderConfig {
  int memory_dim = 64;
  int prenet_dim = 32;
  int hidden = 64;
  int attention_dim = 32;
  int frame_dim = corpus::kFrameDim;
  double prenet_dropout = 0.5;
  bool prenet_dropout_at_inference = true;
  int max_steps_per_token = 10;

  void validate() const;
};

void init_decoder(const DecoderConfig& config, nn::ParameterStore& params, std::uint64_t seed);

// Ragged encoder output: rows [offsets[u], offsets[u+1]) belong to utterance u.
struct Memory {
  nn::Var features;
  std::vector<std::size_t> offsets;

  std::size_t utterances() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t length(std::size_t u) const { return offsets[u + 1] - offsets[u]; }
};

struct TeacherForcedOutput {
  // Rows ordered step-major: row t * B + u.
  nn::Var frames;       // (T*B) x frame_dim
  nn::Var stop_logits;  // (T*B) x 1
  std::size_t steps = 0;
  std::vector<nn::Tensor> alignments;  // per step, B x max_len
};

// Reference frames are fed back one step late; reference[u] has
// frame_count(u) rows.
TeacherForcedOutput decode_teacher_forced(nn::Graph& g, nn::ParameterStore& params, const DecoderConfig& config,
                                          const Memory& memory, const std::vector<const nn::Tensor*>& reference,
                                          bool training, Rng& rng);

struct Utterance {
  nn::Tensor frames;     // steps x frame_dim
  std::vector<double> stop_probs;
  nn::Tensor alignment;  // steps x memory length
  int stop_step = -1;    // first step with stop prob > 0.5, -1 if none
  bool hit_max_steps = false;
};

// Free-running synthesis for every utterance in the memory, each stopping
// independently when its stop probability exceeds 0.5 or at
// max_steps_per_token x its memory length.
std::vector<Utterance> decode_free_running(nn::Graph& g, nn::ParameterStore& params, const DecoderConfig& config,
                                           const Memory& memory, Rng& rng);

struct TtsTargets {
  nn::Tensor frames;                 // (T*B) x frame_dim, step-major
  std::vector<double> stop;          // T*B
  std::vector<unsigned char> valid;  // T*B
};

TtsTargets tts_targets(const std::vector<const nn::Tensor*>& reference);

// Mean squared frame error over valid rows plus stop binary cross-entropy.
nn::Var tts_loss(const TeacherForcedOutput& out, const TtsTargets& targets);

}  // namespace pngbert::downstream

#endif  // PNGBERT_DOWNSTREAM_DECODER_H_
