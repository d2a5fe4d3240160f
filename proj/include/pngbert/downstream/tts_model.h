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

#ifndef PNGBERT_DOWNSTREAM_TTS_MODEL_H_
#define PNGBERT_DOWNSTREAM_TTS_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pngbert/codec/sequence.h"
#include "pngbert/codec/vocabulary.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/downstream/baseline_encoder.h"
#include "pngbert/downstream/decoder.h"
#include "pngbert/downstream/presets.h"
#include "pngbert/encoder/encoder.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/optim.h"

namespace pngbert::downstream {

inline const std::string kToneHeadPrefix = "tone_head/";

struct TtsExample {
  codec::TokenSequence sequence;  // encoder input, graphemes already masked if required
  std::vector<int> phoneme_ids;   // vocabulary ids of the phoneme span
  std::vector<int> tones;         // tone class per phoneme
  std::vector<std::string> phonemes;
  corpus::Frames frames;
};

TtsExample make_tts_example(const corpus::Sentence& sentence, const codec::Vocabulary& vocab,
                            const corpus::PhonemeEmbedding& embedding, bool mask_graphemes);

struct TtsModelConfig {
  FinetunePreset preset;
  encoder::EncoderConfig encoder;
  BaselineConfig baseline;
  DecoderConfig decoder;

  // Fills the vocabulary-dependent and width-dependent fields and validates.
  void resolve(int vocab_size);
};

// Initializes every parameter the preset uses. Encoder weights start random;
// load a pretrained checkpoint over them afterwards.
void init_tts_model(const TtsModelConfig& config, nn::ParameterStore& params, std::uint64_t seed);

// Final-layer features over each example's phoneme span.
Memory phoneme_features(nn::Graph& g, nn::ParameterStore& params, const TtsModelConfig& config,
                        const std::vector<const TtsExample*>& batch, bool training, Rng& rng);

nn::Var tone_logits(nn::Graph& g, nn::ParameterStore& params, nn::Var features);
// Cross-entropy over the 5 tone classes; labels has one entry per feature row.
nn::Var tone_loss(nn::Graph& g, nn::ParameterStore& params, nn::Var features, const std::vector<int>& labels);
std::vector<int> predict_tones(nn::Graph& g, nn::ParameterStore& params, nn::Var features);

// Sets trainable flags for fine-tuning with `tuned_layers` encoder layers
// released; decoder, tone head and baseline encoder are always trainable.
void apply_freezing(nn::ParameterStore& params, const TtsModelConfig& config, int tuned_layers);

struct FinetuneConfig {
  int steps = 3000;
  int batch_size = 16;
  double lr = 1e-3;
  double l2 = 0.0;
  double tone_weight = 1.0;
  int eval_every = 500;
  int log_every = 100;
  std::size_t valid_limit = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FinetuneIo {
  std::filesystem::path out_dir;  // empty: no checkpoints
  std::string metadata;           // JSON object merged into checkpoint metadata
  std::ostream* log = nullptr;
};

struct FinetuneResult {
  std::vector<double> losses;
  double best_valid_loss = 0.0;
  int best_step = -1;
};

// Teacher-forced TTS loss (plus tone loss when enabled) over a set, with
// dropout drawn from a fixed stream.
double validation_loss(nn::ParameterStore& params, const TtsModelConfig& config,
                       const std::vector<TtsExample>& examples, double tone_weight, std::uint64_t seed,
                       std::size_t batch_size = 32);

FinetuneResult finetune(const TtsModelConfig& config, const FinetuneConfig& finetune, nn::ParameterStore& params,
                        nn::OptimizerState& optimizer, const std::vector<TtsExample>& train,
                        const std::vector<TtsExample>& valid, const FinetuneIo& io);

struct Synthesis {
  Utterance utterance;
  std::vector<int> predicted_tones;  // filled when the preset has a tone task
};

std::vector<Synthesis> synthesize(nn::ParameterStore& params, const TtsModelConfig& config,
                                  const std::vector<TtsExample>& examples, std::uint64_t seed,
                                  std::size_t batch_size = 32);

// Argmax encoder position per decoder step.
std::vector<int> attention_path(const nn::Tensor& alignment);

struct SynthesisRecord {
  std::size_t sentence_id = 0;
  std::optional<std::string> frames_path;
  int stop_step = -1;
  std::vector<int> attention_path;
  std::vector<std::string> decoded_phonemes;
  std::optional<std::vector<std::string>> predicted_tones;
};

// One JSON object per line.
void write_synthesis_record(std::ostream& out, const SynthesisRecord& record);

}  // namespace pngbert::downstream

#endif  // PNGBERT_DOWNSTREAM_TTS_MODEL_H_
