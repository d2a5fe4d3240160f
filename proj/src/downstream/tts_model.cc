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

#include "pngbert/downstream/tts_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pngbert/codec/masking.h"
#include "pngbert/common/errors.h"
#include "pngbert/nn/checkpoint.h"

namespace pngbert::downstream {

using nn::Tensor;
using nn::Var;
using nlohmann::json;

TtsExample make_tts_example(const corpus::Sentence& sentence, const codec::Vocabulary& vocab,
                            const corpus::PhonemeEmbedding& embedding, bool mask_graphemes) {
  TtsExample ex;
  ex.sequence = codec::assemble_sequence(sentence, vocab);
  const codec::Span span = codec::phoneme_span(ex.sequence);
  ex.phoneme_ids.assign(ex.sequence.ids.begin() + span.begin, ex.sequence.ids.begin() + span.end);
  if (mask_graphemes) ex.sequence = codec::mask_graphemes_for_inference(ex.sequence);
  for (corpus::Tone t : sentence.tones()) ex.tones.push_back(corpus::tone_index(t));
  ex.phonemes = sentence.phonemes();
  ex.frames = corpus::render_frames(sentence, embedding);
  return ex;
}

void TtsModelConfig::resolve(int vocab_size) {
  encoder.vocab_size = vocab_size;
  baseline.vocab_size = vocab_size;
  baseline.tone_input = preset.tone_input;
  decoder.memory_dim = preset.encoder == EncoderKind::kPngBert ? encoder.hidden : baseline.output_dim();
  encoder.validate();
  baseline.validate();
  decoder.validate();
}

void init_tts_model(const TtsModelConfig& config, nn::ParameterStore& params, std::uint64_t seed) {
  if (config.preset.encoder == EncoderKind::kPngBert) {
    encoder::init_encoder(config.encoder, params, seed);
  } else {
    init_baseline_encoder(config.baseline, params, seed);
  }
  init_decoder(config.decoder, params, seed);
  if (config.preset.tone_task) {
    Rng rng = make_rng(seed, {0x746f6e65ULL});
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(config.decoder.memory_dim)));
    Tensor w = Tensor::zeros(config.decoder.memory_dim, corpus::kToneCount);
    for (double& v : w.values()) v = n(rng);
    params.add(kToneHeadPrefix + "weight", std::move(w));
    params.add(kToneHeadPrefix + "bias", Tensor::zeros(1, corpus::kToneCount));
  }
}

Memory phoneme_features(nn::Graph& g, nn::ParameterStore& params, const TtsModelConfig& config,
                        const std::vector<const TtsExample*>& batch, bool training, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("phoneme_features: empty batch");
  Memory m;
  m.offsets.push_back(0);
  if (config.preset.encoder == EncoderKind::kPngBert) {
    std::vector<const codec::TokenSequence*> seqs;
    for (const TtsExample* ex : batch) seqs.push_back(&ex->sequence);
    const encoder::EncoderBatch packed = encoder::pack(seqs);
    const encoder::EncoderOutput out = encoder::encode(g, params, config.encoder, packed, training, rng);
    std::vector<int> rows;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const codec::Span span = codec::phoneme_span(batch[k]->sequence);
      for (std::size_t t = span.begin; t < span.end; ++t) rows.push_back(static_cast<int>(packed.offsets[k] + t));
      m.offsets.push_back(rows.size());
    }
    m.features = nn::gather_rows(out.final, rows);
  } else {
    std::vector<int> ids, tones;
    for (const TtsExample* ex : batch) {
      ids.insert(ids.end(), ex->phoneme_ids.begin(), ex->phoneme_ids.end());
      if (config.preset.tone_input) tones.insert(tones.end(), ex->tones.begin(), ex->tones.end());
      m.offsets.push_back(ids.size());
    }
    m.features = baseline_encode(g, params, config.baseline, ids, tones, m.offsets);
  }
  return m;
}

Var tone_logits(nn::Graph& g, nn::ParameterStore& params, Var features) {
  return nn::linear(features, g.param(params.at(kToneHeadPrefix + "weight")),
                    g.param(params.at(kToneHeadPrefix + "bias")));
}

Var tone_loss(nn::Graph& g, nn::ParameterStore& params, Var features, const std::vector<int>& labels) {
  if (labels.size() != features.rows()) throw std::invalid_argument("tone_loss: one label per phoneme required");
  return nn::cross_entropy(tone_logits(g, params, features), labels,
                           std::vector<unsigned char>(labels.size(), 1));
}

std::vector<int> predict_tones(nn::Graph& g, nn::ParameterStore& params, Var features) {
  const Tensor& logits = tone_logits(g, params, features).value();
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void apply_freezing(nn::ParameterStore& params, const TtsModelConfig& config, int tuned_layers) {
  if (config.preset.encoder == EncoderKind::kPngBert) {
    encoder::freeze_encoder(params, config.encoder, tuned_layers);
  }
  params.set_trainable(kBaselinePrefix, true);
  params.set_trainable(kDecoderPrefix, true);
  params.set_trainable(kToneHeadPrefix, true);
}

void FinetuneConfig::validate() const {
  if (steps < 0) throw ConfigError("finetune: steps must be nonnegative");
  if (batch_size < 1) throw ConfigError("finetune: batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("finetune: lr must be positive");
  if (!(l2 >= 0.0) || !(tone_weight >= 0.0)) throw ConfigError("finetune: l2 and tone_weight must be nonnegative");
  if (eval_every < 1 || log_every < 1) throw ConfigError("finetune: eval_every and log_every must be positive");
}

namespace {

struct BatchLoss {
  Var total;
  double tts = 0.0;
  double tone = 0.0;
};

BatchLoss batch_loss(nn::Graph& g, nn::ParameterStore& params, const TtsModelConfig& config,
                     const std::vector<const TtsExample*>& batch, bool training, bool encoder_training,
                     double tone_weight, Rng& rng) {
  const Memory memory = phoneme_features(g, params, config, batch, encoder_training, rng);
  std::vector<const Tensor*> reference;
  for (const TtsExample* ex : batch) reference.push_back(&ex->frames.values);
  const TeacherForcedOutput out = decode_teacher_forced(g, params, config.decoder, memory, reference, training, rng);
  BatchLoss loss;
  loss.total = tts_loss(out, tts_targets(reference));
  loss.tts = loss.total.value()[0];
  if (config.preset.tone_task) {
    std::vector<int> labels;
    for (const TtsExample* ex : batch) labels.insert(labels.end(), ex->tones.begin(), ex->tones.end());
    Var tl = tone_loss(g, params, memory.features, labels);
    loss.tone = tl.value()[0];
    loss.total = nn::add(loss.total, nn::scale(tl, tone_weight));
  }
  return loss;
}

bool encoder_trainable(const nn::ParameterStore& params) {
  for (const auto& [name, p] : params) {
    if (name.rfind(encoder::kPrefix, 0) == 0 && p.trainable) return true;
  }
  return false;
}

void save(const std::filesystem::path& path, const nn::ParameterStore& params, const nn::OptimizerState& optimizer,
          const std::string& metadata, int step, double valid_loss) {
  json meta = metadata.empty() ? json::object() : json::parse(metadata);
  meta["kind"] = "tts";
  meta["step"] = step;
  meta["valid_loss"] = valid_loss;
  nn::Checkpoint ckpt;
  ckpt.metadata = meta.dump();
  nn::append_parameters(ckpt, params);
  nn::append_optimizer(ckpt, optimizer);
  nn::write_checkpoint(path, ckpt);
}

}  // namespace

double validation_loss(nn::ParameterStore& params, const TtsModelConfig& config,
                       const std::vector<TtsExample>& examples, double tone_weight, std::uint64_t seed,
                       std::size_t batch_size) {
  if (examples.empty()) throw std::invalid_argument("validation_loss: no examples");
  Rng rng = make_rng(seed, {0x76616c6964ULL});
  double total = 0.0;
  std::size_t weight = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const std::size_t end = std::min(examples.size(), begin + batch_size);
    std::vector<const TtsExample*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[i]);
    nn::Graph g(false);
    const BatchLoss loss = batch_loss(g, params, config, batch, false, false, tone_weight, rng);
    total += (loss.tts + tone_weight * loss.tone) * static_cast<double>(batch.size());
    weight += batch.size();
  }
  return total / static_cast<double>(weight);
}

FinetuneResult finetune(const TtsModelConfig& config, const FinetuneConfig& fc, nn::ParameterStore& params,
                        nn::OptimizerState& optimizer, const std::vector<TtsExample>& train,
                        const std::vector<TtsExample>& valid, const FinetuneIo& io) {
  fc.validate();
  if (train.empty()) throw DataError("finetune: empty training set");
  optimizer.config.l2_coefficient = fc.l2;
  optimizer.config.decoupled = false;
  if (!io.out_dir.empty()) std::filesystem::create_directories(io.out_dir);
  const std::vector<TtsExample> valid_subset(
      valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(std::min(valid.size(), fc.valid_limit)));

  const int encoder_layers = config.preset.encoder == EncoderKind::kPngBert ? config.encoder.layers : 0;
  const int tuned = config.preset.tuned_layer_count(encoder_layers);
  const int frozen_steps = static_cast<int>(std::lround(config.preset.frozen_warmup_fraction * fc.steps));

  FinetuneResult result;
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::uint64_t cached_epoch = ~0ULL;
  double window = 0.0;
  int window_count = 0, applied = -1;

  for (int step = static_cast<int>(optimizer.step); step < fc.steps; ++step) {
    const int want = step < frozen_steps ? 0 : tuned;
    if (want != applied) {
      apply_freezing(params, config, want);
      applied = want;
    }
    std::vector<const TtsExample*> batch;
    for (int b = 0; b < fc.batch_size; ++b) {
      const std::uint64_t global = static_cast<std::uint64_t>(step) * fc.batch_size + b;
      const std::uint64_t epoch = global / n;
      if (epoch != cached_epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(fc.seed, {0x6f72646572ULL, epoch});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cached_epoch = epoch;
      }
      batch.push_back(&train[order[global % n]]);
    }
    const double lr = nn::linear_decay_lr(step, fc.steps, fc.lr);
    double loss_value = 0.0;
    try {
      nn::Graph g;
      Rng rng = make_rng(fc.seed, {0x64726f70ULL, static_cast<std::uint64_t>(step)});
      const BatchLoss loss =
          batch_loss(g, params, config, batch, true, encoder_trainable(params), fc.tone_weight, rng);
      loss_value = loss.total.value()[0];
      params.zero_grad();
      g.backward(loss.total);
      nn::adam_step(params, optimizer, lr);
    } catch (const DivergenceError& e) {
      throw DivergenceError("fine-tuning diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.losses.push_back(loss_value);
    window += loss_value;
    ++window_count;

    const int done = step + 1;
    const bool eval_now = done % fc.eval_every == 0 || done == fc.steps;
    json line;
    if (done % fc.log_every == 0 || eval_now) {
      line = {{"step", done}, {"loss", window / window_count}, {"lr", lr}};
      window = 0.0;
      window_count = 0;
    }
    if (eval_now && !valid_subset.empty()) {
      const double vl = validation_loss(params, config, valid_subset, fc.tone_weight, fc.seed);
      line["valid_loss"] = vl;
      const bool improved = result.best_step < 0 || vl < result.best_valid_loss;
      if (improved) {
        result.best_valid_loss = vl;
        result.best_step = done;
      }
      if (!io.out_dir.empty()) {
        save(io.out_dir / "last.ckpt", params, optimizer, io.metadata, done, vl);
        if (improved) save(io.out_dir / "best.ckpt", params, optimizer, io.metadata, done, vl);
      }
    }
    if (!line.is_null() && io.log) *io.log << line.dump() << '\n' << std::flush;
  }
  return result;
}

std::vector<Synthesis> synthesize(nn::ParameterStore& params, const TtsModelConfig& config,
                                  const std::vector<TtsExample>& examples, std::uint64_t seed,
                                  std::size_t batch_size) {
  std::vector<Synthesis> out;
  out.reserve(examples.size());
  Rng rng = make_rng(seed, {0x73796e7468ULL});
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const std::size_t end = std::min(examples.size(), begin + batch_size);
    std::vector<const TtsExample*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[i]);
    nn::Graph g(false);
    const Memory memory = phoneme_features(g, params, config, batch, false, rng);
    std::vector<Utterance> utts = decode_free_running(g, params, config.decoder, memory, rng);
    std::vector<int> tones;
    if (config.preset.tone_task) tones = predict_tones(g, params, memory.features);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      Synthesis s;
      s.utterance = std::move(utts[k]);
      if (!tones.empty()) {
        s.predicted_tones.assign(tones.begin() + static_cast<std::ptrdiff_t>(memory.offsets[k]),
                                 tones.begin() + static_cast<std::ptrdiff_t>(memory.offsets[k + 1]));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<int> attention_path(const Tensor& alignment) {
  std::vector<int> path(alignment.rows());
  for (std::size_t r = 0; r < alignment.rows(); ++r) {
    auto row = alignment.row(r);
    path[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return path;
}

void write_synthesis_record(std::ostream& out, const SynthesisRecord& r) {
  json j = {{"sentence_id", r.sentence_id},
            {"stop_step", r.stop_step},
            {"attention_path", r.attention_path},
            {"decoded_phonemes", r.decoded_phonemes}};
  if (r.frames_path) j["frames_path"] = *r.frames_path;
  if (r.predicted_tones) j["predicted_tones"] = *r.predicted_tones;
  out << j.dump() << '\n';
}

}  // namespace pngbert::downstream
