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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pngbert/common/errors.h"
#include "pngbert/common/hash.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/downstream/baseline_encoder.h"
#include "pngbert/downstream/decoder.h"
#include "pngbert/downstream/presets.h"
#include "pngbert/downstream/tts_model.h"
#include "pngbert/nn/grad_check.h"
#include "test_util.h"

namespace pngbert::downstream {
namespace {

using nn::Tensor;
using nn::Var;

struct Fixture {
  corpus::CorpusSpec spec;
  corpus::Lexicon lex;
  corpus::Dataset ds;
  codec::Vocabulary vocab;
  corpus::PhonemeEmbedding embedding;
  Fixture() {
    spec.seed = 9;
    spec.train_size = 60;
    spec.valid_size = 8;
    spec.test_size = 8;
    lex = corpus::build_lexicon(spec);
    ds = corpus::generate_dataset(lex, spec);
    vocab = codec::build_vocabulary(lex);
    embedding = corpus::make_phoneme_embedding(lex.phoneme_inventory, 9);
  }
  std::vector<TtsExample> examples(const std::vector<corpus::Sentence>& split, bool mask, std::size_t n) const {
    std::vector<TtsExample> out;
    for (std::size_t i = 0; i < std::min(n, split.size()); ++i) {
      out.push_back(make_tts_example(split[i], vocab, embedding, mask));
    }
    return out;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TtsModelConfig small_model(const std::string& preset) {
  TtsModelConfig c;
  c.preset = finetune_preset(preset);
  c.encoder.layers = 2;
  c.encoder.hidden = 8;
  c.encoder.heads = 2;
  c.encoder.dropout = 0.0;
  c.baseline.embedding_dim = 6;
  c.baseline.tone_dim = 3;
  c.baseline.channels = 6;
  c.baseline.lstm_hidden = 4;
  c.decoder.prenet_dim = 6;
  c.decoder.hidden = 6;
  c.decoder.attention_dim = 5;
  c.resolve(fixture().vocab.size());
  return c;
}

std::string encoder_digest(const nn::ParameterStore& params) {
  std::string bytes;
  for (const auto& [name, p] : params) {
    if (name.rfind(encoder::kPrefix, 0) != 0) continue;
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(double));
  }
  return sha256_hex(bytes);
}

TEST_CASE("presets match the system table") {
  const auto pgb0 = finetune_preset("PGB0");
  CHECK(pgb0.tuned_layers == 0);
  CHECK(pgb0.pretrained);
  CHECK(pgb0.encoder == EncoderKind::kPngBert);
  CHECK(finetune_preset("PGB2").tuned_layers == 2);
  CHECK(finetune_preset("PGB2").warm_start_from == "PGB0");
  CHECK(finetune_preset("PGB4").warm_start_from == "PGB2");
  CHECK(finetune_preset("PGB6").tuned_layer_count(4) == 4);
  CHECK(finetune_preset("PGB6").tuned_layer_count(12) == 6);
  const auto pgbn = finetune_preset("PGBN");
  CHECK_FALSE(pgbn.pretrained);
  CHECK(pgbn.tuned_layer_count(4) == 4);
  const auto pgb2t = finetune_preset("PGB2T");
  CHECK(pgb2t.tone_task);
  CHECK(pgb2t.tuned_layers == 2);
  const auto mc = finetune_preset("PGB2MC");
  CHECK(mc.grapheme_mask);
  CHECK(mc.warm_start_from == "PGB2");
  const auto pb = finetune_preset("PB2MC");
  CHECK(pb.grapheme_mask);
  CHECK(pb.phoneme_only_pretraining);
  CHECK(pb.frozen_warmup_fraction > 0.0);
  const auto tac = finetune_preset("TAC"), tact = finetune_preset("TACT");
  CHECK(tac.encoder == EncoderKind::kConvBiLstm);
  CHECK_FALSE(tac.pretrained);
  CHECK_FALSE(tac.tone_input);
  CHECK(tact.encoder == EncoderKind::kConvBiLstm);
  CHECK(tact.tone_input);
  CHECK(preset_names().size() == 10);
  CHECK_THROWS_AS(finetune_preset("PGB3"), ConfigError);
}

TEST_CASE("forward attention hand cases") {
  nn::Graph g(false);
  Var prev = g.constant(Tensor::matrix(1, 3, {1, 0, 0}));
  Var e = g.constant(Tensor::zeros(1, 3));
  const Tensor a = nn::forward_attention(prev, e, {3}).value();
  CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(a(0, 1) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(a(0, 2) == doctest::Approx(0.0).epsilon(1e-6));
  Var last = g.constant(Tensor::matrix(1, 3, {0, 0, 1}));
  const Tensor b = nn::forward_attention(last, e, {3}).value();
  CHECK(b(0, 2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("teacher forced decoding matches the reference length") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("PGB2");
  nn::ParameterStore params;
  init_tts_model(c, params, 1);
  const auto ex = f.examples(f.ds.train, false, 3);
  std::vector<const TtsExample*> batch = {&ex[0], &ex[1], &ex[2]};
  nn::Graph g;
  Rng rng(1);
  const Memory memory = phoneme_features(g, params, c, batch, false, rng);
  CHECK(memory.utterances() == 3);
  for (std::size_t u = 0; u < 3; ++u) CHECK(memory.length(u) == ex[u].phoneme_ids.size());
  std::vector<const Tensor*> ref;
  std::size_t longest = 0;
  for (const auto* e : batch) {
    ref.push_back(&e->frames.values);
    longest = std::max(longest, e->frames.values.rows());
  }
  const auto out = decode_teacher_forced(g, params, c.decoder, memory, ref, true, rng);
  CHECK(out.steps == longest);
  CHECK(out.frames.rows() == longest * 3);
  CHECK(out.frames.cols() == static_cast<std::size_t>(corpus::kFrameDim));
  CHECK(out.stop_logits.rows() == longest * 3);
  for (const Tensor& alpha : out.alignments) {
    for (std::size_t u = 0; u < 3; ++u) {
      double total = 0.0;
      for (std::size_t n = 0; n < alpha.cols(); ++n) {
        CHECK(alpha(u, n) >= 0.0);
        if (n >= memory.length(u)) CHECK(alpha(u, n) == 0.0);
        total += alpha(u, n);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("untrained free-running decoding stops at the step cap") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("PGB0");
  nn::ParameterStore params;
  init_tts_model(c, params, 2);
  const auto ex = f.examples(f.ds.valid, false, 4);
  const auto synth = synthesize(params, c, ex, 3);
  REQUIRE(synth.size() == 4);
  for (std::size_t u = 0; u < 4; ++u) {
    const auto& utt = synth[u].utterance;
    CHECK(utt.hit_max_steps);
    CHECK(utt.stop_step == -1);
    CHECK(utt.frames.rows() == 10 * ex[u].phoneme_ids.size());
    CHECK(utt.alignment.rows() == utt.frames.rows());
    CHECK(utt.alignment.cols() == ex[u].phoneme_ids.size());
    CHECK(attention_path(utt.alignment).front() <= 1);
  }
}

TEST_CASE("forward attention never advances more than one position per step") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("PGB0");
  nn::ParameterStore params;
  init_tts_model(c, params, 4);
  const auto synth = synthesize(params, c, f.examples(f.ds.valid, false, 4), 3);
  for (const auto& s : synth) {
    const Tensor& a = s.utterance.alignment;
    std::size_t support = 1;  // alpha starts one-hot on position 0
    for (std::size_t t = 0; t < a.rows(); ++t) {
      std::size_t reach = 0;
      for (std::size_t n = 0; n < a.cols(); ++n) {
        if (a(t, n) > 1e-6) reach = n + 1;
      }
      CHECK(reach <= support + 1);
      support = std::max(support, reach);
    }
  }
}

TEST_CASE("tts loss vanishes on a perfect prediction and grows with frame error") {
  nn::Graph g;
  const Tensor ref_a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor ref_b = Tensor::matrix(1, 2, {5, 6});
  const TtsTargets t = tts_targets({&ref_a, &ref_b});
  CHECK(t.valid == std::vector<unsigned char>{1, 1, 1, 0});
  CHECK(t.stop == std::vector<double>{0, 1, 1, 0});
  Tensor stops = Tensor::zeros(4, 1);
  for (std::size_t r = 0; r < 4; ++r) stops(r, 0) = t.stop[r] > 0.5 ? 40.0 : -40.0;
  auto loss_at = [&](double error) {
    Tensor frames = t.frames;
    frames(0, 0) += error;
    TeacherForcedOutput out;
    out.frames = g.constant(frames);
    out.stop_logits = g.constant(stops);
    out.steps = 2;
    return tts_loss(out, t).value()[0];
  };
  CHECK(loss_at(0.0) == doctest::Approx(0.0).epsilon(1e-12));
  double previous = loss_at(0.0);
  for (double e : {0.1, 0.5, 1.0, 2.0}) {
    const double l = loss_at(e);
    CHECK(l > previous);
    previous = l;
  }
}

TEST_CASE("tone loss and prediction") {
  nn::ParameterStore params;
  params.add(kToneHeadPrefix + "weight", Tensor::zeros(5, 5));
  params.add(kToneHeadPrefix + "bias", Tensor::zeros(1, 5));
  nn::Graph g;
  Var features = g.constant(Tensor::identity(5));
  CHECK(tone_loss(g, params, features, {0, 1, 2, 3, 4}).value()[0] == doctest::Approx(std::log(5.0)));
  params.at(kToneHeadPrefix + "weight").value = Tensor::identity(5);
  CHECK(predict_tones(g, params, features) == std::vector<int>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(tone_loss(g, params, features, {0, 1}), std::invalid_argument);
}

TEST_CASE("decoder and tone head pass the gradient check") {
  const auto& f = fixture();
  TtsModelConfig c = small_model("PGB2T");
  c.decoder.prenet_dropout_at_inference = false;
  nn::ParameterStore params;
  init_tts_model(c, params, 5);
  apply_freezing(params, c, 2);
  // The go frame is all zeros, so zero pre-net biases would sit exactly on
  // the ReLU kink where finite differences are meaningless.
  Rng noise(2);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (double& v : params.at(kDecoderPrefix + "prenet.b1").value.values()) v = jitter(noise);
  for (double& v : params.at(kDecoderPrefix + "prenet.b2").value.values()) v = jitter(noise);
  auto ex = f.examples(f.ds.train, false, 2);
  for (auto& e : ex) {
    const auto head = e.frames.values.values().subspan(0, 5 * corpus::kFrameDim);
    e.frames.values = Tensor({5, static_cast<std::size_t>(corpus::kFrameDim)}, {head.begin(), head.end()});
  }
  const auto result = nn::grad_check_params(
      [&](nn::Graph& g) {
        Rng rng(0);
        std::vector<const TtsExample*> batch = {&ex[0], &ex[1]};
        const Memory memory = phoneme_features(g, params, c, batch, false, rng);
        std::vector<const Tensor*> ref = {&ex[0].frames.values, &ex[1].frames.values};
        const auto out = decode_teacher_forced(g, params, c.decoder, memory, ref, false, rng);
        std::vector<int> labels;
        for (const auto* e : batch) labels.insert(labels.end(), e->tones.begin(), e->tones.end());
        return nn::add(tts_loss(out, tts_targets(ref)), tone_loss(g, params, memory.features, labels));
      },
      params, 1e-5, 12);
  CHECK(result.checked > 0);
  INFO("worst parameter " << result.input << " element " << result.element);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("baseline encoder keeps length and passes the gradient check") {
  const auto& f = fixture();
  for (const char* name : {"TAC", "TACT"}) {
    const TtsModelConfig c = small_model(name);
    nn::ParameterStore params;
    init_baseline_encoder(c.baseline, params, 3);
    CHECK(params.contains(kBaselinePrefix + "tone_embedding") == c.preset.tone_input);
    const auto ex = f.examples(f.ds.train, false, 3);
    std::vector<int> ids, tones;
    std::vector<std::size_t> offsets = {0};
    for (const auto& e : ex) {
      ids.insert(ids.end(), e.phoneme_ids.begin(), e.phoneme_ids.end());
      tones.insert(tones.end(), e.tones.begin(), e.tones.end());
      offsets.push_back(ids.size());
    }
    if (!c.preset.tone_input) tones.clear();
    {
      nn::Graph g(false);
      const Var out = baseline_encode(g, params, c.baseline, ids, tones, offsets);
      CHECK(out.rows() == ids.size());
      CHECK(out.cols() == static_cast<std::size_t>(c.baseline.output_dim()));
    }
    const auto result = nn::grad_check_params(
        [&](nn::Graph& g) { return testing::project(baseline_encode(g, params, c.baseline, ids, tones, offsets)); },
        params, 1e-5, 12);
    CHECK(result.max_rel_error <= 1e-4);
  }
}

TEST_CASE("reverse LSTM reads each sequence from its own end") {
  Rng rng(3);
  nn::Graph g(false);
  const Tensor x = testing::random_tensor(5, 3, rng);
  const Var wx = g.constant(testing::random_tensor(3, 8, rng)), wh = g.constant(testing::random_tensor(2, 8, rng)),
            b = g.constant(Tensor::zeros(1, 8));
  const Tensor packed =
      lstm_over_sequences(g, g.constant(x), {0, 2, 5}, wx, wh, b, true).value();
  // The second sequence alone, reversed by hand and run forward.
  Tensor rev = Tensor::zeros(3, 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) rev(r, c) = x(4 - r, c);
  }
  const Tensor alone = lstm_over_sequences(g, g.constant(rev), {0, 3}, wx, wh, b, false).value();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(packed(2 + r, c) == doctest::Approx(alone(2 - r, c)).epsilon(1e-12));
  }
}

TEST_CASE("PGB0 leaves the encoder bit-identical") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("PGB0");
  nn::ParameterStore params;
  nn::OptimizerState opt;
  init_tts_model(c, params, 6);
  const std::string before = encoder_digest(params);
  const Tensor decoder_before = params.at(kDecoderPrefix + "frame.weight").value;
  FinetuneConfig fc;
  fc.steps = 3;
  fc.batch_size = 4;
  fc.eval_every = 3;
  const auto result = finetune(c, fc, params, opt, f.examples(f.ds.train, false, 8), f.examples(f.ds.valid, false, 4), {});
  CHECK(result.losses.size() == 3);
  CHECK(encoder_digest(params) == before);
  CHECK_FALSE(params.at(kDecoderPrefix + "frame.weight").value == decoder_before);
}

TEST_CASE("PGB2 tunes only the top two layers") {
  const auto& f = fixture();
  TtsModelConfig c = small_model("PGB2");
  c.encoder.layers = 3;
  c.resolve(f.vocab.size());
  nn::ParameterStore params;
  nn::OptimizerState opt;
  init_tts_model(c, params, 7);
  const Tensor bottom = params.at(encoder::layer_prefix(0) + "ffn.w1").value;
  const Tensor top = params.at(encoder::layer_prefix(2) + "ffn.w1").value;
  const Tensor emb = params.at(encoder::kPrefix + "token_embedding").value;
  FinetuneConfig fc;
  fc.steps = 2;
  fc.batch_size = 4;
  finetune(c, fc, params, opt, f.examples(f.ds.train, false, 8), {}, {});
  CHECK(params.at(encoder::layer_prefix(0) + "ffn.w1").value == bottom);
  CHECK(params.at(encoder::kPrefix + "token_embedding").value == emb);
  CHECK_FALSE(params.at(encoder::layer_prefix(2) + "ffn.w1").value == top);
}

TEST_CASE("PB2MC releases its layers only after the frozen phase") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("PB2MC");
  nn::ParameterStore params;
  nn::OptimizerState opt;
  init_tts_model(c, params, 8);
  const auto train = f.examples(f.ds.train, true, 8);
  for (const auto& e : train) {
    const codec::Span g = codec::grapheme_span(e.sequence);
    for (std::size_t t = g.begin; t < g.end; ++t) CHECK(e.sequence.ids[t] == codec::kMask);
  }
  const std::string before = encoder_digest(params);
  FinetuneConfig fc;
  fc.steps = 1;
  fc.batch_size = 4;
  finetune(c, fc, params, opt, train, {}, {});
  CHECK(encoder_digest(params) == before);
  fc.steps = 4;
  finetune(c, fc, params, opt, train, {}, {});
  CHECK(encoder_digest(params) != before);
}

TEST_CASE("tone task off adds no tone gradient") {
  const auto& f = fixture();
  const auto ex = f.examples(f.ds.train, false, 4);
  auto grads = [&](const std::string& preset, double weight) {
    TtsModelConfig c = small_model(preset);
    nn::ParameterStore params;
    init_tts_model(c, params, 10);
    apply_freezing(params, c, 2);
    nn::OptimizerState opt;
    FinetuneConfig fc;
    fc.steps = 1;
    fc.batch_size = 4;
    fc.tone_weight = weight;
    finetune(c, fc, params, opt, ex, {}, {});
    return params.at(kDecoderPrefix + "frame.weight").value;
  };
  // Without a tone task, the weight is never read.
  CHECK(grads("PGB2", 0.0) == grads("PGB2", 5.0));
  // With the tone task, a zero weight reduces to the plain TTS update.
  CHECK(grads("PGB2T", 0.0) == grads("PGB2", 0.0));
}

TEST_CASE("finetuning is deterministic and writes checkpoints") {
  const auto& f = fixture();
  const TtsModelConfig c = small_model("TACT");
  testing::TempDir dir;
  auto run = [&](const std::filesystem::path& out) {
    nn::ParameterStore params;
    nn::OptimizerState opt;
    init_tts_model(c, params, 11);
    FinetuneConfig fc;
    fc.steps = 3;
    fc.batch_size = 4;
    fc.eval_every = 3;
    FinetuneIo io;
    io.out_dir = out;
    return finetune(c, fc, params, opt, f.examples(f.ds.train, false, 8), f.examples(f.ds.valid, false, 4), io);
  };
  const auto a = run(dir / "a"), b = run(dir / "b");
  CHECK(a.losses == b.losses);
  CHECK(a.best_step == 3);
  CHECK(testing::read_file(dir / "a" / "last.ckpt") == testing::read_file(dir / "b" / "last.ckpt"));
  CHECK(std::filesystem::exists(dir / "a" / "best.ckpt"));
}

TEST_CASE("synthesis records are one JSON object per line") {
  SynthesisRecord r;
  r.sentence_id = 7;
  r.stop_step = 12;
  r.attention_path = {0, 0, 1, 2};
  r.decoded_phonemes = {"ka", "ni"};
  r.predicted_tones = std::vector<std::string>{"%L", "L%"};
  std::ostringstream out;
  write_synthesis_record(out, r);
  const std::string line = out.str();
  CHECK(line.back() == '\n');
  const auto j = nlohmann::json::parse(line);
  CHECK(j["sentence_id"] == 7);
  CHECK(j["stop_step"] == 12);
  CHECK(j["attention_path"].size() == 4);
  CHECK(j["predicted_tones"][1] == "L%");
  CHECK_FALSE(j.contains("frames_path"));
}

}  // namespace
}  // namespace pngbert::downstream
