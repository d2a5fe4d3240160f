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
#include <map>
#include <numeric>

#include "doctest.h"
#include "pngbert/codec/masking.h"
#include "pngbert/codec/sequence.h"
#include "pngbert/common/errors.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/encoder/encoder.h"
#include "pngbert/encoder/evaluation.h"
#include "pngbert/encoder/pretrain.h"
#include "pngbert/nn/checkpoint.h"
#include "pngbert/nn/grad_check.h"
#include "pngbert/nn/kernels.h"
#include "test_util.h"

namespace pngbert::encoder {
namespace {

struct Fixture {
  corpus::CorpusSpec spec;
  corpus::Lexicon lex;
  corpus::Dataset ds;
  codec::Vocabulary vocab;
  std::vector<codec::TokenSequence> train, valid;
  Fixture() {
    spec.seed = 5;
    spec.train_size = 200;
    spec.valid_size = 40;
    spec.test_size = 10;
    lex = corpus::build_lexicon(spec);
    ds = corpus::generate_dataset(lex, spec);
    vocab = codec::build_vocabulary(lex);
    for (const auto& s : ds.train) train.push_back(codec::assemble_sequence(s, vocab));
    for (const auto& s : ds.valid) valid.push_back(codec::assemble_sequence(s, vocab));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

EncoderConfig tiny_config(int vocab_size) {
  EncoderConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.heads = 2;
  c.vocab_size = vocab_size;
  c.dropout = 0.0;
  return c;
}

nn::Tensor run(nn::ParameterStore& params, const EncoderConfig& config, const EncoderBatch& batch) {
  nn::Graph g(false);
  Rng rng(0);
  return encode(g, params, config, batch, false, rng).final.value();
}

TEST_CASE("positional encoding at position zero") {
  const auto pe = positional_encoding(0, 8);
  for (int i = 0; i < 8; ++i) CHECK(pe[i] == (i % 2 == 0 ? 0.0 : 1.0));
  CHECK_THROWS_AS(positional_encoding(-1, 8), std::invalid_argument);
}

TEST_CASE("positional encoding uses interleaved wavelengths") {
  const int d = 64;
  const auto pe = positional_encoding(37, d);
  for (int i = 0; i < d / 2; ++i) {
    const double angle = 37.0 / std::pow(10000.0, 2.0 * i / d);
    CHECK(pe[2 * i] == doctest::Approx(std::sin(angle)).epsilon(1e-12));
    CHECK(pe[2 * i + 1] == doctest::Approx(std::cos(angle)).epsilon(1e-12));
  }
}

TEST_CASE("distinct positions differ in every frequency band") {
  const int d = 64, max_len = 256;
  std::vector<std::vector<double>> table;
  for (int p = 0; p < max_len; ++p) table.push_back(positional_encoding(p, d));
  for (int a = 0; a < max_len; ++a) {
    for (int b = a + 1; b < max_len; ++b) {
      for (int band = 0; band < d / 2; ++band) {
        const double diff = std::hypot(table[a][2 * band] - table[b][2 * band],
                                       table[a][2 * band + 1] - table[b][2 * band + 1]);
        REQUIRE(diff > 1e-9);
      }
    }
  }
}

TEST_CASE("presets") {
  CHECK(EncoderConfig::preset("paper-base").layers == 12);
  CHECK(EncoderConfig::preset("paper-base").hidden == 768);
  CHECK(EncoderConfig::preset("paper-small").layers == 6);
  CHECK(EncoderConfig::preset("paper-small").hidden == 512);
  const EncoderConfig desk = EncoderConfig::preset("desk");
  CHECK(desk.layers == 4);
  CHECK(desk.hidden == 64);
  CHECK(desk.heads == 4);
  CHECK(desk.ffn_dim() == 256);
  CHECK_FALSE(desk.use_word_positions);
  CHECK_THROWS_AS(EncoderConfig::preset("huge"), ConfigError);
  EncoderConfig bad = tiny_config(50);
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder returns every layer and rejects overlength input") {
  const auto& f = fixture();
  EncoderConfig c = tiny_config(f.vocab.size());
  nn::ParameterStore params;
  init_encoder(c, params, 1);
  const EncoderBatch batch = pack({&f.train[0], &f.train[1]});
  nn::Graph g(false);
  Rng rng(0);
  const EncoderOutput out = encode(g, params, c, batch, false, rng);
  CHECK(out.layers.size() == 2);
  CHECK(out.final.rows() == f.train[0].size() + f.train[1].size());
  CHECK(out.final.cols() == 8);

  c.max_len = static_cast<int>(f.train[0].size()) - 1;
  CHECK_THROWS_AS(encode(g, params, c, pack({&f.train[0]}), false, rng), DataError);
}

TEST_CASE("permuting tokens with their channels permutes the outputs") {
  const auto& f = fixture();
  const EncoderConfig c = tiny_config(f.vocab.size());
  nn::ParameterStore params;
  init_encoder(c, params, 2);
  const EncoderBatch batch = pack({&f.train[3]});
  const std::size_t n = batch.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  EncoderBatch shuffled = batch;
  for (std::size_t i = 0; i < n; ++i) {
    shuffled.ids[i] = batch.ids[perm[i]];
    shuffled.segments[i] = batch.segments[perm[i]];
    shuffled.positions[i] = batch.positions[perm[i]];
  }
  const nn::Tensor a = run(params, c, batch), b = run(params, c, shuffled);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) CHECK(b(i, j) == doctest::Approx(a(perm[i], j)).epsilon(1e-12));
  }
}

TEST_CASE("padding rows never influence real tokens") {
  const auto& f = fixture();
  const EncoderConfig c = tiny_config(f.vocab.size());
  nn::ParameterStore params;
  init_encoder(c, params, 3);
  codec::TokenSequence seq = f.train[5];
  const std::size_t real = seq.size();
  for (int k = 0; k < 3; ++k) {
    seq.ids.push_back(codec::kPad);
    seq.segment_ids.push_back(1);
    seq.token_positions.push_back(static_cast<int>(seq.token_positions.size()));
    seq.word_ids.push_back(-1);
  }
  EncoderBatch padded = pack({&seq});
  const nn::Tensor a = run(params, c, padded);
  for (std::size_t r = real; r < padded.rows(); ++r) {
    padded.segments[r] = 0;
    padded.positions[r] = 200;
  }
  const nn::Tensor b = run(params, c, padded);
  const nn::Tensor plain = run(params, c, pack({&f.train[5]}));
  for (std::size_t r = 0; r < real; ++r) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      CHECK(a(r, j) == doctest::Approx(b(r, j)).epsilon(1e-12));
      CHECK(a(r, j) == doctest::Approx(plain(r, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("padding columns receive zero attention weight") {
  Rng rng(8);
  const std::size_t rows = 7, d = 4;
  nn::kernels::AttentionLayout layout;
  layout.offsets = {0, 4, 7};
  layout.heads = 2;
  layout.key_valid = {1, 1, 0, 0, 1, 1, 0};
  const nn::Tensor q = testing::random_tensor(rows, d, rng), k = testing::random_tensor(rows, d, rng),
                   v = testing::random_tensor(rows, d, rng);
  std::vector<double> out(rows * d), probs(layout.prob_size());
  nn::kernels::attention_forward(q.data(), k.data(), v.data(), d, layout, out.data(), probs.data());
  for (std::size_t s = 0; s < layout.sequences(); ++s) {
    const std::size_t begin = layout.offsets[s], len = layout.offsets[s + 1] - begin;
    for (std::size_t h = 0; h < layout.heads; ++h) {
      for (std::size_t i = 0; i < len; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          const double p = probs[layout.prob_offset(s) + (h * len + i) * len + j];
          if (!layout.key_valid[begin + j]) CHECK(p == 0.0);
          total += p;
        }
        CHECK(total == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("word positions switch leaves shapes unchanged") {
  const auto& f = fixture();
  EncoderConfig c = tiny_config(f.vocab.size());
  c.use_word_positions = true;
  nn::ParameterStore with, without;
  init_encoder(c, with, 1);
  CHECK(with.contains(kPrefix + "word_position_embedding"));
  const auto seq = codec::assemble_sequence(f.ds.train[0], f.vocab, true);
  const nn::Tensor a = run(with, c, pack({&seq}));
  c.use_word_positions = false;
  init_encoder(c, without, 1);
  CHECK_FALSE(without.contains(kPrefix + "word_position_embedding"));
  const nn::Tensor b = run(without, c, pack({&f.train[0]}));
  CHECK(a.shape() == b.shape());
}

TEST_CASE("mlm logits are tied to the token embedding") {
  const auto& f = fixture();
  const EncoderConfig c = tiny_config(f.vocab.size());
  nn::ParameterStore params;
  init_encoder(c, params, 4);
  const EncoderBatch batch = pack({&f.train[0]});
  const std::vector<int> rows = {1, 2};
  nn::Graph g(false);
  Rng rng(0);
  const nn::Var final = encode(g, params, c, batch, false, rng).final;
  const nn::Tensor logits = mlm_logits(g, params, final, rows).value();
  CHECK(logits.rows() == 2);
  CHECK(logits.cols() == static_cast<std::size_t>(f.vocab.size()));
  const nn::Tensor& emb = params.at(kPrefix + "token_embedding").value;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t v = 0; v < logits.cols(); ++v) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 8; ++j) dot += final.value()(rows[r], j) * emb(v, j);
      CHECK(logits(r, v) == doctest::Approx(dot).epsilon(1e-12));
    }
  }
  // Editing one embedding row moves that logit column through the same
  // table, with no stale copy.
  nn::Tensor& table = params.at(kPrefix + "token_embedding").value;
  for (std::size_t j = 0; j < 8; ++j) table(10, j) += 0.5;
  nn::Graph g2(false);
  const nn::Var final2 = g2.constant(final.value());
  const nn::Tensor after = mlm_logits(g2, params, final2, rows).value();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double shift = 0.0;
    for (std::size_t j = 0; j < 8; ++j) shift += 0.5 * final.value()(rows[r], j);
    CHECK(after(r, 10) - logits(r, 10) == doctest::Approx(shift).epsilon(1e-12));
    CHECK(after(r, 11) == logits(r, 11));
  }
  CHECK_THROWS_AS(mlm_logits(g2, params, final2, {}), std::invalid_argument);
}

TEST_CASE("full encoder mlm loss passes the gradient check") {
  const auto& f = fixture();
  const EncoderConfig c = tiny_config(f.vocab.size());
  nn::ParameterStore params;
  init_encoder(c, params, 6);
  const codec::TokenSequence* seqs[] = {&f.train[0], &f.train[1]};
  std::vector<codec::MaskedSequence> masked;
  PretrainConfig pc;
  for (int k = 0; k < 2; ++k) masked.push_back(pretraining_example(*seqs[k], f.vocab, pc, 0, k));
  const EncoderBatch batch = pack({&masked[0].input, &masked[1].input});
  std::vector<int> rows, targets;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t t = 0; t < masked[k].loss_mask.size(); ++t) {
      if (!masked[k].loss_mask[t]) continue;
      rows.push_back(static_cast<int>(batch.offsets[k] + t));
      targets.push_back(masked[k].target[t]);
    }
  }
  const auto result = nn::grad_check_params(
      [&](nn::Graph& g) {
        Rng rng(0);
        const nn::Var final = encode(g, params, c, batch, false, rng).final;
        return nn::cross_entropy(mlm_logits(g, params, final, rows), targets,
                                 std::vector<unsigned char>(targets.size(), 1));
      },
      params, 1e-5, 24);
  CHECK(result.checked > 0);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("initial loss is close to ln of the vocabulary size") {
  const auto& f = fixture();
  EncoderConfig c = EncoderConfig::desk();
  c.vocab_size = f.vocab.size();
  nn::ParameterStore params;
  nn::OptimizerState opt;
  init_encoder(c, params, 1);
  PretrainConfig pc;
  pc.steps = 1;
  pc.batch_size = 16;
  const auto result = pretrain(c, pc, params, opt, f.train, {}, f.vocab, {});
  REQUIRE(result.losses.size() == 1);
  CHECK(std::abs(result.losses[0] - std::log(static_cast<double>(f.vocab.size()))) < 0.25);
}

TEST_CASE("untrained accuracy is near chance") {
  const auto& f = fixture();
  EncoderConfig c = EncoderConfig::desk();
  c.vocab_size = f.vocab.size();
  nn::ParameterStore params;
  init_encoder(c, params, 2);
  // Full-segment masking leaves no copy path, so the best an untrained model
  // can do is a constant guess.
  const auto preds = masked_predictions(params, c, f.vocab, f.valid, MaskMode::kG2p);
  std::map<int, std::size_t> histogram;
  for (const auto& p : preds) ++histogram[p.target];
  std::size_t majority = 0;
  for (const auto& [id, n] : histogram) majority = std::max(majority, n);
  const Accuracy acc = accuracy_of(preds);
  CHECK(acc.total > 0);
  CHECK(acc.rate() <= static_cast<double>(majority) / acc.total + 0.02);
}

TEST_CASE("identical seeds give identical loss curves") {
  const auto& f = fixture();
  EncoderConfig c = tiny_config(f.vocab.size());
  c.dropout = 0.1;
  PretrainConfig pc;
  pc.steps = 6;
  pc.batch_size = 8;
  pc.lr = 1e-3;
  auto curve = [&](std::uint64_t seed) {
    nn::ParameterStore params;
    nn::OptimizerState opt;
    init_encoder(c, params, 3);
    pc.seed = seed;
    return pretrain(c, pc, params, opt, f.train, {}, f.vocab, {}).losses;
  };
  CHECK(curve(1) == curve(1));
  CHECK(curve(1) != curve(2));
}

TEST_CASE("pretraining writes logs and checkpoints") {
  const auto& f = fixture();
  const EncoderConfig c = tiny_config(f.vocab.size());
  testing::TempDir dir;
  nn::ParameterStore params;
  nn::OptimizerState opt;
  init_encoder(c, params, 3);
  PretrainConfig pc;
  pc.steps = 4;
  pc.batch_size = 4;
  pc.eval_every = 2;
  pc.log_every = 1;
  pc.valid_limit = 10;
  std::ostringstream log;
  PretrainIo io;
  io.out_dir = dir.path();
  io.metadata = R"({"run":"test"})";
  io.log = &log;
  const auto result = pretrain(c, pc, params, opt, f.train, f.valid, f.vocab, io);
  CHECK(result.last.step == 4);
  CHECK(std::filesystem::exists(dir / "last.ckpt"));
  CHECK(std::filesystem::exists(dir / "best.ckpt"));
  const auto ckpt = nn::read_checkpoint(dir / "last.ckpt");
  CHECK(ckpt.metadata.find("\"run\":\"test\"") != std::string::npos);
  CHECK(ckpt.metadata.find("\"step\":4") != std::string::npos);
  std::istringstream lines(log.str());
  std::string line;
  int count = 0, with_acc = 0;
  while (std::getline(lines, line)) {
    ++count;
    if (line.find("g2p_acc") != std::string::npos) ++with_acc;
  }
  CHECK(count == 4);
  CHECK(with_acc == 2);
}

TEST_CASE("freezing keeps only the top layers trainable") {
  const auto& f = fixture();
  EncoderConfig c = tiny_config(f.vocab.size());
  c.layers = 4;
  nn::ParameterStore params;
  init_encoder(c, params, 1);
  freeze_encoder(params, c, 2);
  CHECK_FALSE(params.at(layer_prefix(0) + "ffn.w1").trainable);
  CHECK_FALSE(params.at(layer_prefix(1) + "ffn.w1").trainable);
  CHECK(params.at(layer_prefix(2) + "ffn.w1").trainable);
  CHECK(params.at(layer_prefix(3) + "attn.w_qkv").trainable);
  CHECK(params.at(kPrefix + "final_ln.gain").trainable);
  CHECK_FALSE(params.at(kPrefix + "token_embedding").trainable);
  freeze_encoder(params, c, 0);
  for (const auto& [name, p] : params) CHECK_FALSE(p.trainable);
  freeze_encoder(params, c, 4);
  for (const auto& [name, p] : params) CHECK(p.trainable);
  CHECK_THROWS_AS(freeze_encoder(params, c, 5), ConfigError);
}

TEST_CASE("pb mode hides graphemes and drops their loss") {
  const auto& f = fixture();
  PretrainConfig pc;
  pc.pb_mode = true;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto m = pretraining_example(f.train[i], f.vocab, pc, 0, i);
    for (std::size_t t = 0; t < m.input.size(); ++t) {
      if (f.vocab.is_grapheme(f.train[i].ids[t])) {
        CHECK(m.input.ids[t] == codec::kMask);
        CHECK(m.loss_mask[t] == 0);
      }
    }
  }
}

}  // namespace
}  // namespace pngbert::encoder
