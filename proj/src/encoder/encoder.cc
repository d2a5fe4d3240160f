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

#include "pngbert/encoder/encoder.h"

#include <cmath>
#include <cstdio>

#include "pngbert/common/errors.h"

namespace pngbert::encoder {

using nn::Tensor;
using nn::Var;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

Tensor constant_row(std::size_t cols, double v) { return Tensor({1, cols}, v); }

struct PositionTable {
  int d = 0;
  int rows = 0;
  Tensor table;
};

const Tensor& position_table(int max_len, int d) {
  thread_local PositionTable cache;
  if (cache.d != d || cache.rows < max_len) {
    cache.d = d;
    cache.rows = max_len;
    cache.table = Tensor::zeros(static_cast<std::size_t>(max_len), static_cast<std::size_t>(d));
    for (int p = 0; p < max_len; ++p) {
      const auto pe = positional_encoding(p, d);
      for (int i = 0; i < d; ++i) cache.table(p, i) = pe[i];
    }
  }
  return cache.table;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder: layers must be positive");
  if (hidden < 2 || hidden % 2 != 0) throw ConfigError("encoder: hidden must be even and at least 2");
  if (heads < 1 || hidden % heads != 0) throw ConfigError("encoder: hidden must be divisible by heads");
  if (ffn < 0) throw ConfigError("encoder: ffn must be nonnegative");
  if (max_len < 4) throw ConfigError("encoder: max_len too small");
  if (vocab_size <= 4) throw ConfigError("encoder: vocab_size must exceed the 4 special tokens");
  if (max_words < 1) throw ConfigError("encoder: max_words must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must be in [0,1)");
}

EncoderConfig EncoderConfig::paper_base() {
  EncoderConfig c;
  c.layers = 12;
  c.hidden = 768;
  c.heads = 12;
  return c;
}

EncoderConfig EncoderConfig::paper_small() {
  EncoderConfig c;
  c.layers = 6;
  c.hidden = 512;
  c.heads = 8;
  return c;
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig(); }

EncoderConfig EncoderConfig::preset(const std::string& name) {
  if (name == "paper-base") return paper_base();
  if (name == "paper-small") return paper_small();
  if (name == "desk") return desk();
  throw ConfigError("unknown encoder preset '" + name + "'");
}

std::string layer_prefix(int layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer%02d/", layer);
  return kPrefix + buf;
}

std::vector<double> positional_encoding(int position, int d) {
  if (position < 0) throw std::invalid_argument("positional_encoding: negative position");
  std::vector<double> pe(static_cast<std::size_t>(d));
  for (int i = 0; 2 * i < d; ++i) {
    const double angle = position / std::pow(10000.0, 2.0 * i / d);
    pe[2 * i] = std::sin(angle);
    if (2 * i + 1 < d) pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

void init_encoder(const EncoderConfig& config, nn::ParameterStore& params, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {0x656e63ULL});
  const std::size_t d = config.hidden, f = config.ffn_dim(), v = config.vocab_size;
  // Small token embeddings: the input is scaled by sqrt(d), and the tied
  // output layer then starts near uniform.
  params.add(kPrefix + "token_embedding", gaussian(v, d, 0.5 / std::sqrt(static_cast<double>(d)), rng));
  params.add(kPrefix + "segment_embedding", gaussian(2, d, 0.1, rng));
  if (config.use_word_positions) {
    params.add(kPrefix + "word_position_embedding", gaussian(config.max_words + 1, d, 0.1, rng));
  }
  const double in_std = 1.0 / std::sqrt(static_cast<double>(d));
  const double out_scale = 1.0 / std::sqrt(2.0 * config.layers);
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    params.add(p + "ln1.gain", constant_row(d, 1.0));
    params.add(p + "ln1.bias", constant_row(d, 0.0));
    params.add(p + "attn.w_qkv", gaussian(d, 3 * d, in_std, rng));
    params.add(p + "attn.b_qkv", constant_row(3 * d, 0.0));
    params.add(p + "attn.w_out", gaussian(d, d, in_std * out_scale, rng));
    params.add(p + "attn.b_out", constant_row(d, 0.0));
    params.add(p + "ln2.gain", constant_row(d, 1.0));
    params.add(p + "ln2.bias", constant_row(d, 0.0));
    params.add(p + "ffn.w1", gaussian(d, f, in_std, rng));
    params.add(p + "ffn.b1", constant_row(f, 0.0));
    params.add(p + "ffn.w2", gaussian(f, d, out_scale / std::sqrt(static_cast<double>(f)), rng));
    params.add(p + "ffn.b2", constant_row(d, 0.0));
  }
  params.add(kPrefix + "final_ln.gain", constant_row(d, 1.0));
  params.add(kPrefix + "final_ln.bias", constant_row(d, 0.0));
  params.add(kPrefix + "mlm_bias", constant_row(v, 0.0));
}

EncoderBatch pack(const std::vector<const codec::TokenSequence*>& sequences) {
  EncoderBatch b;
  b.offsets.push_back(0);
  for (const auto* s : sequences) {
    b.ids.insert(b.ids.end(), s->ids.begin(), s->ids.end());
    b.segments.insert(b.segments.end(), s->segment_ids.begin(), s->segment_ids.end());
    b.positions.insert(b.positions.end(), s->token_positions.begin(), s->token_positions.end());
    if (s->word_positions) b.word_positions.insert(b.word_positions.end(), s->word_positions->begin(), s->word_positions->end());
    b.offsets.push_back(b.ids.size());
  }
  if (!b.word_positions.empty() && b.word_positions.size() != b.ids.size()) {
    throw std::invalid_argument("pack: word positions present on some sequences only");
  }
  return b;
}

EncoderOutput encode(nn::Graph& g, nn::ParameterStore& params, const EncoderConfig& config,
                     const EncoderBatch& batch, bool training, Rng& dropout_rng) {
  const std::size_t rows = batch.rows();
  const int d = config.hidden;
  if (rows == 0) throw std::invalid_argument("encode: empty batch");
  for (std::size_t s = 0; s < batch.sequences(); ++s) {
    if (batch.offsets[s + 1] - batch.offsets[s] > static_cast<std::size_t>(config.max_len)) {
      throw DataError("encode: sequence of " + std::to_string(batch.offsets[s + 1] - batch.offsets[s]) +
                      " tokens exceeds max_len " + std::to_string(config.max_len));
    }
  }
  for (int id : batch.ids) {
    if (id < 0 || id >= config.vocab_size) throw DataError("encode: token id " + std::to_string(id) + " out of range");
  }

  const Tensor& pe_table = position_table(config.max_len, d);
  Tensor pe = Tensor::zeros(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    const int pos = batch.positions[r];
    if (pos < 0 || pos >= config.max_len) throw DataError("encode: position out of range");
    for (int i = 0; i < d; ++i) pe(r, i) = pe_table(pos, i);
  }

  Var x = nn::scale(nn::embedding_lookup(g.param(params.at(kPrefix + "token_embedding")), batch.ids),
                    std::sqrt(static_cast<double>(d)));
  x = nn::add(x, g.constant(std::move(pe)));
  x = nn::add(x, nn::embedding_lookup(g.param(params.at(kPrefix + "segment_embedding")), batch.segments));
  if (config.use_word_positions) {
    if (batch.word_positions.size() != rows) throw std::invalid_argument("encode: word positions missing");
    std::vector<int> wp = batch.word_positions;
    for (int& w : wp) w = std::min(w, config.max_words);
    x = nn::add(x, nn::embedding_lookup(g.param(params.at(kPrefix + "word_position_embedding")), wp));
  }
  x = nn::dropout(x, config.dropout, dropout_rng, training);

  nn::kernels::AttentionLayout layout;
  layout.offsets = batch.offsets;
  layout.heads = static_cast<std::size_t>(config.heads);
  layout.key_valid.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) layout.key_valid[r] = batch.ids[r] != codec::kPad;

  auto P = [&](const std::string& name) { return g.param(params.at(name)); };
  EncoderOutput out;
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    Var h = nn::layer_norm(x, P(p + "ln1.gain"), P(p + "ln1.bias"));
    Var qkv = nn::linear(h, P(p + "attn.w_qkv"), P(p + "attn.b_qkv"));
    Var att = nn::multi_head_attention(nn::slice_cols(qkv, 0, d), nn::slice_cols(qkv, d, 2 * d),
                                       nn::slice_cols(qkv, 2 * d, 3 * d), layout);
    att = nn::linear(att, P(p + "attn.w_out"), P(p + "attn.b_out"));
    x = nn::add(x, nn::dropout(att, config.dropout, dropout_rng, training));
    h = nn::layer_norm(x, P(p + "ln2.gain"), P(p + "ln2.bias"));
    h = nn::relu(nn::linear(h, P(p + "ffn.w1"), P(p + "ffn.b1")));
    h = nn::linear(h, P(p + "ffn.w2"), P(p + "ffn.b2"));
    x = nn::add(x, nn::dropout(h, config.dropout, dropout_rng, training));
    out.layers.push_back(x);
  }
  out.final = nn::layer_norm(x, P(kPrefix + "final_ln.gain"), P(kPrefix + "final_ln.bias"));
  return out;
}

Var mlm_logits(nn::Graph& g, nn::ParameterStore& params, Var final, const std::vector<int>& rows) {
  if (rows.empty()) throw std::invalid_argument("mlm_logits: no loss positions");
  Var h = nn::gather_rows(final, rows);
  Var logits = nn::matmul_nt(h, g.param(params.at(kPrefix + "token_embedding")));
  return nn::add_bias(logits, g.param(params.at(kPrefix + "mlm_bias")));
}

void freeze_encoder(nn::ParameterStore& params, const EncoderConfig& config, int tuned_layers) {
  if (tuned_layers < 0 || tuned_layers > config.layers) {
    throw ConfigError("cannot tune " + std::to_string(tuned_layers) + " of " + std::to_string(config.layers) +
                      " encoder layers");
  }
  params.set_trainable(kPrefix, false);
  for (int l = config.layers - tuned_layers; l < config.layers; ++l) params.set_trainable(layer_prefix(l), true);
  if (tuned_layers > 0) params.set_trainable(kPrefix + "final_ln.", true);
  if (tuned_layers == config.layers) params.set_trainable(kPrefix, true);
}

}  // namespace pngbert::encoder
