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

#include "pngbert/downstream/decoder.h"

#include <algorithm>
#include <cmath>

#include "pngbert/common/errors.h"

namespace pngbert::downstream {

using nn::Tensor;
using nn::Var;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  return gaussian(rows, cols, std::sqrt(2.0 / static_cast<double>(rows + cols)), rng);
}

Tensor lstm_bias(std::size_t hidden) {
  Tensor b = Tensor::zeros(1, 4 * hidden);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
  return b;
}

struct Weights {
  Var pre_w1, pre_b1, pre_w2, pre_b2;
  Var l1_wx, l1_wh, l1_b;
  Var att_wm, att_wq, att_b, att_v;
  Var l2_wx, l2_wh, l2_b;
  Var frame_w, frame_b, stop_w, stop_b;

  Weights(nn::Graph& g, nn::ParameterStore& params) {
    auto P = [&](const char* name) { return g.param(params.at(kDecoderPrefix + name)); };
    pre_w1 = P("prenet.w1");
    pre_b1 = P("prenet.b1");
    pre_w2 = P("prenet.w2");
    pre_b2 = P("prenet.b2");
    l1_wx = P("lstm1.w_input");
    l1_wh = P("lstm1.w_hidden");
    l1_b = P("lstm1.bias");
    att_wm = P("attention.w_memory");
    att_wq = P("attention.w_query");
    att_b = P("attention.bias");
    att_v = P("attention.v");
    l2_wx = P("lstm2.w_input");
    l2_wh = P("lstm2.w_hidden");
    l2_b = P("lstm2.bias");
    frame_w = P("frame.weight");
    frame_b = P("frame.bias");
    stop_w = P("stop.weight");
    stop_b = P("stop.bias");
  }
};

struct State {
  nn::LstmState l1;
  nn::LstmState l2;
  Var alpha;
  Var context;
};

struct StepOutput {
  Var frame;
  Var stop_logit;
};

// Decoder running over a zero-padded copy of the memory, one row block of
// max_len rows per utterance.
class Stepper {
 public:
  Stepper(nn::Graph& g, nn::ParameterStore& params, const DecoderConfig& config, const Memory& memory,
          bool dropout_on, Rng& rng)
      : g_(g), config_(config), w_(g, params), dropout_on_(dropout_on), rng_(rng) {
    batch_ = memory.utterances();
    if (batch_ == 0) throw std::invalid_argument("decoder: empty memory");
    if (memory.features.cols() != static_cast<std::size_t>(config.memory_dim)) {
      throw std::invalid_argument("decoder: memory width does not match memory_dim");
    }
    for (std::size_t u = 0; u < batch_; ++u) {
      if (memory.length(u) == 0) throw std::invalid_argument("decoder: empty phoneme span");
      lengths_.push_back(memory.length(u));
      width_ = std::max(width_, memory.length(u));
    }
    std::vector<int> index(batch_ * width_, -1);
    for (std::size_t u = 0; u < batch_; ++u) {
      for (std::size_t t = 0; t < lengths_[u]; ++t) index[u * width_ + t] = static_cast<int>(memory.offsets[u] + t);
    }
    padded_ = nn::gather_rows(memory.features, index);
    processed_ = nn::matmul(padded_, w_.att_wm);

    const std::size_t h = config.hidden;
    state_.l1 = {g.constant(Tensor::zeros(batch_, h)), g.constant(Tensor::zeros(batch_, h))};
    state_.l2 = {g.constant(Tensor::zeros(batch_, h)), g.constant(Tensor::zeros(batch_, h))};
    Tensor alpha0 = Tensor::zeros(batch_, width_);
    for (std::size_t u = 0; u < batch_; ++u) alpha0(u, 0) = 1.0;
    state_.alpha = g.constant(std::move(alpha0));
    state_.context = g.constant(Tensor::zeros(batch_, config.memory_dim));
  }

  std::size_t batch() const { return batch_; }
  std::size_t width() const { return width_; }
  const std::vector<std::size_t>& lengths() const { return lengths_; }
  const Var& alpha() const { return state_.alpha; }

  StepOutput step(Var previous_frame) {
    const double p = config_.prenet_dropout;
    Var x = nn::relu(nn::linear(previous_frame, w_.pre_w1, w_.pre_b1));
    x = nn::dropout(x, p, rng_, dropout_on_);
    x = nn::relu(nn::linear(x, w_.pre_w2, w_.pre_b2));
    x = nn::dropout(x, p, rng_, dropout_on_);

    state_.l1 = nn::lstm_cell(nn::concat_cols({x, state_.context}), state_.l1, w_.l1_wx, w_.l1_wh, w_.l1_b);
    Var query = nn::linear(state_.l1.h, w_.att_wq, w_.att_b);
    Var energies = nn::matmul(nn::tanh(nn::add_group_broadcast(processed_, query, width_)), w_.att_v);
    energies = nn::reshape(energies, batch_, width_);
    state_.alpha = nn::forward_attention(state_.alpha, energies, lengths_);
    state_.context = nn::group_weighted_sum(state_.alpha, padded_);
    state_.l2 = nn::lstm_cell(nn::concat_cols({state_.l1.h, state_.context}), state_.l2, w_.l2_wx, w_.l2_wh, w_.l2_b);

    Var out = nn::concat_cols({state_.l2.h, state_.context});
    return {nn::linear(out, w_.frame_w, w_.frame_b), nn::linear(out, w_.stop_w, w_.stop_b)};
  }

 private:
  nn::Graph& g_;
  const DecoderConfig& config_;
  Weights w_;
  bool dropout_on_;
  Rng& rng_;
  std::size_t batch_ = 0;
  std::size_t width_ = 0;
  std::vector<std::size_t> lengths_;
  Var padded_;
  Var processed_;
  State state_;
};

}  // namespace

void DecoderConfig::validate() const {
  if (memory_dim < 1 || prenet_dim < 1 || hidden < 1 || attention_dim < 1 || frame_dim < 1) {
    throw ConfigError("decoder: dimensions must be positive");
  }
  if (!(prenet_dropout >= 0.0 && prenet_dropout < 1.0)) throw ConfigError("decoder: prenet_dropout must be in [0,1)");
  if (max_steps_per_token < 1) throw ConfigError("decoder: max_steps_per_token must be positive");
}

void init_decoder(const DecoderConfig& config, nn::ParameterStore& params, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {0x646563ULL});
  const std::size_t f = config.frame_dim, p = config.prenet_dim, m = config.memory_dim, h = config.hidden,
                    a = config.attention_dim;
  auto add = [&](const char* name, Tensor t) { params.add(kDecoderPrefix + name, std::move(t)); };
  add("prenet.w1", glorot(f, p, rng));
  add("prenet.b1", Tensor::zeros(1, p));
  add("prenet.w2", glorot(p, p, rng));
  add("prenet.b2", Tensor::zeros(1, p));
  add("lstm1.w_input", glorot(p + m, 4 * h, rng));
  add("lstm1.w_hidden", glorot(h, 4 * h, rng));
  add("lstm1.bias", lstm_bias(h));
  add("attention.w_memory", glorot(m, a, rng));
  add("attention.w_query", glorot(h, a, rng));
  add("attention.bias", Tensor::zeros(1, a));
  add("attention.v", glorot(a, 1, rng));
  add("lstm2.w_input", glorot(h + m, 4 * h, rng));
  add("lstm2.w_hidden", glorot(h, 4 * h, rng));
  add("lstm2.bias", lstm_bias(h));
  add("frame.weight", glorot(h + m, f, rng));
  add("frame.bias", Tensor::zeros(1, f));
  add("stop.weight", glorot(h + m, 1, rng));
  // Stops are one frame per utterance, so the logit starts well below zero.
  add("stop.bias", Tensor({1, 1}, -4.0));
}

TeacherForcedOutput decode_teacher_forced(nn::Graph& g, nn::ParameterStore& params, const DecoderConfig& config,
                                          const Memory& memory, const std::vector<const Tensor*>& reference,
                                          bool training, Rng& rng) {
  if (reference.size() != memory.utterances()) {
    throw std::invalid_argument("decode_teacher_forced: one reference per utterance required");
  }
  std::size_t steps = 0;
  for (const Tensor* r : reference) {
    if (r->rows() == 0 || r->cols() != static_cast<std::size_t>(config.frame_dim)) {
      throw std::invalid_argument("decode_teacher_forced: reference frames must be nonempty with frame_dim columns");
    }
    steps = std::max(steps, r->rows());
  }
  Stepper stepper(g, params, config, memory, training || config.prenet_dropout_at_inference, rng);
  const std::size_t batch = stepper.batch(), f = config.frame_dim;
  TeacherForcedOutput out;
  out.steps = steps;
  std::vector<Var> frames, stops;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor previous = Tensor::zeros(batch, f);
    if (t > 0) {
      for (std::size_t u = 0; u < batch; ++u) {
        if (t - 1 < reference[u]->rows()) {
          for (std::size_t c = 0; c < f; ++c) previous(u, c) = (*reference[u])(t - 1, c);
        }
      }
    }
    StepOutput s = stepper.step(g.constant(std::move(previous)));
    frames.push_back(s.frame);
    stops.push_back(s.stop_logit);
    out.alignments.push_back(stepper.alpha().value());
  }
  out.frames = nn::concat_rows(frames);
  out.stop_logits = nn::concat_rows(stops);
  return out;
}

std::vector<Utterance> decode_free_running(nn::Graph& g, nn::ParameterStore& params, const DecoderConfig& config,
                                           const Memory& memory, Rng& rng) {
  Stepper stepper(g, params, config, memory, config.prenet_dropout_at_inference, rng);
  const std::size_t batch = stepper.batch(), f = config.frame_dim;
  std::vector<Utterance> out(batch);
  std::vector<std::size_t> limit(batch);
  std::vector<std::vector<double>> frames(batch), alignment(batch);
  std::vector<bool> done(batch, false);
  std::size_t remaining = batch, longest = 0;
  for (std::size_t u = 0; u < batch; ++u) {
    limit[u] = static_cast<std::size_t>(config.max_steps_per_token) * stepper.lengths()[u];
    longest = std::max(longest, limit[u]);
  }
  Tensor previous = Tensor::zeros(batch, f);
  for (std::size_t t = 0; t < longest && remaining > 0; ++t) {
    StepOutput s = stepper.step(g.constant(previous));
    previous = s.frame.value();
    const Tensor& alpha = stepper.alpha().value();
    for (std::size_t u = 0; u < batch; ++u) {
      if (done[u]) continue;
      const double prob = 1.0 / (1.0 + std::exp(-s.stop_logit.value()(u, 0)));
      auto row = previous.row(u);
      frames[u].insert(frames[u].end(), row.begin(), row.end());
      for (std::size_t n = 0; n < stepper.lengths()[u]; ++n) alignment[u].push_back(alpha(u, n));
      out[u].stop_probs.push_back(prob);
      if (prob > 0.5) {
        out[u].stop_step = static_cast<int>(t);
        done[u] = true;
        --remaining;
      } else if (t + 1 >= limit[u]) {
        out[u].hit_max_steps = true;
        done[u] = true;
        --remaining;
      }
    }
  }
  for (std::size_t u = 0; u < batch; ++u) {
    const std::size_t steps = out[u].stop_probs.size();
    out[u].frames = Tensor({steps, f}, std::move(frames[u]));
    out[u].alignment = Tensor({steps, stepper.lengths()[u]}, std::move(alignment[u]));
  }
  return out;
}

TtsTargets tts_targets(const std::vector<const Tensor*>& reference) {
  std::size_t steps = 0, f = 0;
  for (const Tensor* r : reference) {
    steps = std::max(steps, r->rows());
    f = r->cols();
  }
  const std::size_t batch = reference.size();
  TtsTargets t;
  t.frames = Tensor::zeros(steps * batch, f);
  t.stop.assign(steps * batch, 0.0);
  t.valid.assign(steps * batch, 0);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t u = 0; u < batch; ++u) {
      const Tensor& r = *reference[u];
      if (s >= r.rows()) continue;
      const std::size_t row = s * batch + u;
      for (std::size_t c = 0; c < f; ++c) t.frames(row, c) = r(s, c);
      t.valid[row] = 1;
      t.stop[row] = s + 1 == r.rows() ? 1.0 : 0.0;
    }
  }
  return t;
}

Var tts_loss(const TeacherForcedOutput& out, const TtsTargets& targets) {
  return nn::add(nn::masked_mse(out.frames, targets.frames, targets.valid),
                 nn::bce_with_logits(out.stop_logits, targets.stop, targets.valid));
}

}  // namespace pngbert::downstream
