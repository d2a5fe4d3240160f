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

#include "pngbert/encoder/pretrain.h"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pngbert/common/errors.h"
#include "pngbert/nn/checkpoint.h"

namespace pngbert::encoder {

namespace {

using nlohmann::json;

void save(const std::filesystem::path& path, const nn::ParameterStore& params, const nn::OptimizerState& optimizer,
          const std::string& metadata, const ValidationScores& scores, int step) {
  json meta = metadata.empty() ? json::object() : json::parse(metadata);
  meta["kind"] = "encoder";
  meta["step"] = step;
  meta["valid"] = {{"mlm_acc", scores.mlm.rate()}, {"g2p_acc", scores.g2p.rate()}, {"p2g_acc", scores.p2g.rate()}};
  nn::Checkpoint ckpt;
  ckpt.metadata = meta.dump();
  nn::append_parameters(ckpt, params);
  nn::append_optimizer(ckpt, optimizer);
  nn::write_checkpoint(path, ckpt);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {0x6f72646572ULL, epoch});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void PretrainConfig::validate() const {
  if (steps < 0) throw ConfigError("pretrain: steps must be nonnegative");
  if (batch_size < 1) throw ConfigError("pretrain: batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("pretrain: lr must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("pretrain: l2 must be nonnegative");
  if (eval_every < 1 || log_every < 1) throw ConfigError("pretrain: eval_every and log_every must be positive");
  policy.validate();
}

codec::MaskedSequence pretraining_example(const codec::TokenSequence& seq, const codec::Vocabulary& vocab,
                                          const PretrainConfig& pretrain, std::uint64_t epoch, std::uint64_t index) {
  Rng rng = codec::masking_rng(pretrain.seed, epoch, index);
  codec::MaskedSequence m = codec::mask_for_mlm(seq, vocab, pretrain.policy, rng);
  if (pretrain.pb_mode) {
    m.input = codec::mask_graphemes_for_inference(m.input);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (seq.segment_ids[t] == 1) m.loss_mask[t] = 0;
    }
  }
  return m;
}

ValidationScores validate_encoder(nn::ParameterStore& params, const EncoderConfig& config,
                                  const codec::Vocabulary& vocab, const std::vector<codec::TokenSequence>& valid,
                                  const PretrainConfig& pretrain, int step) {
  const std::size_t n = std::min(valid.size(), pretrain.valid_limit);
  const std::vector<codec::TokenSequence> subset(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(n));
  EvalOptions opts;
  opts.policy = pretrain.policy;
  opts.mask_grapheme_input = pretrain.pb_mode;
  ValidationScores s;
  s.step = step;
  s.mlm = masked_accuracy(params, config, vocab, subset, MaskMode::kMlm, opts);
  s.g2p = masked_accuracy(params, config, vocab, subset, MaskMode::kG2p, opts);
  s.p2g = masked_accuracy(params, config, vocab, subset, MaskMode::kP2g, opts);
  return s;
}

PretrainResult pretrain(const EncoderConfig& config, const PretrainConfig& pc, nn::ParameterStore& params,
                        nn::OptimizerState& optimizer, const std::vector<codec::TokenSequence>& train,
                        const std::vector<codec::TokenSequence>& valid, const codec::Vocabulary& vocab,
                        const PretrainIo& io) {
  config.validate();
  pc.validate();
  if (train.empty()) throw DataError("pretrain: empty training corpus");
  optimizer.config.l2_coefficient = pc.l2;
  optimizer.config.decoupled = pc.decoupled_l2;
  if (!io.out_dir.empty()) std::filesystem::create_directories(io.out_dir);

  PretrainResult result;
  const std::size_t n = train.size();
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> order;
  double window = 0.0;
  int window_count = 0;

  for (int step = static_cast<int>(optimizer.step); step < pc.steps; ++step) {
    std::vector<codec::MaskedSequence> batch;
    for (int b = 0; b < pc.batch_size; ++b) {
      const std::uint64_t global = static_cast<std::uint64_t>(step) * pc.batch_size + b;
      const std::uint64_t epoch = global / n;
      if (epoch != cached_epoch) {
        order = epoch_order(n, pc.seed, epoch);
        cached_epoch = epoch;
      }
      const std::size_t index = order[global % n];
      batch.push_back(pretraining_example(train[index], vocab, pc, epoch, index));
    }
    std::vector<const codec::TokenSequence*> inputs;
    for (const auto& m : batch) inputs.push_back(&m.input);
    const EncoderBatch packed = pack(inputs);
    std::vector<int> rows, targets;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      for (std::size_t t = 0; t < batch[k].loss_mask.size(); ++t) {
        if (!batch[k].loss_mask[t]) continue;
        rows.push_back(static_cast<int>(packed.offsets[k] + t));
        targets.push_back(batch[k].target[t]);
      }
    }
    const double lr = nn::linear_decay_lr(step, pc.steps, pc.lr);
    double loss_value = 0.0;
    try {
      nn::Graph g;
      Rng dropout_rng = make_rng(pc.seed, {0x64726f70ULL, static_cast<std::uint64_t>(step)});
      const EncoderOutput enc = encode(g, params, config, packed, true, dropout_rng);
      nn::Var logits = mlm_logits(g, params, enc.final, rows);
      nn::Var loss = nn::cross_entropy(logits, targets, std::vector<unsigned char>(targets.size(), 1));
      loss_value = loss.value()[0];
      params.zero_grad();
      g.backward(loss);
      nn::adam_step(params, optimizer, lr);
    } catch (const DivergenceError& e) {
      throw DivergenceError("pretraining diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.losses.push_back(loss_value);
    window += loss_value;
    ++window_count;

    const int done = step + 1;
    const bool eval_now = done % pc.eval_every == 0 || done == pc.steps;
    json line;
    if (done % pc.log_every == 0 || eval_now) {
      line = {{"step", done}, {"loss", window / window_count}, {"lr", lr}};
      window = 0.0;
      window_count = 0;
    }
    if (eval_now && !valid.empty()) {
      result.last = validate_encoder(params, config, vocab, valid, pc, done);
      line["mlm_acc"] = result.last.mlm.rate();
      line["g2p_acc"] = result.last.g2p.rate();
      line["p2g_acc"] = result.last.p2g.rate();
      const bool improved = result.best.step < 0 || result.last.score() > result.best.score();
      if (improved) result.best = result.last;
      if (!io.out_dir.empty()) {
        save(io.out_dir / "last.ckpt", params, optimizer, io.metadata, result.last, done);
        if (improved) save(io.out_dir / "best.ckpt", params, optimizer, io.metadata, result.last, done);
      }
    }
    if (!line.is_null() && io.log) *io.log << line.dump() << '\n' << std::flush;
  }
  return result;
}

}  // namespace pngbert::encoder
