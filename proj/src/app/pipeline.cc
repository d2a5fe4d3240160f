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

#include "pngbert/app/pipeline.h"

#include <fcntl.h>
#include <glob.h>
#include <malloc.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pngbert/codec/sequence.h"
#include "pngbert/common/errors.h"
#include "pngbert/common/hash.h"
#include "pngbert/common/rng.h"
#include "pngbert/corpus/dataset_io.h"
#include "pngbert/downstream/presets.h"
#include "pngbert/downstream/tts_model.h"
#include "pngbert/encoder/evaluation.h"
#include "pngbert/metrics/metrics.h"
#include "pngbert/metrics/probe.h"

namespace pngbert::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kEmbeddingStream = 0x656d62ULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kSynthesisStream = 0x73796eULL;

const std::set<std::string> kMetricNames = {"mlm", "g2p", "p2g", "g2p_homograph", "aer",
                                            "cer", "monotonic", "ta", "pa", "aa"};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

std::string combine_hashes(const std::map<std::string, std::string>& files) {
  std::string text;
  for (const char* name : kCorpusFiles) text += std::string(name) + " " + files.at(name) + "\n";
  return sha256_hex(text);
}

encoder::EncoderConfig resolved_encoder(const ExperimentConfig& config, const codec::Vocabulary& vocab) {
  encoder::EncoderConfig e = config.encoder;
  e.vocab_size = static_cast<int>(vocab.size());
  e.validate();
  return e;
}

std::string architecture(const encoder::EncoderConfig& e) {
  std::ostringstream s;
  s << e.layers << "/" << e.hidden << "/" << e.heads << "/" << e.ffn_dim() << "/" << e.max_len << "/" << e.max_words
    << "/" << e.use_word_positions;
  return s.str();
}

std::vector<codec::TokenSequence> assemble_all(const std::vector<corpus::Sentence>& sentences,
                                               const codec::Vocabulary& vocab, bool word_positions) {
  std::vector<codec::TokenSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(codec::assemble_sequence(s, vocab, word_positions));
  return out;
}

std::vector<downstream::TtsExample> tts_examples(const std::vector<corpus::Sentence>& sentences, std::size_t limit,
                                                 const CorpusBundle& corpus, bool mask_graphemes) {
  std::vector<downstream::TtsExample> out;
  const std::size_t n = std::min(limit, sentences.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(downstream::make_tts_example(sentences[i], corpus.vocab, corpus.embedding, mask_graphemes));
  }
  return out;
}

void check_corpus(const Provenance& p, const CorpusBundle& corpus) {
  if (p.vocab_hash != corpus.vocab_hash) {
    throw DataError("vocabulary hash mismatch: checkpoint " + p.vocab_hash.substr(0, 12) + ", corpus " +
                    corpus.vocab_hash.substr(0, 12));
  }
  if (p.corpus_hash != corpus.corpus_hash) {
    throw DataError("corpus hash mismatch: checkpoint " + p.corpus_hash.substr(0, 12) + ", corpus " +
                    corpus.corpus_hash.substr(0, 12));
  }
}

Provenance provenance(const std::string& kind, const std::string& preset, const ExperimentConfig& config,
                      const CorpusBundle& corpus) {
  return {kind, preset, config.to_ini(), config.hash(), corpus.corpus_hash, corpus.vocab_hash};
}

std::unique_ptr<std::ofstream> open_log(const fs::path& path) {
  auto log = std::make_unique<std::ofstream>(path, std::ios::trunc);
  if (!*log) throw DataError("cannot write " + path.string());
  return log;
}

// Final-layer phoneme-span features and tone labels of every example.
std::pair<nn::Tensor, std::vector<int>> probe_features(nn::ParameterStore& params,
                                                       const downstream::TtsModelConfig& config,
                                                       const std::vector<downstream::TtsExample>& examples,
                                                       std::size_t batch_size) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  Rng rng = make_rng(0, {});
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const std::size_t end = std::min(examples.size(), begin + batch_size);
    std::vector<const downstream::TtsExample*> batch;
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(&examples[i]);
      labels.insert(labels.end(), examples[i].tones.begin(), examples[i].tones.end());
    }
    nn::Graph g(false);
    const downstream::Memory memory = downstream::phoneme_features(g, params, config, batch, false, rng);
    const nn::Tensor& f = memory.features.value();
    width = f.cols();
    values.insert(values.end(), f.values().begin(), f.values().end());
  }
  return {nn::Tensor({labels.size(), width}, std::move(values)), labels};
}

metrics::Rate rate_of(const encoder::Accuracy& a) { return {a.rate(), a.total}; }

}  // namespace

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

CorpusBundle generate_corpus(const ExperimentConfig& config) {
  config.corpus.validate();
  CorpusBundle b;
  b.lexicon = corpus::build_lexicon(config.corpus);
  b.dataset = corpus::generate_dataset(b.lexicon, config.corpus);
  b.vocab = codec::build_vocabulary(b.lexicon);
  b.embedding = corpus::make_phoneme_embedding(b.lexicon.phoneme_inventory,
                                               derive_seed(config.corpus.seed, {kEmbeddingStream}),
                                               config.embedding_min_distance);
  return b;
}

void write_corpus(CorpusBundle& bundle, const ExperimentConfig& config, const fs::path& dir) {
  prepare_dir(dir);
  corpus::write_lexicon(dir / "lexicon.tsv", bundle.lexicon);
  corpus::write_grammar(dir / "grammar.tsv", bundle.lexicon);
  corpus::write_dataset(dir / "train.tsv", bundle.dataset.train);
  corpus::write_dataset(dir / "valid.tsv", bundle.dataset.valid);
  corpus::write_dataset(dir / "test.tsv", bundle.dataset.test);
  corpus::write_embedding(dir / "embedding.tsv", bundle.embedding);
  codec::write_vocabulary(dir / "vocab.tsv", bundle.vocab);

  std::map<std::string, std::string> files;
  for (const char* name : kCorpusFiles) files[name] = sha256_file(dir / name);
  bundle.corpus_hash = combine_hashes(files);
  bundle.vocab_hash = files.at("vocab.tsv");

  json meta;
  meta["corpus_hash"] = bundle.corpus_hash;
  meta["vocab_hash"] = bundle.vocab_hash;
  meta["files"] = files;
  meta["sizes"] = {{"train", bundle.dataset.train.size()},
                   {"valid", bundle.dataset.valid.size()},
                   {"test", bundle.dataset.test.size()},
                   {"lexicon", bundle.lexicon.entries.size()},
                   {"vocab", bundle.vocab.size()}};
  meta["config"] = config.to_ini();
  meta["config_hash"] = config.hash();
  write_text(dir / "corpus.json", meta.dump(2) + "\n");
}

CorpusBundle load_corpus(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text(dir / "corpus.json"));
  } catch (const json::exception& e) {
    throw DataError("corpus.json: " + std::string(e.what()));
  }
  std::map<std::string, std::string> files;
  for (const char* name : kCorpusFiles) {
    if (!fs::exists(dir / name)) throw DataError("corpus file missing: " + (dir / name).string());
    files[name] = sha256_file(dir / name);
    const auto recorded = meta["files"].value(name, std::string());
    if (recorded != files[name]) throw DataError("corpus file changed since generation: " + (dir / name).string());
  }
  CorpusBundle b;
  b.lexicon = corpus::read_lexicon(dir / "lexicon.tsv", dir / "grammar.tsv");
  b.dataset.train = corpus::read_dataset(dir / "train.tsv", &b.lexicon);
  b.dataset.valid = corpus::read_dataset(dir / "valid.tsv", &b.lexicon);
  b.dataset.test = corpus::read_dataset(dir / "test.tsv", &b.lexicon);
  b.embedding = corpus::read_embedding(dir / "embedding.tsv");
  b.vocab = codec::read_vocabulary(dir / "vocab.tsv");
  b.corpus_hash = combine_hashes(files);
  b.vocab_hash = files.at("vocab.tsv");
  return b;
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  prepare_dir(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw DataError("run directory " + dir.string() + " is locked by another process (" + path_.string() + ")");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string Provenance::to_json() const {
  json j = {{"kind", kind},
            {"preset", preset},
            {"config", config_ini},
            {"config_hash", config_hash},
            {"corpus_hash", corpus_hash},
            {"vocab_hash", vocab_hash}};
  return j.dump();
}

Provenance Provenance::from_checkpoint(const nn::Checkpoint& ckpt) {
  try {
    const json j = json::parse(ckpt.metadata);
    Provenance p;
    p.kind = j.at("kind").get<std::string>();
    p.preset = j.value("preset", std::string());
    p.config_ini = j.at("config").get<std::string>();
    p.config_hash = j.at("config_hash").get<std::string>();
    p.corpus_hash = j.at("corpus_hash").get<std::string>();
    p.vocab_hash = j.at("vocab_hash").get<std::string>();
    return p;
  } catch (const json::exception& e) {
    throw DataError("checkpoint lacks provenance metadata: " + std::string(e.what()));
  }
}

PretrainOutcome run_pretrain(const ExperimentConfig& config, const CorpusBundle& corpus, const fs::path& out_dir) {
  config.validate();
  RunLock lock(out_dir);
  const encoder::EncoderConfig ec = resolved_encoder(config, corpus.vocab);
  encoder::PretrainConfig pc = config.pretrain;
  pc.policy = config.masking;
  pc.validate();

  const auto train = assemble_all(corpus.dataset.train, corpus.vocab, ec.use_word_positions);
  const auto valid = assemble_all(corpus.dataset.valid, corpus.vocab, ec.use_word_positions);
  nn::ParameterStore params;
  encoder::init_encoder(ec, params, derive_seed(pc.seed, {kInitStream}));
  nn::OptimizerState optimizer;

  write_text(out_dir / "config.ini", config.to_ini());
  auto log = open_log(out_dir / "pretrain.jsonl");
  encoder::PretrainIo io;
  io.out_dir = out_dir;
  io.metadata = provenance("encoder", pc.pb_mode ? "PB" : "PnG", config, corpus).to_json();
  io.log = log.get();

  PretrainOutcome outcome;
  outcome.result = encoder::pretrain(ec, pc, params, optimizer, train, valid, corpus.vocab, io);
  outcome.best = out_dir / "best.ckpt";
  outcome.last = out_dir / "last.ckpt";
  return outcome;
}

FinetuneOutcome run_finetune(const ExperimentConfig& config, const std::string& preset_name,
                             const CorpusBundle& corpus, const std::optional<fs::path>& init,
                             const fs::path& out_dir) {
  config.validate();
  const std::string name = preset_name.empty() ? config.finetune_preset : preset_name;
  downstream::TtsModelConfig tc;
  tc.preset = downstream::finetune_preset(name);
  tc.encoder = config.encoder;
  tc.baseline = config.baseline;
  tc.decoder = config.decoder;
  tc.resolve(static_cast<int>(corpus.vocab.size()));

  if (!tc.preset.pretrained && init) throw ConfigError("preset " + name + " trains from scratch and rejects --init");
  if (tc.preset.pretrained && !init) throw ConfigError("preset " + name + " needs --init with a pretrained checkpoint");

  nn::ParameterStore params;
  downstream::init_tts_model(tc, params, derive_seed(config.finetune.seed, {kInitStream}));
  if (init) {
    if (!fs::exists(*init)) throw DataError("checkpoint not found: " + init->string());
    const nn::Checkpoint ckpt = nn::read_checkpoint(*init);
    const Provenance p = Provenance::from_checkpoint(ckpt);
    check_corpus(p, corpus);
    const ExperimentConfig source = parse_config(p.config_ini);
    if (architecture(source.encoder) != architecture(config.encoder)) {
      throw ConfigError("encoder architecture of " + init->string() + " differs from the configuration");
    }
    if (p.kind == "encoder") {
      if (source.pretrain.pb_mode != tc.preset.phoneme_only_pretraining) {
        throw ConfigError("preset " + name + (tc.preset.phoneme_only_pretraining ? " needs" : " rejects") +
                          " a phoneme-only pretrained encoder");
      }
    } else if (p.kind == "tts") {
      if (p.preset != tc.preset.warm_start_from) {
        throw ConfigError("preset " + name + " cannot start from a " + p.preset + " checkpoint" +
                          (tc.preset.warm_start_from.empty() ? "" : " (expected " + tc.preset.warm_start_from + ")"));
      }
    } else {
      throw DataError("unknown checkpoint kind " + p.kind);
    }
    nn::load_parameters(ckpt, params);
  }

  RunLock lock(out_dir);
  const auto train = tts_examples(corpus.dataset.train, corpus.dataset.train.size(), corpus, tc.preset.grapheme_mask);
  const auto valid = tts_examples(corpus.dataset.valid, corpus.dataset.valid.size(), corpus, tc.preset.grapheme_mask);
  write_text(out_dir / "config.ini", config.to_ini());
  auto log = open_log(out_dir / "finetune.jsonl");
  downstream::FinetuneIo io;
  io.out_dir = out_dir;
  io.metadata = provenance("tts", name, config, corpus).to_json();
  io.log = log.get();
  nn::OptimizerState optimizer;
  const auto result = downstream::finetune(tc, config.finetune, params, optimizer, train, valid, io);
  return {out_dir / "best.ckpt", out_dir / "last.ckpt", result.best_valid_loss};
}

std::vector<std::string> parse_metric_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (!kMetricNames.count(item)) throw ConfigError("unknown metric '" + item + "'");
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("no metrics requested");
  return out;
}

metrics::MetricsReport run_eval(const EvalRequest& request, const CorpusBundle& corpus) {
  if (!fs::exists(request.checkpoint)) throw DataError("checkpoint not found: " + request.checkpoint.string());
  const nn::Checkpoint ckpt = nn::read_checkpoint(request.checkpoint);
  const Provenance prov = Provenance::from_checkpoint(ckpt);
  if (request.expected_config && request.expected_config->hash() != prov.config_hash) {
    throw ConfigError("configuration hash " + request.expected_config->hash().substr(0, 12) +
                      " does not match the checkpoint's " + prov.config_hash.substr(0, 12));
  }
  check_corpus(prov, corpus);
  for (const auto& o : request.overrides) {
    if (o.rfind("eval.", 0) != 0 && o.rfind("probe.", 0) != 0) {
      throw ConfigError("evaluation may only override eval.* and probe.* settings, not '" + o + "'");
    }
  }
  const ExperimentConfig config = parse_config(prov.config_ini, request.overrides);
  std::set<std::string> wanted(request.metrics.begin(), request.metrics.end());
  for (const auto& m : wanted) {
    if (!kMetricNames.count(m)) throw ConfigError("unknown metric '" + m + "'");
  }

  downstream::TtsModelConfig tc;
  const bool is_tts = prov.kind == "tts";
  if (is_tts) {
    tc.preset = downstream::finetune_preset(prov.preset);
  } else if (prov.kind == "encoder") {
    tc.preset = downstream::finetune_preset(config.pretrain.pb_mode ? "PB2MC" : "PGB0");
  } else {
    throw DataError("unknown checkpoint kind " + prov.kind);
  }
  tc.encoder = config.encoder;
  tc.baseline = config.baseline;
  tc.decoder = config.decoder;
  tc.resolve(static_cast<int>(corpus.vocab.size()));
  const bool png = tc.preset.encoder == downstream::EncoderKind::kPngBert;
  for (const char* m : {"mlm", "g2p", "p2g", "g2p_homograph"}) {
    if (wanted.count(m) && !png) throw ConfigError(std::string("metric ") + m + " needs a PnG BERT encoder");
  }
  for (const char* m : {"aer", "cer", "monotonic"}) {
    if (wanted.count(m) && !is_tts) throw ConfigError(std::string("metric ") + m + " needs a fine-tuned TTS checkpoint");
  }

  nn::ParameterStore params;
  downstream::init_tts_model(tc, params, 0);
  nn::load_parameters(ckpt, params);
  prepare_dir(request.out_dir);

  metrics::MetricsReport report;
  report.preset = is_tts ? prov.preset : (config.pretrain.pb_mode ? "PB" : "PnG");
  report.config_hash = prov.config_hash;
  report.seeds = {{"run", config.seed},
                  {"corpus", config.corpus.seed},
                  {"pretrain", config.pretrain.seed},
                  {"finetune", config.finetune.seed},
                  {"probe", config.probe.probe.seed}};

  const auto& test = corpus.dataset.test;
  if (png && (wanted.count("mlm") || wanted.count("p2g"))) {
    const auto seqs = assemble_all(test, corpus.vocab, tc.encoder.use_word_positions);
    encoder::EvalOptions opts;
    opts.policy = config.masking;
    opts.mask_grapheme_input = tc.preset.grapheme_mask;
    if (wanted.count("mlm")) {
      report.mlm_acc = rate_of(encoder::masked_accuracy(params, tc.encoder, corpus.vocab, seqs,
                                                        encoder::MaskMode::kMlm, opts));
    }
    if (wanted.count("p2g")) {
      report.p2g_acc = rate_of(encoder::masked_accuracy(params, tc.encoder, corpus.vocab, seqs,
                                                        encoder::MaskMode::kP2g, opts));
    }
  }
  if (png && (wanted.count("g2p") || wanted.count("g2p_homograph"))) {
    encoder::EvalOptions opts;
    opts.mask_grapheme_input = tc.preset.grapheme_mask;
    const auto g2p = metrics::g2p_accuracy(params, tc.encoder, corpus.vocab, test, corpus.lexicon, opts);
    if (wanted.count("g2p")) report.g2p_acc = rate_of(g2p.all);
    if (wanted.count("g2p_homograph")) {
      report.extra["g2p_homograph"] = rate_of(g2p.homographs);
      report.extra["reading_prior_homograph"] =
          rate_of(metrics::reading_prior_accuracy(corpus.dataset.train, test, corpus.lexicon, true));
    }
  }

  if (wanted.count("aer") || wanted.count("cer") || wanted.count("monotonic")) {
    const auto examples = tts_examples(test, config.eval.synth_limit, corpus, tc.preset.grapheme_mask);
    const auto synth = downstream::synthesize(params, tc, examples, derive_seed(config.seed, {kSynthesisStream}),
                                              config.eval.batch_size);
    std::vector<metrics::AttentionRecord> records;
    std::vector<std::vector<std::string>> refs, hyps;
    std::ofstream jsonl(request.out_dir / "synthesis.jsonl", std::ios::trunc);
    if (!jsonl) throw DataError("cannot write " + (request.out_dir / "synthesis.jsonl").string());
    std::size_t ref_symbols = 0;
    for (std::size_t i = 0; i < synth.size(); ++i) {
      const auto& u = synth[i].utterance;
      records.push_back({i, u.alignment, u.hit_max_steps});
      refs.push_back(examples[i].phonemes);
      ref_symbols += examples[i].phonemes.size();
      hyps.push_back(metrics::oracle_decode(u.frames, corpus.embedding));
      downstream::SynthesisRecord rec;
      rec.sentence_id = i;
      rec.stop_step = u.stop_step;
      rec.attention_path = downstream::attention_path(u.alignment);
      rec.decoded_phonemes = hyps.back();
      if (!synth[i].predicted_tones.empty()) {
        std::vector<std::string> tones;
        for (int t : synth[i].predicted_tones) tones.emplace_back(corpus::kToneSymbols[t]);
        rec.predicted_tones = tones;
      }
      downstream::write_synthesis_record(jsonl, rec);
    }
    if (wanted.count("aer")) report.aer = metrics::Rate{metrics::attention_error_rate(records, config.eval.aer), records.size()};
    if (wanted.count("cer")) report.cer = metrics::Rate{metrics::cer(refs, hyps), ref_symbols};
    if (wanted.count("monotonic")) report.extra["monotonic"] = {metrics::monotonic_fraction(records), records.size()};
  }

  if (wanted.count("ta") || wanted.count("pa") || wanted.count("aa")) {
    const auto train = tts_examples(corpus.dataset.train, config.probe.train_limit, corpus, tc.preset.grapheme_mask);
    const auto eval = tts_examples(test, test.size(), corpus, tc.preset.grapheme_mask);
    const auto [train_f, train_l] = probe_features(params, tc, train, config.eval.batch_size);
    const auto [eval_f, eval_l] = probe_features(params, tc, eval, config.eval.batch_size);
    const auto probe = metrics::linear_probe(train_f, train_l, eval_f, eval_l, config.probe.probe);
    if (wanted.count("ta")) report.ta = rate_of(probe.ta);
    if (wanted.count("pa")) report.pa = rate_of(probe.pa);
    if (wanted.count("aa")) report.aa = rate_of(probe.aa);
  }

  report.validate();
  metrics::write_report(request.out_dir / "report.json", report);
  return report;
}

std::string report_csv(const std::vector<metrics::MetricsReport>& reports) {
  std::map<std::string, std::vector<const metrics::MetricsReport*>> by_preset;
  for (const auto& r : reports) by_preset[r.preset].push_back(&r);

  std::vector<std::string> order = downstream::preset_names();
  for (const auto& [name, rs] : by_preset) {
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
  }

  // Median over repeated runs of one preset, per column.
  auto median = [](std::vector<metrics::Rate> v) -> std::optional<metrics::Rate> {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    const std::size_t n = v.size();
    metrics::Rate m = v[n / 2];
    if (n % 2 == 0) m.value = 0.5 * (v[n / 2 - 1].value + v[n / 2].value);
    return m;
  };
  using Field = std::optional<metrics::Rate> metrics::MetricsReport::*;
  const std::array<Field, 8> fields = {&metrics::MetricsReport::mlm_acc, &metrics::MetricsReport::g2p_acc,
                                       &metrics::MetricsReport::p2g_acc, &metrics::MetricsReport::aer,
                                       &metrics::MetricsReport::cer,     &metrics::MetricsReport::ta,
                                       &metrics::MetricsReport::pa,      &metrics::MetricsReport::aa};

  std::string csv = metrics::MetricsReport::csv_header() + "\n";
  for (const auto& name : order) {
    auto it = by_preset.find(name);
    if (it == by_preset.end()) continue;
    metrics::MetricsReport merged;
    merged.preset = name;
    for (Field f : fields) {
      std::vector<metrics::Rate> values;
      for (const auto* r : it->second) {
        if (r->*f) values.push_back(*(r->*f));
      }
      merged.*f = median(values);
    }
    csv += merged.csv_row() + "\n";
  }
  return csv;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw DataError("glob failed for " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pngbert::app
