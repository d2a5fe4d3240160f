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

#ifndef PNGBERT_APP_PIPELINE_H_
#define PNGBERT_APP_PIPELINE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pngbert/app/config.h"
#include "pngbert/codec/vocabulary.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/encoder/pretrain.h"
#include "pngbert/metrics/report.h"
#include "pngbert/nn/checkpoint.h"

namespace pngbert::app {

// Raises the glibc mmap and trim thresholds so per-step tensors are reused
// instead of being mapped and unmapped.
void tune_allocator();

struct CorpusBundle {
  corpus::Lexicon lexicon;
  corpus::Dataset dataset;
  codec::Vocabulary vocab;
  corpus::PhonemeEmbedding embedding;
  std::string corpus_hash;  // over every written file
  std::string vocab_hash;
};

inline constexpr const char* kCorpusFiles[] = {"lexicon.tsv", "grammar.tsv", "train.tsv", "valid.tsv",
                                               "test.tsv",    "embedding.tsv", "vocab.tsv"};

CorpusBundle generate_corpus(const ExperimentConfig& config);
// Writes the corpus files plus corpus.json and fills the hashes.
void write_corpus(CorpusBundle& bundle, const ExperimentConfig& config, const std::filesystem::path& dir);
// Throws DataError when a file is missing or no longer matches corpus.json.
CorpusBundle load_corpus(const std::filesystem::path& dir);

// Single-owner claim on a run directory; throws DataError when it is held.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Provenance stored in every checkpoint and report directory.
struct Provenance {
  std::string kind;  // "encoder" or "tts"
  std::string preset;
  std::string config_ini;
  std::string config_hash;
  std::string corpus_hash;
  std::string vocab_hash;

  std::string to_json() const;
  static Provenance from_checkpoint(const nn::Checkpoint& ckpt);
};

struct PretrainOutcome {
  std::filesystem::path best;
  std::filesystem::path last;
  encoder::PretrainResult result;
};

PretrainOutcome run_pretrain(const ExperimentConfig& config, const CorpusBundle& corpus,
                             const std::filesystem::path& out_dir);

struct FinetuneOutcome {
  std::filesystem::path best;
  std::filesystem::path last;
  double best_valid_loss = 0.0;
};

// `preset` overrides config.finetune_preset when nonempty. Presets without
// pretraining reject `init`; the others require it.
FinetuneOutcome run_finetune(const ExperimentConfig& config, const std::string& preset, const CorpusBundle& corpus,
                             const std::optional<std::filesystem::path>& init, const std::filesystem::path& out_dir);

// Metric names: mlm, g2p, p2g, g2p_homograph, aer, cer, monotonic, ta, pa, aa.
std::vector<std::string> parse_metric_list(const std::string& text);

struct EvalRequest {
  std::filesystem::path checkpoint;
  std::vector<std::string> metrics;
  std::filesystem::path out_dir;
  // When set, its hash must equal the checkpoint's.
  std::optional<ExperimentConfig> expected_config;
  // section.key=value applied to the checkpoint's configuration; only the
  // eval and probe sections may change.
  std::vector<std::string> overrides;
};

// Writes report.json (and synthesis.jsonl for synthesis metrics) into
// out_dir. The report carries exactly the requested metrics.
metrics::MetricsReport run_eval(const EvalRequest& request, const CorpusBundle& corpus);

// One row per preset in system-table order; unknown presets follow sorted.
std::string report_csv(const std::vector<metrics::MetricsReport>& reports);
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace pngbert::app

#endif  // PNGBERT_APP_PIPELINE_H_
