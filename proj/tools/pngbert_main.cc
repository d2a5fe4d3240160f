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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pngbert/app/config.h"
#include "pngbert/app/pipeline.h"
#include "pngbert/common/errors.h"

namespace {

namespace fs = std::filesystem;
using pngbert::app::ExperimentConfig;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--config", path, "experiment configuration (INI)");
    if (required) opt->required();
    cmd->add_option("--set", overrides, "override as section.key=value")->take_all();
  }
  ExperimentConfig load() const {
    if (path.empty()) return pngbert::app::parse_config("", overrides);
    return pngbert::app::load_config(path, overrides);
  }
};

void print_rate(const char* name, const std::optional<pngbert::metrics::Rate>& r) {
  if (r) std::printf("  %-24s %.4f  (n=%zu)\n", name, r->value, r->count);
}

void print_report(const pngbert::metrics::MetricsReport& report) {
  std::printf("%s  config %s\n", report.preset.c_str(), report.config_hash.substr(0, 12).c_str());
  print_rate("mlm_acc", report.mlm_acc);
  print_rate("g2p_acc", report.g2p_acc);
  print_rate("p2g_acc", report.p2g_acc);
  print_rate("aer", report.aer);
  print_rate("cer", report.cer);
  print_rate("ta", report.ta);
  print_rate("pa", report.pa);
  print_rate("aa", report.aa);
  for (const auto& [k, v] : report.extra) print_rate(k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  pngbert::app::tune_allocator();
  CLI::App app{"PnG BERT on the ToyJa pitch-accent language"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-corpus", "generate lexicon, splits, embedding table and vocabulary");
  gen_cfg.attach(gen, false);
  gen->add_option("--out", gen_out, "output directory")->required();

  ConfigArgs pre_cfg;
  std::string pre_corpus, pre_out;
  auto* pre = app.add_subcommand("pretrain", "masked language model pretraining");
  pre_cfg.attach(pre, false);
  pre->add_option("--corpus", pre_corpus, "corpus directory")->required();
  pre->add_option("--out", pre_out, "run directory")->required();

  ConfigArgs ft_cfg;
  std::string ft_corpus, ft_out, ft_preset, ft_init;
  auto* ft = app.add_subcommand("finetune", "TTS fine-tuning with a system preset");
  ft_cfg.attach(ft, false);
  ft->add_option("--preset", ft_preset, "system preset (PGB0, PGB2, PGB4, PGB6, PGBN, PGB2T, PGB2MC, PB2MC, TAC, TACT)");
  ft->add_option("--init", ft_init, "pretrained encoder or warm-start checkpoint");
  ft->add_option("--corpus", ft_corpus, "corpus directory")->required();
  ft->add_option("--out", ft_out, "run directory")->required();

  ConfigArgs ev_cfg;
  std::string ev_ckpt, ev_corpus, ev_out, ev_metrics;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev_cfg.attach(ev, false);
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
  ev->add_option("--metrics", ev_metrics, "comma-separated: mlm,g2p,p2g,g2p_homograph,aer,cer,monotonic,ta,pa,aa")
      ->required();
  ev->add_option("--out", ev_out, "output directory")->required();

  ConfigArgs pr_cfg;
  std::string pr_ckpt, pr_corpus, pr_out;
  auto* pr = app.add_subcommand("probe", "linear tone probes on frozen phoneme features");
  pr_cfg.attach(pr, false);
  pr->add_option("--ckpt", pr_ckpt, "checkpoint")->required();
  pr->add_option("--corpus", pr_corpus, "corpus directory")->required();
  pr->add_option("--out", pr_out, "output directory")->required();

  std::string rep_glob, rep_out;
  auto* rep = app.add_subcommand("report", "merge report.json files into one CSV row per system");
  rep->add_option("--glob", rep_glob, "pattern matching report.json files")->required();
  rep->add_option("--out", rep_out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      const ExperimentConfig config = gen_cfg.load();
      auto bundle = pngbert::app::generate_corpus(config);
      pngbert::app::write_corpus(bundle, config, gen_out);
      std::printf("corpus %s  train %zu  valid %zu  test %zu  vocab %zu\n", bundle.corpus_hash.substr(0, 16).c_str(),
                  bundle.dataset.train.size(), bundle.dataset.valid.size(), bundle.dataset.test.size(),
                  bundle.vocab.size());
    } else if (*pre) {
      const ExperimentConfig config = pre_cfg.load();
      const auto corpus = pngbert::app::load_corpus(pre_corpus);
      const auto outcome = pngbert::app::run_pretrain(config, corpus, pre_out);
      const auto& best = outcome.result.best;
      std::printf("pretrained %d steps  best step %d  mlm %.4f  g2p %.4f  p2g %.4f\n", config.pretrain.steps,
                  best.step, best.mlm.rate(), best.g2p.rate(), best.p2g.rate());
      std::printf("checkpoints %s %s\n", outcome.best.c_str(), outcome.last.c_str());
    } else if (*ft) {
      const ExperimentConfig config = ft_cfg.load();
      const auto corpus = pngbert::app::load_corpus(ft_corpus);
      std::optional<fs::path> init;
      if (!ft_init.empty()) init = ft_init;
      const auto outcome = pngbert::app::run_finetune(config, ft_preset, corpus, init, ft_out);
      std::printf("fine-tuned %s  best validation loss %.5f\n",
                  (ft_preset.empty() ? config.finetune_preset : ft_preset).c_str(), outcome.best_valid_loss);
      std::printf("checkpoints %s %s\n", outcome.best.c_str(), outcome.last.c_str());
    } else if (*ev || *pr) {
      const bool probe = pr->parsed();
      const ConfigArgs& cfg = probe ? pr_cfg : ev_cfg;
      pngbert::app::EvalRequest request;
      request.checkpoint = probe ? pr_ckpt : ev_ckpt;
      request.out_dir = probe ? pr_out : ev_out;
      request.metrics = pngbert::app::parse_metric_list(probe ? "ta,pa,aa" : ev_metrics);
      if (!cfg.path.empty()) request.expected_config = pngbert::app::load_config(cfg.path);
      request.overrides = cfg.overrides;
      const auto corpus = pngbert::app::load_corpus(probe ? pr_corpus : ev_corpus);
      print_report(pngbert::app::run_eval(request, corpus));
    } else if (*rep) {
      const auto paths = pngbert::app::expand_glob(rep_glob);
      if (paths.empty()) throw pngbert::DataError("no report matches " + rep_glob);
      std::vector<pngbert::metrics::MetricsReport> reports;
      for (const auto& p : paths) reports.push_back(pngbert::metrics::read_report(p));
      const std::string csv = pngbert::app::report_csv(reports);
      if (rep_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(rep_out, std::ios::trunc);
        if (!(out << csv)) throw pngbert::DataError("cannot write " + rep_out);
        std::printf("merged %zu reports into %s\n", reports.size(), rep_out.c_str());
      }
    }
  } catch (const pngbert::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const pngbert::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const pngbert::DivergenceError& e) {
    std::fprintf(stderr, "numeric divergence: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
