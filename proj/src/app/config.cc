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

#include "pngbert/app/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pngbert/common/errors.h"
#include "pngbert/common/hash.h"
#include "pngbert/common/rng.h"

namespace pngbert::app {

namespace {

using boost::property_tree::ptree;

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text) {
  throw ConfigError("config: cannot parse '" + text + "' for " + key);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, text);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad_value(key, text);
}

class Binder {
 public:
  explicit Binder(std::vector<Entry>& out) : out_(out) {}
  void section(const std::string& s) { section_ = s; }

  template <typename T>
  void number(const std::string& key, T& field) {
    const std::string full = section_ + "." + key;
    out_.push_back({section_, key,
                    [&field] {
                      if constexpr (std::is_floating_point_v<T>) {
                        return format_double(field);
                      } else {
                        return std::to_string(field);
                      }
                    },
                    [&field, full](const std::string& t) { field = parse_number<T>(full, t); }});
  }
  void flag(const std::string& key, bool& field) {
    const std::string full = section_ + "." + key;
    out_.push_back({section_, key, [&field] { return std::string(field ? "true" : "false"); },
                    [&field, full](const std::string& t) { field = parse_bool(full, t); }});
  }
  void text(const std::string& key, std::string& field) {
    out_.push_back({section_, key, [&field] { return field; }, [&field](const std::string& t) { field = t; }});
  }
  void weights(const std::string& key, std::array<double, codec::kStrategyCount>& field) {
    const std::string full = section_ + "." + key;
    out_.push_back({section_, key,
                    [&field] {
                      std::string s;
                      for (double w : field) s += (s.empty() ? "" : ",") + format_double(w);
                      return s;
                    },
                    [&field, full](const std::string& t) {
                      std::stringstream ss(t);
                      std::string item;
                      std::size_t i = 0;
                      std::array<double, codec::kStrategyCount> parsed{};
                      while (std::getline(ss, item, ',')) {
                        if (i >= parsed.size()) bad_value(full, t);
                        parsed[i++] = parse_number<double>(full, item);
                      }
                      if (i != parsed.size()) bad_value(full, t);
                      field = parsed;
                    }});
  }

 private:
  std::vector<Entry>& out_;
  std::string section_;
};

// Every serialized key, in canonical order. Run seed and encoder preset are
// applied before the rest because they choose the defaults.
std::vector<Entry> bind(ExperimentConfig& c) {
  std::vector<Entry> e;
  Binder b(e);
  b.section("run");
  b.number("seed", c.seed);

  b.section("corpus");
  b.number("seed", c.corpus.seed);
  b.number("lexicon_size", c.corpus.lexicon_size);
  b.number("homograph_fraction", c.corpus.homograph_fraction);
  b.number("homophone_fraction", c.corpus.homophone_fraction);
  b.number("word_classes", c.corpus.word_classes);
  b.number("grapheme_inventory", c.corpus.grapheme_inventory);
  b.number("phoneme_inventory", c.corpus.phoneme_inventory);
  b.number("successors_per_word", c.corpus.successors_per_word);
  b.number("min_words", c.corpus.min_words);
  b.number("max_words", c.corpus.max_words);
  b.number("p_join", c.corpus.p_join);
  b.number("train_size", c.corpus.train_size);
  b.number("valid_size", c.corpus.valid_size);
  b.number("test_size", c.corpus.test_size);
  b.number("embedding_min_distance", c.embedding_min_distance);

  b.section("encoder");
  b.text("preset", c.encoder_preset);
  b.number("layers", c.encoder.layers);
  b.number("hidden", c.encoder.hidden);
  b.number("heads", c.encoder.heads);
  b.number("ffn", c.encoder.ffn);
  b.number("max_len", c.encoder.max_len);
  b.number("max_words", c.encoder.max_words);
  b.flag("use_word_positions", c.encoder.use_word_positions);
  b.number("dropout", c.encoder.dropout);

  b.section("masking");
  b.number("select_fraction", c.masking.select_fraction);
  b.weights("weights", c.masking.weights);
  b.flag("loss_on_unchanged", c.masking.loss_on_unchanged);

  b.section("pretrain");
  b.number("seed", c.pretrain.seed);
  b.number("steps", c.pretrain.steps);
  b.number("batch_size", c.pretrain.batch_size);
  b.number("lr", c.pretrain.lr);
  b.number("l2", c.pretrain.l2);
  b.flag("decoupled_l2", c.pretrain.decoupled_l2);
  b.number("eval_every", c.pretrain.eval_every);
  b.number("log_every", c.pretrain.log_every);
  b.number("valid_limit", c.pretrain.valid_limit);
  b.flag("pb_mode", c.pretrain.pb_mode);

  b.section("finetune");
  b.text("preset", c.finetune_preset);
  b.number("seed", c.finetune.seed);
  b.number("steps", c.finetune.steps);
  b.number("batch_size", c.finetune.batch_size);
  b.number("lr", c.finetune.lr);
  b.number("l2", c.finetune.l2);
  b.number("tone_weight", c.finetune.tone_weight);
  b.number("eval_every", c.finetune.eval_every);
  b.number("log_every", c.finetune.log_every);
  b.number("valid_limit", c.finetune.valid_limit);

  b.section("decoder");
  b.number("prenet_dim", c.decoder.prenet_dim);
  b.number("hidden", c.decoder.hidden);
  b.number("attention_dim", c.decoder.attention_dim);
  b.number("prenet_dropout", c.decoder.prenet_dropout);
  b.flag("prenet_dropout_at_inference", c.decoder.prenet_dropout_at_inference);
  b.number("max_steps_per_token", c.decoder.max_steps_per_token);

  b.section("baseline");
  b.number("embedding_dim", c.baseline.embedding_dim);
  b.number("tone_dim", c.baseline.tone_dim);
  b.number("channels", c.baseline.channels);
  b.number("kernel", c.baseline.kernel);
  b.number("conv_layers", c.baseline.conv_layers);
  b.number("lstm_hidden", c.baseline.lstm_hidden);

  b.section("probe");
  b.number("seed", c.probe.probe.seed);
  b.number("lr", c.probe.probe.lr);
  b.number("steps", c.probe.probe.steps);
  b.number("train_limit", c.probe.train_limit);

  b.section("eval");
  b.number("aer_jump_threshold", c.eval.aer.jump_threshold);
  b.number("aer_duration_threshold", c.eval.aer.duration_threshold);
  b.flag("aer_consecutive_duration", c.eval.aer.consecutive_duration);
  b.number("synth_limit", c.eval.synth_limit);
  b.number("batch_size", c.eval.batch_size);
  return e;
}

ptree parse_ini(const std::string& text) {
  ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
  return tree;
}

void apply_override(ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq) {
    throw ConfigError("config: override '" + assignment + "' is not section.key=value");
  }
  const std::string section = assignment.substr(0, dot), key = assignment.substr(dot + 1, eq - dot - 1);
  tree.put_child(ptree::path_type(section + '\x1f' + key, '\x1f'), ptree(assignment.substr(eq + 1)));
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.corpus.seed = seed;
  c.encoder = encoder::EncoderConfig::desk();
  // Desk-scale schedules; the library defaults keep the published values.
  c.pretrain.lr = 3e-3;
  c.finetune.steps = 2000;
  c.pretrain.seed = derive_seed(seed, {0x707265ULL});
  c.finetune.seed = derive_seed(seed, {0x66696eULL});
  c.probe.probe.seed = derive_seed(seed, {0x70726fULL});
  return c;
}

std::string ExperimentConfig::to_ini() const {
  ExperimentConfig copy = *this;
  std::string out, section;
  for (const Entry& e : bind(copy)) {
    if (e.section != section) {
      out += (out.empty() ? "[" : "\n[") + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get() + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_ini()); }

void ExperimentConfig::validate() const {
  corpus.validate();
  if (!(embedding_min_distance > 0.0)) throw ConfigError("config: embedding_min_distance must be positive");
  encoder::EncoderConfig e = encoder;
  e.vocab_size = 5;
  e.validate();
  codec::MaskingPolicy m = masking;
  m.validate();
  encoder::PretrainConfig p = pretrain;
  p.policy = masking;
  p.validate();
  downstream::finetune_preset(finetune_preset);
  finetune.validate();
  decoder.validate();
  downstream::BaselineConfig bl = baseline;
  bl.vocab_size = 1;
  bl.validate();
  if (probe.probe.steps < 1 || !(probe.probe.lr > 0.0) || probe.train_limit < 1) {
    throw ConfigError("config: probe settings must be positive");
  }
  if (eval.aer.jump_threshold < 0 || eval.aer.duration_threshold < 1 || eval.synth_limit < 1 ||
      eval.batch_size < 1) {
    throw ConfigError("config: eval settings out of range");
  }
}

ExperimentConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides) {
  ptree tree = parse_ini(ini_text);
  for (const auto& o : overrides) apply_override(tree, o);

  std::uint64_t seed = 1;
  if (auto s = tree.get_optional<std::string>(ptree::path_type("run\x1fseed", '\x1f'))) {
    seed = parse_number<std::uint64_t>("run.seed", *s);
  }
  ExperimentConfig c = ExperimentConfig::defaults(seed);
  if (auto p = tree.get_optional<std::string>(ptree::path_type("encoder\x1fpreset", '\x1f'))) {
    c.encoder = encoder::EncoderConfig::preset(*p);
  }

  std::vector<Entry> entries = bind(c);
  std::map<std::string, std::set<std::string>> known;
  for (const Entry& e : entries) known[e.section].insert(e.key);
  for (const auto& [section, body] : tree) {
    if (!known.count(section)) throw ConfigError("config: unknown section [" + section + "]");
    if (!body.data().empty() && body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!known[section].count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
  for (const Entry& e : entries) {
    if (auto v = tree.get_optional<std::string>(ptree::path_type(e.section + '\x1f' + e.key, '\x1f'))) e.set(*v);
  }
  c.pretrain.policy = c.masking;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace pngbert::app
