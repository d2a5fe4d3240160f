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

#include "pngbert/corpus/dataset_io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pngbert/common/errors.h"

namespace pngbert::corpus {

namespace {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based byte column in the line
};

[[noreturn]] void fail(std::size_t line, std::size_t column, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

std::vector<Token> split(std::string_view s, char sep, std::size_t base_column) {
  std::vector<Token> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back({s.substr(start, i - start), base_column + start});
      start = i + 1;
    }
  }
  return out;
}

struct ParsedWord {
  bool phrase_start = false;
  std::vector<std::string> symbols;
  std::size_t column = 0;
};

// One column: words separated by "|", phrase-initial words prefixed "^".
std::vector<ParsedWord> parse_column(const Token& column, std::size_t line) {
  std::vector<ParsedWord> words(1);
  words[0].column = column.column;
  for (const Token& t : split(column.text, ' ', column.column)) {
    if (t.text.empty()) fail(line, t.column, "empty token (doubled or stray space)");
    if (t.text == "|") {
      if (words.back().symbols.empty()) fail(line, t.column, "empty word before '|'");
      words.emplace_back();
      words.back().column = t.column + 2;
      continue;
    }
    std::string_view sym = t.text;
    if (sym.front() == '^') {
      if (!words.back().symbols.empty()) fail(line, t.column, "'^' inside a word");
      words.back().phrase_start = true;
      sym.remove_prefix(1);
      if (sym.empty()) fail(line, t.column, "bare '^'");
    }
    words.back().symbols.emplace_back(sym);
  }
  if (words.back().symbols.empty()) fail(line, column.column + column.text.size(), "empty word at end of column");
  return words;
}

std::string join_words(const Sentence& s, const std::vector<std::vector<std::string>>& per_word) {
  std::string out;
  for (std::size_t i = 0; i < per_word.size(); ++i) {
    if (i) out += " | ";
    if (s.phrase_breaks[i]) out += "^";
    for (std::size_t k = 0; k < per_word[i].size(); ++k) {
      if (k) out += " ";
      out += per_word[i][k];
    }
  }
  return out;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

int parse_int(const Token& t, std::size_t line, const char* what) {
  int v = 0;
  const auto* end = t.text.data() + t.text.size();
  auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, t.column, std::string("bad ") + what + " '" + std::string(t.text) + "'");
  return v;
}

std::vector<std::string> split_symbols(std::string_view s) {
  std::vector<std::string> out;
  for (const Token& t : split(s, ' ', 1)) {
    if (!t.text.empty()) out.emplace_back(t.text);
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string format_sentence(const Sentence& s) {
  std::vector<std::vector<std::string>> g, p, t;
  for (const Word& w : s.words) {
    g.push_back(w.graphemes);
    p.push_back(w.phonemes);
    std::vector<std::string> tones;
    for (Tone x : w.tones) tones.emplace_back(tone_symbol(x));
    t.push_back(std::move(tones));
  }
  return join_words(s, g) + "\t" + join_words(s, p) + "\t" + join_words(s, t);
}

Sentence parse_sentence(std::string_view line, std::size_t line_number, const Lexicon* lexicon) {
  const std::vector<Token> columns = split(line, '\t', 1);
  if (columns.size() != 3) {
    fail(line_number, columns.size() > 3 ? columns[3].column : line.size() + 1,
         "expected 3 TAB-separated columns, found " + std::to_string(columns.size()));
  }
  const auto g = parse_column(columns[0], line_number);
  const auto p = parse_column(columns[1], line_number);
  const auto t = parse_column(columns[2], line_number);
  if (p.size() != g.size()) fail(line_number, columns[1].column, "phoneme column has a different word count than graphemes");
  if (t.size() != g.size()) fail(line_number, columns[2].column, "tone column has a different word count than graphemes");

  Sentence s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].phrase_start != p[i].phrase_start || g[i].phrase_start != t[i].phrase_start) {
      fail(line_number, p[i].column, "phrase marks disagree between columns for word " + std::to_string(i + 1));
    }
    if (t[i].symbols.size() != p[i].symbols.size()) {
      fail(line_number, t[i].column,
           "alignment error: word " + std::to_string(i + 1) + " has " + std::to_string(p[i].symbols.size()) +
               " phonemes but " + std::to_string(t[i].symbols.size()) + " tones");
    }
    Word w;
    w.graphemes = g[i].symbols;
    w.phonemes = p[i].symbols;
    for (const auto& sym : t[i].symbols) {
      auto tone = parse_tone(sym);
      if (!tone) fail(line_number, t[i].column, "unknown tone label '" + sym + "'");
      w.tones.push_back(*tone);
    }
    if (lexicon) {
      w.lexicon_id = lexicon->find_by_graphemes(w.graphemes);
      if (w.lexicon_id < 0) fail(line_number, g[i].column, "word not in lexicon");
    }
    s.words.push_back(std::move(w));
    s.phrase_breaks.push_back(g[i].phrase_start);
  }
  if (!s.phrase_breaks[0]) fail(line_number, 1, "first word must start a phrase");
  return s;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sentence>& sentences) {
  auto out = open_for_write(path);
  for (const auto& s : sentences) out << format_sentence(s) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Sentence> read_dataset(const std::filesystem::path& path, const Lexicon* lexicon) {
  auto in = open_for_read(path);
  std::vector<Sentence> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    out.push_back(parse_sentence(line, n, lexicon));
  }
  return out;
}

void write_lexicon(const std::filesystem::path& path, const Lexicon& lexicon) {
  auto out = open_for_write(path);
  auto joined = [](const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
  };
  out << "#phonemes\t" << joined(lexicon.phoneme_inventory, " ") << '\n';
  out << "#graphemes\t" << joined(lexicon.grapheme_inventory, " ") << '\n';
  for (const auto& e : lexicon.entries) {
    std::vector<std::string> readings, rule;
    for (const auto& r : e.readings) readings.push_back(joined(r, " "));
    for (int x : e.reading_rule) rule.push_back(std::to_string(x));
    out << e.word_id << '\t' << joined(e.graphemes, " ") << '\t' << joined(readings, ";") << '\t'
        << joined(rule, ",") << '\t' << e.word_class << '\t' << e.accent_type << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_grammar(const std::filesystem::path& path, const Lexicon& lexicon) {
  auto out = open_for_write(path);
  for (std::size_t w = 0; w < lexicon.successors.size(); ++w) {
    out << w << '\t';
    for (std::size_t k = 0; k < lexicon.successors[w].size(); ++k) out << (k ? " " : "") << lexicon.successors[w][k];
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Lexicon read_lexicon(const std::filesystem::path& lexicon_path, const std::filesystem::path& grammar_path) {
  Lexicon lex;
  {
    auto in = open_for_read(lexicon_path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      strip_cr(line);
      if (line.empty()) continue;
      const auto cols = split(line, '\t', 1);
      if (line.rfind("#phonemes\t", 0) == 0) {
        lex.phoneme_inventory = split_symbols(cols[1].text);
        continue;
      }
      if (line.rfind("#graphemes\t", 0) == 0) {
        lex.grapheme_inventory = split_symbols(cols[1].text);
        continue;
      }
      if (cols.size() != 6) fail(n, 1, "expected 6 TAB-separated lexicon columns");
      LexiconEntry e;
      e.word_id = parse_int(cols[0], n, "word id");
      if (e.word_id != static_cast<int>(lex.entries.size())) fail(n, 1, "word ids must be consecutive from 0");
      e.graphemes = split_symbols(cols[1].text);
      if (e.graphemes.empty()) fail(n, cols[1].column, "entry without graphemes");
      for (const Token& r : split(cols[2].text, ';', cols[2].column)) {
        auto reading = split_symbols(r.text);
        if (reading.empty()) fail(n, r.column, "empty reading");
        e.readings.push_back(std::move(reading));
      }
      for (const Token& r : split(cols[3].text, ',', cols[3].column)) {
        const int x = parse_int(r, n, "reading rule");
        if (x < 0 || x >= static_cast<int>(e.readings.size())) fail(n, r.column, "reading rule index out of range");
        e.reading_rule.push_back(x);
      }
      e.word_class = parse_int(cols[4], n, "word class");
      e.accent_type = parse_int(cols[5], n, "accent type");
      if (e.accent_type < 0 || e.accent_type > e.min_mora_count()) fail(n, cols[5].column, "accent type beyond mora count");
      lex.word_classes = std::max(lex.word_classes, static_cast<int>(e.reading_rule.size()));
      lex.entries.push_back(std::move(e));
    }
  }
  for (const auto& e : lex.entries) {
    if (static_cast<int>(e.reading_rule.size()) != lex.word_classes || e.word_class >= lex.word_classes) {
      throw DataError(lexicon_path.string() + ": word " + std::to_string(e.word_id) + " has an inconsistent class rule");
    }
  }
  lex.successors.assign(lex.entries.size(), {});
  auto in = open_for_read(grammar_path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cols = split(line, '\t', 1);
    if (cols.size() != 2) fail(n, 1, "expected word_id<TAB>successors");
    const int w = parse_int(cols[0], n, "word id");
    if (w < 0 || w >= static_cast<int>(lex.entries.size())) fail(n, 1, "unknown word id");
    for (const Token& t : split(cols[1].text, ' ', cols[1].column)) {
      if (t.text.empty()) continue;
      const int s = parse_int(t, n, "successor");
      if (s < 0 || s >= static_cast<int>(lex.entries.size())) fail(n, t.column, "unknown successor id");
      lex.successors[static_cast<std::size_t>(w)].push_back(s);
    }
  }
  return lex;
}

}  // namespace pngbert::corpus
