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

#ifndef PNGBERT_CORPUS_DATASET_IO_H_
#define PNGBERT_CORPUS_DATASET_IO_H_

// Text interchange formats. Dataset lines look like
//   ^g1 g2 | g3<TAB>^p1 p2 | p3<TAB>^%L H | L%
// with "|" between words and "^" on phrase-initial words.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pngbert/corpus/toy_corpus.h"

namespace pngbert::corpus {

std::string format_sentence(const Sentence& sentence);

// Throws DataError("line N, column C: ...") on malformed input. When a
// lexicon is supplied, words are resolved to lexicon ids by spelling.
Sentence parse_sentence(std::string_view line, std::size_t line_number, const Lexicon* lexicon = nullptr);

void write_dataset(const std::filesystem::path& path, const std::vector<Sentence>& sentences);
std::vector<Sentence> read_dataset(const std::filesystem::path& path, const Lexicon* lexicon = nullptr);

// word_id<TAB>graphemes<TAB>reading0;reading1<TAB>rule<TAB>class<TAB>accent_type
// The rule column lists the reading index per left word class, comma
// separated. Two leading "#" lines record the symbol inventories.
void write_lexicon(const std::filesystem::path& path, const Lexicon& lexicon);
// word_id<TAB>successor ids, space separated.
void write_grammar(const std::filesystem::path& path, const Lexicon& lexicon);
Lexicon read_lexicon(const std::filesystem::path& lexicon_path, const std::filesystem::path& grammar_path);

}  // namespace pngbert::corpus

#endif  // PNGBERT_CORPUS_DATASET_IO_H_
