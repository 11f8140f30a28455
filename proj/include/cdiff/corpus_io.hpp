// Copyright 2026 The cdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdiff/core.hpp"

namespace cdiff {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vocabulary text format: one token per non-blank line, in index order.
// A line `#mask <token>` marks the MASK token; if that token is not listed
// it is appended after the others.
Vocabulary parse_vocabulary(std::istream& in);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Corpus text format: one sequence per line, tokens separated by spaces,
// with an optional trailing `\t<weight>`. Blank lines are skipped.
Corpus parse_corpus(std::istream& in, const Vocabulary& vocab);
Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocab);

/// Reads sequences in corpus format, ignoring weights.
std::vector<Sequence> parse_sequences(std::istream& in, const Vocabulary& vocab);
std::vector<Sequence> load_sequences(const std::filesystem::path& path, const Vocabulary& vocab);

std::string format_sequence(const Sequence& seq, const Vocabulary& vocab);
void write_sequences(std::ostream& out, const std::vector<Sequence>& seqs, const Vocabulary& vocab);

}  // namespace cdiff
