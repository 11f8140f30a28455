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

#include "cdiff/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cdiff {
namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

struct ParsedLine {
  Sequence seq;
  std::optional<double> weight;
};

ParsedLine parse_line(const std::string& raw, const Vocabulary& vocab, int lineno) {
  std::string body = raw;
  std::optional<double> weight;
  if (auto tab = raw.rfind('\t'); tab != std::string::npos) {
    std::string tail = trim(std::string_view(raw).substr(tab + 1));
    if (auto w = parse_double(tail)) {
      weight = *w;
      body = raw.substr(0, tab);
    }
  }
  std::istringstream words(body);
  std::vector<TokenId> ids;
  std::string tok;
  while (words >> tok) {
    auto id = vocab.find(tok);
    if (!id) throw ParseError("line " + std::to_string(lineno) + ": unknown token '" + tok + "'");
    ids.push_back(*id);
  }
  if (ids.empty()) throw ParseError("line " + std::to_string(lineno) + ": no tokens");
  return {Sequence(std::move(ids)), weight};
}

}  // namespace

Vocabulary parse_vocabulary(std::istream& in) {
  std::vector<std::string> tokens;
  std::optional<std::string> mask;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("#mask", 0) == 0) {
      std::string name = trim(std::string_view(t).substr(5));
      if (name.empty()) throw ParseError("#mask header without a token");
      if (mask) throw ParseError("more than one #mask header");
      mask = name;
      continue;
    }
    tokens.push_back(t);
  }
  std::optional<TokenId> mask_id;
  if (mask) {
    auto it = std::find(tokens.begin(), tokens.end(), *mask);
    if (it == tokens.end()) {
      tokens.push_back(*mask);
      it = tokens.end() - 1;
    }
    mask_id = static_cast<TokenId>(it - tokens.begin());
  }
  try {
    return Vocabulary(std::move(tokens), mask_id);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_vocabulary(in);
}

Corpus parse_corpus(std::istream& in, const Vocabulary& vocab) {
  std::vector<Corpus::Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto parsed = parse_line(line, vocab, lineno);
    double w = parsed.weight.value_or(1.0);
    if (!(w > 0.0)) throw ParseError("line " + std::to_string(lineno) + ": weight must be positive");
    entries.push_back({std::move(parsed.seq), w});
  }
  if (entries.empty()) throw ParseError("corpus is empty");
  try {
    return Corpus(std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("corpus: ") + e.what());
  }
}

Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto in = open_or_throw(path);
  return parse_corpus(in, vocab);
}

std::vector<Sequence> parse_sequences(std::istream& in, const Vocabulary& vocab) {
  std::vector<Sequence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    out.push_back(parse_line(line, vocab, lineno).seq);
  }
  return out;
}

std::vector<Sequence> load_sequences(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto in = open_or_throw(path);
  return parse_sequences(in, vocab);
}

std::string format_sequence(const Sequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(seq[i]);
  }
  return out;
}

void write_sequences(std::ostream& out, const std::vector<Sequence>& seqs, const Vocabulary& vocab) {
  for (const auto& s : seqs) out << format_sequence(s, vocab) << '\n';
}

}  // namespace cdiff
