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

#include "cdiff/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cdiff/corpus_io.hpp"
#include "json.hpp"

namespace cdiff {

Constraint::Constraint(std::string name, double tau) : name_(std::move(name)), tau_(tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("constraint threshold must be >= 0");
}

// ---------------------------------------------------------------- LinearScore

LinearScore::LinearScore(std::vector<double> weights, double tau, std::string name)
    : Constraint(std::move(name), tau), weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!std::isfinite(w)) throw std::invalid_argument("linear score weights must be finite");
  }
}

void LinearScore::check_width(std::size_t n) const {
  if (n != weights_.size()) throw std::invalid_argument("linear score: weight vector does not match vocabulary");
}

double LinearScore::relaxed_score(const SeqDist& phi) const {
  check_width(phi.vocab_size());
  double s = 0.0;
  for (std::size_t i = 0; i < phi.length(); ++i) {
    auto row = phi.row(i);
    for (std::size_t v = 0; v < row.size(); ++v) s += weights_[v] * row[v];
  }
  return s / static_cast<double>(phi.length());
}

Matrix LinearScore::relaxed_grad(const SeqDist& phi) const {
  check_width(phi.vocab_size());
  Matrix g(phi.length(), phi.vocab_size());
  const double inv_len = 1.0 / static_cast<double>(phi.length());
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t v = 0; v < g.cols; ++v) g(i, v) = weights_[v] * inv_len;
  }
  return g;
}

double LinearScore::hard_score(const Sequence& seq) const {
  double s = 0.0;
  for (TokenId id : seq.ids()) s += weights_.at(id);
  return s / static_cast<double>(seq.size());
}

// ----------------------------------------------------------------- TokenCount

std::string_view to_string(CountOp op) {
  switch (op) {
    case CountOp::kLe: return "le";
    case CountOp::kGe: return "ge";
    case CountOp::kEq: return "eq";
  }
  return "?";
}

CountOp parse_count_op(std::string_view s) {
  if (s == "le") return CountOp::kLe;
  if (s == "ge") return CountOp::kGe;
  if (s == "eq") return CountOp::kEq;
  throw std::invalid_argument("unknown count op '" + std::string(s) + "' (expected le, ge or eq)");
}

TokenCount::TokenCount(TokenId token, CountOp op, double k, double tau, std::string name)
    : Constraint(name.empty() ? "token_count[" + std::to_string(token) + " " + std::string(to_string(op)) + " " +
                                    std::to_string(k) + "]"
                              : std::move(name),
                 tau),
      token_(token),
      op_(op),
      k_(k) {
  if (!std::isfinite(k) || k < 0.0) throw std::invalid_argument("token count bound must be >= 0");
}

double TokenCount::oriented(double count) const {
  switch (op_) {
    case CountOp::kLe: return count - k_;
    case CountOp::kGe: return k_ - count;
    case CountOp::kEq: return std::abs(count - k_);
  }
  return 0.0;
}

double TokenCount::relaxed_score(const SeqDist& phi) const {
  if (token_ >= phi.vocab_size()) throw std::invalid_argument("token count: token outside vocabulary");
  double c = 0.0;
  for (std::size_t i = 0; i < phi.length(); ++i) c += phi(i, token_);
  return oriented(c);
}

Matrix TokenCount::relaxed_grad(const SeqDist& phi) const {
  if (token_ >= phi.vocab_size()) throw std::invalid_argument("token count: token outside vocabulary");
  double slope = 1.0;
  if (op_ == CountOp::kGe) {
    slope = -1.0;
  } else if (op_ == CountOp::kEq) {
    double c = 0.0;
    for (std::size_t i = 0; i < phi.length(); ++i) c += phi(i, token_);
    slope = c > k_ ? 1.0 : (c < k_ ? -1.0 : 0.0);
  }
  Matrix g(phi.length(), phi.vocab_size());
  for (std::size_t i = 0; i < g.rows; ++i) g(i, token_) = slope;
  return g;
}

double TokenCount::hard_score(const Sequence& seq) const {
  double c = static_cast<double>(std::count(seq.ids().begin(), seq.ids().end(), token_));
  return oriented(c);
}

std::vector<std::shared_ptr<const Constraint>> TokenCount::one_sided() const {
  if (op_ != CountOp::kEq) return {};
  return {std::make_shared<TokenCount>(token_, CountOp::kLe, k_, tau(), name() + "[le]"),
          std::make_shared<TokenCount>(token_, CountOp::kGe, k_, tau(), name() + "[ge]")};
}

Forbidden::Forbidden(TokenId token, std::string name)
    : TokenCount(token, CountOp::kLe, 0.0, 0.0, name.empty() ? "forbidden[" + std::to_string(token) + "]" : name) {}

// ------------------------------------------------------------------- Position

Position::Position(std::size_t position, TokenId token, double tau, std::string name)
    : Constraint(name.empty() ? "position[" + std::to_string(position) + "=" + std::to_string(token) + "]"
                              : std::move(name),
                 tau),
      position_(position),
      token_(token) {}

namespace {

// Largest competitor of `token` in a row; lowest index on ties.
std::size_t rival(std::span<const double> row, TokenId token) {
  std::size_t best = token == 0 ? 1 : 0;
  for (std::size_t u = 0; u < row.size(); ++u) {
    if (u != token && row[u] > row[best]) best = u;
  }
  return best;
}

}  // namespace

double Position::relaxed_score(const SeqDist& phi) const {
  if (position_ >= phi.length() || token_ >= phi.vocab_size()) {
    throw std::invalid_argument("position constraint outside the sequence or vocabulary");
  }
  auto row = phi.row(position_);
  return row[rival(row, token_)] - row[token_] + kStrictMargin;
}

Matrix Position::relaxed_grad(const SeqDist& phi) const {
  if (position_ >= phi.length() || token_ >= phi.vocab_size()) {
    throw std::invalid_argument("position constraint outside the sequence or vocabulary");
  }
  Matrix g(phi.length(), phi.vocab_size());
  auto row = phi.row(position_);
  const double top = row[rival(row, token_)];
  std::vector<std::size_t> tied;
  for (std::size_t u = 0; u < row.size(); ++u) {
    if (u != token_ && row[u] >= top) tied.push_back(u);
  }
  for (std::size_t u : tied) g(position_, u) = 1.0 / static_cast<double>(tied.size());
  g(position_, token_) = -1.0;
  return g;
}

double Position::hard_score(const Sequence& seq) const {
  if (position_ >= seq.size()) throw std::invalid_argument("position constraint outside the sequence");
  return (seq[position_] == token_ ? -1.0 : 1.0) + kStrictMargin;
}

// -------------------------------------------------------------- ConstraintSet

ConstraintSet::ConstraintSet(std::vector<Ptr> constraints) : constraints_(std::move(constraints)) {
  if (constraints_.empty()) throw std::invalid_argument("constraint set must not be empty");
  std::set<std::string> names;
  for (const auto& c : constraints_) {
    if (!c) throw std::invalid_argument("null constraint");
    if (!names.insert(c->name()).second) throw std::invalid_argument("duplicate constraint name '" + c->name() + "'");
  }
}

double violation(const Constraint& c, const SeqDist& phi) {
  return std::max(0.0, c.relaxed_score(phi) - c.tau());
}

std::vector<double> hard_violation(const ConstraintSet& cs, const Sequence& seq) {
  std::vector<double> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(std::max(0.0, c->hard_score(seq) - c->tau()));
  return out;
}

double max_hard_violation(const ConstraintSet& cs, const Sequence& seq) {
  double m = 0.0;
  for (const auto& c : cs) m = std::max(m, c->hard_score(seq) - c->tau());
  return m;
}

// -------------------------------------------------------------------- parsing

std::vector<double> load_token_weights(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open weights file " + path.string());
  std::vector<double> w(vocab.size(), 0.0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>weight");
    std::string tok = line.substr(0, tab);
    auto id = vocab.find(tok);
    if (!id) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": unknown token '" + tok + "'");
    try {
      std::size_t used = 0;
      std::string num = line.substr(tab + 1);
      w[*id] = std::stod(num, &used);
      if (num.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad weight");
    }
  }
  return w;
}

namespace {

using nlohmann::json;

TokenId token_field(const json& obj, const Vocabulary& vocab) {
  if (!obj.contains("token") || !obj["token"].is_string()) throw ParseError("constraint needs a string 'token'");
  auto name = obj["token"].get<std::string>();
  auto id = vocab.find(name);
  if (!id) throw ParseError("constraint token '" + name + "' is not in the vocabulary");
  return *id;
}

double number_field(const json& obj, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ParseError(std::string("constraint needs numeric '") + key + "'");
  }
  if (!obj[key].is_number()) throw ParseError(std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

ConstraintSet::Ptr parse_one(const json& obj, const Vocabulary& vocab, const std::filesystem::path& base_dir) {
  if (!obj.is_object()) throw ParseError("each constraint must be a JSON object");
  if (!obj.contains("type") || !obj["type"].is_string()) throw ParseError("constraint needs a string 'type'");
  const auto type = obj["type"].get<std::string>();
  const double tau = number_field(obj, "tau", 0.0);
  if (tau < 0.0) throw ParseError("constraint 'tau' must be >= 0");
  std::string name = obj.value("name", std::string{});

  try {
    if (type == "linear_score") {
      std::vector<double> weights;
      if (obj.contains("weights_file")) {
        std::filesystem::path p = obj["weights_file"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        weights = load_token_weights(p, vocab);
      } else if (obj.contains("weights") && obj["weights"].is_object()) {
        weights.assign(vocab.size(), 0.0);
        for (const auto& [tok, w] : obj["weights"].items()) {
          auto id = vocab.find(tok);
          if (!id) throw ParseError("weight for unknown token '" + tok + "'");
          if (!w.is_number()) throw ParseError("weight for '" + tok + "' must be a number");
          weights[*id] = w.get<double>();
        }
      } else {
        throw ParseError("linear_score needs 'weights_file' or a 'weights' object");
      }
      return std::make_shared<LinearScore>(std::move(weights), tau, name.empty() ? "linear_score" : name);
    }
    if (type == "token_count") {
      if (!obj.contains("op") || !obj["op"].is_string()) throw ParseError("token_count needs 'op' in {le, ge, eq}");
      CountOp op;
      try {
        op = parse_count_op(obj["op"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
      }
      const double k = number_field(obj, "k");
      const TokenId tok = token_field(obj, vocab);
      if (name.empty()) name = "token_count[" + vocab.token(tok) + " " + std::string(to_string(op)) + " " + obj["k"].dump() + "]";
      return std::make_shared<TokenCount>(tok, op, k, tau, name);
    }
    if (type == "forbidden") {
      const TokenId tok = token_field(obj, vocab);
      return std::make_shared<Forbidden>(tok, name.empty() ? "forbidden[" + vocab.token(tok) + "]" : name);
    }
    if (type == "position") {
      const double pos = number_field(obj, "position");
      if (pos < 0 || pos != std::floor(pos)) throw ParseError("'position' must be a non-negative integer");
      const TokenId tok = token_field(obj, vocab);
      const auto p = static_cast<std::size_t>(pos);
      if (name.empty()) name = "position[" + std::to_string(p) + "=" + vocab.token(tok) + "]";
      return std::make_shared<Position>(p, tok, tau, name);
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  throw ParseError("unknown constraint type '" + type + "'");
}

}  // namespace

ConstraintSet parse_constraint_spec(std::string_view json_text, const Vocabulary& vocab,
                                    const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("constraint spec is not valid JSON: ") + e.what());
  }
  if (doc.is_object()) doc = json::array({doc});
  if (!doc.is_array()) throw ParseError("constraint spec must be a JSON array");
  std::vector<ConstraintSet::Ptr> out;
  for (const auto& obj : doc) out.push_back(parse_one(obj, vocab, base_dir));
  try {
    return ConstraintSet(std::move(out));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

ConstraintSet load_constraint_spec(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open constraint spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_constraint_spec(ss.str(), vocab, path.parent_path());
}

}  // namespace cdiff
