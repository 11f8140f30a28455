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

#include "cdiff/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace cdiff {

void AlmConfig::validate() const {
  if (lambda_init.empty()) throw std::invalid_argument("alm: lambda_init must not be empty");
  for (double l : lambda_init) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("alm: lambda_init must be >= 0");
  }
  if (!(mu_init > 0.0)) throw std::invalid_argument("alm: mu_init must be > 0");
  if (!(mu_max > 0.0)) throw std::invalid_argument("alm: mu_max must be > 0");
  if (mu_init > mu_max) throw std::invalid_argument("alm: mu_init must not exceed mu_max");
  if (!(alpha_scale > 1.0)) throw std::invalid_argument("alm: alpha_scale must be > 1");
  if (!(eta > 0.0)) throw std::invalid_argument("alm: eta must be > 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("alm: delta must be >= 0");
  if (max_inner_iter < 1) throw std::invalid_argument("alm: max_inner_iter must be >= 1");
  if (max_outer_iter < 1) throw std::invalid_argument("alm: max_outer_iter must be >= 1");
  relax.validate();
}

// --------------------------------------------------------------- AlmObjective

AlmObjective::AlmObjective(const SeqDist& x_in, const ConstraintSet& cs, const RelaxConfig& relax, Multipliers m)
    : x_in_(x_in),
      cs_(cs),
      relax_(relax),
      noise_(gumbel_noise(x_in.length(), x_in.vocab_size(), relax)),
      m_(std::move(m)) {
  if (m_.margin.empty()) m_.margin.assign(cs.size(), 0.0);
  if (m_.lambda.size() != cs.size() || m_.mu.size() != cs.size() || m_.margin.size() != cs.size()) {
    throw std::invalid_argument("alm: one multiplier set per constraint expected");
  }
}

Matrix AlmObjective::logits_of(const SeqDist& d) {
  Matrix z(d.length(), d.vocab_size());
  for (std::size_t k = 0; k < z.values.size(); ++k) z.values[k] = std::log(std::max(d.values()[k], kProbabilityFloor));
  return z;
}

namespace {

void softmax_inplace(std::span<double> u) {
  const double mx = *std::max_element(u.begin(), u.end());
  double s = 0.0;
  for (double& x : u) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : u) x /= s;
}

double log_sum_exp(std::span<const double> u) {
  const double mx = *std::max_element(u.begin(), u.end());
  double s = 0.0;
  for (double x : u) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

SeqDist AlmObjective::softmax_rows(const Matrix& z) {
  Matrix y = z;
  for (std::size_t i = 0; i < y.rows; ++i) softmax_inplace(y.row(i));
  return SeqDist(y);
}

// log y = z - lse(z), so the relaxation softmax((log y + xi) / T) equals
// softmax((z + xi) / T) row-wise.
SeqDist AlmObjective::relaxed(const Matrix& z) const {
  Matrix u = z;
  for (std::size_t k = 0; k < u.values.size(); ++k) u.values[k] = (z.values[k] + noise_.values[k]) / relax_.temperature;
  for (std::size_t i = 0; i < u.rows; ++i) softmax_inplace(u.row(i));
  return SeqDist(u);
}

double AlmObjective::value(const Matrix& z) const {
  double kl = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    const double lse = log_sum_exp(z.row(i));
    auto x = x_in_.row(i);
    for (std::size_t v = 0; v < z.cols; ++v) {
      if (x[v] > 0.0) kl += x[v] * (std::log(x[v]) - (z(i, v) - lse));
    }
  }
  const std::vector<double> dgs = relaxed_violation(z);
  double pen = 0.0;
  for (std::size_t c = 0; c < cs_.size(); ++c) {
    const double dg = dgs[c];
    pen += m_.lambda[c] * dg + 0.5 * m_.mu[c] * dg * dg;
  }
  return kl + pen;
}

std::vector<double> AlmObjective::relaxed_violation(const Matrix& z) const {
  const SeqDist phi = relaxed(z);
  std::vector<double> out(cs_.size());
  for (std::size_t c = 0; c < cs_.size(); ++c) {
    out[c] = std::max(0.0, cs_[c].relaxed_score(phi) - cs_[c].tau() + m_.margin[c]);
  }
  return out;
}

Matrix AlmObjective::gradient(const Matrix& z) const {
  const SeqDist y = softmax_rows(z);
  const SeqDist phi = relaxed(z);
  Matrix g_phi(z.rows, z.cols);
  for (std::size_t c = 0; c < cs_.size(); ++c) {
    const double dg = std::max(0.0, cs_[c].relaxed_score(phi) - cs_[c].tau() + m_.margin[c]);
    if (dg <= 0.0) continue;
    const double coef = m_.lambda[c] + m_.mu[c] * dg;
    const Matrix gc = cs_[c].relaxed_grad(phi);
    for (std::size_t k = 0; k < g_phi.values.size(); ++k) g_phi.values[k] += coef * gc.values[k];
  }
  Matrix grad(z.rows, z.cols);
  const double inv_t = 1.0 / relax_.temperature;
  for (std::size_t i = 0; i < z.rows; ++i) {
    auto p = phi.row(i);
    auto g = g_phi.row(i);
    const double mean = std::inner_product(g.begin(), g.end(), p.begin(), 0.0);
    for (std::size_t v = 0; v < z.cols; ++v) {
      grad(i, v) = y(i, v) - x_in_(i, v) + inv_t * p[v] * (g[v] - mean);
    }
  }
  return grad;
}

// ---------------------------------------------------------- row projections

std::vector<double> project_row_argmax(std::span<const double> row, TokenId v) {
  std::vector<double> out(row.begin(), row.end());
  if (v >= row.size()) throw std::invalid_argument("project_row_argmax: token outside vocabulary");
  if (argmax(row) == v) return out;

  std::vector<TokenId> rivals;
  for (TokenId u = 0; u < row.size(); ++u) {
    if (u != v) rivals.push_back(u);
  }
  std::stable_sort(rivals.begin(), rivals.end(), [&](TokenId a, TokenId b) { return row[a] > row[b]; });

  double pooled = row[v];
  std::size_t k = 0;
  while (k < rivals.size() && (k == 0 || row[rivals[k]] > pooled / static_cast<double>(k + 1))) {
    pooled += row[rivals[k]];
    ++k;
  }
  const double level = pooled / static_cast<double>(k + 1);
  out[v] = level + kArgmaxMargin;
  for (std::size_t j = 0; j < k; ++j) out[rivals[j]] = level - kArgmaxMargin / static_cast<double>(k);
  return out;
}

SeqDist position_project(const SeqDist& x_in, std::size_t p, TokenId v) {
  if (p >= x_in.length()) throw std::invalid_argument("position_project: position outside the sequence");
  return x_in.with_row(p, project_row_argmax(x_in.row(p), v));
}

namespace {

SeqDist project_onto_sequence(const SeqDist& x_in, const Sequence& target) {
  std::vector<double> out;
  out.reserve(x_in.values().size());
  for (std::size_t i = 0; i < x_in.length(); ++i) {
    auto r = project_row_argmax(x_in.row(i), target[i]);
    out.insert(out.end(), r.begin(), r.end());
  }
  return SeqDist(x_in.length(), x_in.vocab_size(), std::move(out));
}

// Improves a feasible decoded target. Flips that feasibility does not need
// are dropped costliest first; then single and paired position changes are
// taken while they lower the summed row projection cost.
Sequence refine_target(const SeqDist& x_in, const ConstraintSet& cs, Sequence target, double delta,
                       const std::vector<TokenId>& frozen) {
  const std::size_t len = x_in.length();
  const std::size_t n = x_in.vocab_size();
  Matrix cost(len, n);
  for (std::size_t i = 0; i < len; ++i) {
    for (TokenId v = 0; v < n; ++v) cost(i, v) = kl_row(x_in.row(i), project_row_argmax(x_in.row(i), v));
  }
  const Sequence base = decode(x_in);
  std::vector<std::size_t> flips;
  for (std::size_t i = 0; i < len; ++i) {
    if (target[i] != base[i]) flips.push_back(i);
  }
  std::stable_sort(flips.begin(), flips.end(),
                   [&](std::size_t a, std::size_t b) { return cost(a, target[a]) > cost(b, target[b]); });
  std::vector<TokenId> ids = target.ids();
  auto feasible = [&](const std::vector<TokenId>& s) { return max_hard_violation(cs, Sequence(s)) <= delta; };
  for (std::size_t i : flips) {
    const TokenId keep = ids[i];
    ids[i] = base[i];
    if (!feasible(ids)) ids[i] = keep;
  }

  // Frozen tokens are only allowed where the input already decodes to them.
  auto allowed = [&](std::size_t i, TokenId v) {
    return v == base[i] || std::find(frozen.begin(), frozen.end(), v) == frozen.end();
  };
  constexpr double kMinGain = 1e-12;
  for (bool improved = true; improved;) {
    improved = false;
    double best_gain = kMinGain;
    std::vector<TokenId> best_ids;
    std::vector<TokenId> trial = ids;
    for (std::size_t i = 0; i < len; ++i) {
      for (TokenId v = 0; v < n; ++v) {
        if (v == ids[i] || !allowed(i, v)) continue;
        const double gi = cost(i, ids[i]) - cost(i, v);
        trial[i] = v;
        if (gi > best_gain && feasible(trial)) {
          best_gain = gi;
          best_ids = trial;
        }
        for (std::size_t j = i + 1; j < len; ++j) {
          for (TokenId w = 0; w < n; ++w) {
            if (w == ids[j] || !allowed(j, w)) continue;
            const double gain = gi + cost(j, ids[j]) - cost(j, w);
            if (gain <= best_gain) continue;
            trial[j] = w;
            if (feasible(trial)) {
              best_gain = gain;
              best_ids = trial;
            }
            trial[j] = ids[j];
          }
        }
        trial[i] = ids[i];
      }
    }
    if (!best_ids.empty()) {
      ids = std::move(best_ids);
      improved = true;
    }
  }
  return Sequence(std::move(ids));
}

// Greedy discrete repair for when the multiplier loop stalls: apply the
// single position change that most lowers the summed hard violation, the
// cheaper change on ties, until feasible or no change helps.
Sequence repair_target(const SeqDist& x_in, const ConstraintSet& cs, Sequence target, double delta,
                       const std::vector<TokenId>& frozen) {
  const std::size_t len = x_in.length();
  const std::size_t n = x_in.vocab_size();
  const Sequence base = decode(x_in);
  auto violation = [&](const std::vector<TokenId>& s) {
    double v = 0.0;
    for (double h : hard_violation(cs, Sequence(s))) v += std::max(0.0, h - delta);
    return v;
  };
  std::vector<TokenId> ids = target.ids();
  double current = violation(ids);
  while (current > 0.0) {
    double best_v = current;
    double best_c = std::numeric_limits<double>::infinity();
    std::size_t best_i = len;
    TokenId best_t = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const TokenId keep = ids[i];
      for (TokenId v = 0; v < n; ++v) {
        if (v == keep) continue;
        if (v != base[i] && std::find(frozen.begin(), frozen.end(), v) != frozen.end()) continue;
        ids[i] = v;
        const double viol = violation(ids);
        const double c = flip_cost(x_in.row(i), v);
        if (viol < best_v || (viol == best_v && best_i < len && c < best_c)) {
          best_v = viol;
          best_c = c;
          best_i = i;
          best_t = v;
        }
      }
      ids[i] = keep;
    }
    if (best_i == len) break;
    ids[best_i] = best_t;
    current = best_v;
  }
  return Sequence(std::move(ids));
}

// A relaxed violation at or below this counts as satisfied when deciding
// whether to tighten the relaxed threshold.
constexpr double kRelaxedSlack = 1e-6;

struct StepState {
  std::vector<double> sq;
};

void inner_step(const AlmObjective& obj, Matrix& z, const Matrix& g, const AlmConfig& cfg, StepState& st) {
  if (cfg.step_rule == AlmConfig::Step::kAdaptive) {
    constexpr double kDecay = 0.9;
    constexpr double kEps = 1e-12;
    if (st.sq.empty()) st.sq.assign(g.values.size(), 0.0);
    for (std::size_t k = 0; k < z.values.size(); ++k) {
      st.sq[k] = kDecay * st.sq[k] + (1.0 - kDecay) * g.values[k] * g.values[k];
      z.values[k] -= cfg.eta * g.values[k] / (std::sqrt(st.sq[k]) + kEps);
    }
    return;
  }
  double step = cfg.eta;
  Matrix trial = z;
  auto move = [&](double s) {
    for (std::size_t k = 0; k < z.values.size(); ++k) trial.values[k] = z.values[k] - s * g.values[k];
  };
  move(step);
  if (cfg.step_rule == AlmConfig::Step::kBacktracking) {
    constexpr double kArmijo = 1e-4;
    constexpr double kMinStep = 1e-12;
    const double f0 = obj.value(z);
    double gg = 0.0;
    for (double v : g.values) gg += v * v;
    while (step > kMinStep && obj.value(trial) > f0 - kArmijo * step * gg) {
      step *= 0.5;
      move(step);
    }
  }
  z = std::move(trial);
}

bool all_within(const std::vector<double>& v, double delta) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x <= delta; });
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

// ---------------------------------------------------------------- alm_project

AlmResult alm_project(const SeqDist& x_in, const ConstraintSet& cs_in, const AlmConfig& cfg, const Multipliers* warm) {
  cfg.validate();
  for (TokenId f : cfg.frozen_tokens) {
    if (f >= x_in.vocab_size()) throw std::invalid_argument("alm: frozen token outside vocabulary");
  }
  if (cfg.lambda_init.size() != 1 && cfg.lambda_init.size() != cs_in.size()) {
    throw std::invalid_argument("alm: lambda_init needs one entry or one per constraint");
  }

  // Multipliers live on one-sided parts; each part inherits its parent's
  // initial lambda.
  std::vector<ConstraintSet::Ptr> parts;
  std::vector<double> lambda0;
  for (std::size_t c = 0; c < cs_in.size(); ++c) {
    const auto& ptr = *(cs_in.begin() + static_cast<std::ptrdiff_t>(c));
    auto split = ptr->one_sided();
    if (split.empty()) split.push_back(ptr);
    for (auto& p : split) {
      parts.push_back(std::move(p));
      lambda0.push_back(cfg.lambda_init.size() == 1 ? cfg.lambda_init[0] : cfg.lambda_init[c]);
    }
  }
  const ConstraintSet cs(std::move(parts));
  const std::size_t nc = cs.size();

  Multipliers m;
  if (warm) {
    if (warm->lambda.size() != nc || warm->mu.size() != nc) throw std::invalid_argument("alm: warm start size mismatch");
    m = *warm;
  } else {
    m.lambda = std::move(lambda0);
    m.mu.assign(nc, cfg.mu_init);
  }
  if (m.margin.empty()) m.margin.assign(nc, 0.0);

  AlmResult res{x_in, false, 0, hard_violation(cs_in, decode(x_in)), 0.0, m, {}};
  if (all_within(res.final_violation, cfg.delta)) {
    res.feasible = true;
    return res;
  }

  AlmObjective obj(x_in, cs, cfg.relax, m);
  Matrix z = AlmObjective::logits_of(x_in);
  Matrix best_z = z;
  double best_total = total(res.final_violation);
  double best_kl = 0.0;

  StepState step_state;
  int outer = 0;
  while (outer < cfg.max_outer_iter) {
    for (int it = 0; it < cfg.max_inner_iter; ++it) {
      Matrix g = obj.gradient(z);
      for (std::size_t i = 0; i < g.rows; ++i) {
        for (TokenId f : cfg.frozen_tokens) g(i, f) = 0.0;
      }
      inner_step(obj, z, g, cfg, step_state);
    }
    ++outer;
    const SeqDist y = AlmObjective::softmax_rows(z);
    const std::vector<double> hv = hard_violation(cs, decode(y));
    const double tot = total(hv);
    const double kl = kl_divergence(x_in, y);
    if (tot < best_total || (tot == best_total && kl < best_kl)) {
      best_total = tot;
      best_kl = kl;
      best_z = z;
    }
    if (all_within(hv, cfg.delta)) {
      best_z = z;
      break;
    }
    const std::vector<double> soft = obj.relaxed_violation(z);
    auto& mm = obj.multipliers();
    for (std::size_t c = 0; c < nc; ++c) {
      if (hv[c] > cfg.delta && soft[c] <= kRelaxedSlack) mm.margin[c] += hv[c];
      mm.lambda[c] += mm.mu[c] * hv[c];
      mm.mu[c] = std::min(cfg.alpha_scale * mm.mu[c], cfg.mu_max);
    }
    if (cfg.record_history) res.history.push_back(mm);
  }

  res.outer_iters = outer;
  res.multipliers = obj.multipliers();
  res.projected = AlmObjective::softmax_rows(best_z);
  if (cfg.polish) {
    // Frozen tokens only stay where the input already decodes to them.
    const Sequence base = decode(x_in);
    std::vector<TokenId> ids = decode(res.projected).ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const bool frozen = std::find(cfg.frozen_tokens.begin(), cfg.frozen_tokens.end(), ids[i]) != cfg.frozen_tokens.end();
      if (frozen && ids[i] != base[i]) ids[i] = base[i];
    }
    Sequence target(std::move(ids));
    if (!all_within(hard_violation(cs, target), cfg.delta)) {
      target = repair_target(x_in, cs, std::move(target), cfg.delta, cfg.frozen_tokens);
    }
    if (all_within(hard_violation(cs, target), cfg.delta)) {
      target = refine_target(x_in, cs, std::move(target), cfg.delta, cfg.frozen_tokens);
      res.projected = project_onto_sequence(x_in, target);
    }
  }
  res.final_violation = hard_violation(cs_in, decode(res.projected));
  res.feasible = all_within(res.final_violation, cfg.delta);
  res.kl_moved = kl_divergence(x_in, res.projected);
  return res;
}

// ------------------------------------------------------------------ novelty

NoveltyDb::NoveltyDb(const std::vector<Sequence>& seqs) {
  for (const auto& s : seqs) set_.insert(s);
}

double flip_cost(std::span<const double> row, TokenId v) {
  return *std::max_element(row.begin(), row.end()) - row[v];
}

NoveltyResult novelty_project(const SeqDist& x_in, NoveltyDb& db, bool insert, const std::vector<TokenId>& excluded,
                              std::size_t max_expansions) {
  const std::size_t len = x_in.length();
  const std::size_t n = x_in.vocab_size();
  Matrix cost(len, n);
  for (std::size_t i = 0; i < len; ++i) {
    for (TokenId v = 0; v < n; ++v) cost(i, v) = flip_cost(x_in.row(i), v);
  }

  struct Node {
    double cost;
    std::vector<TokenId> prefix;
    bool operator>(const Node& o) const { return cost != o.cost ? cost > o.cost : prefix > o.prefix; }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  open.push({0.0, {}});
  std::size_t expansions = 0;
  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.prefix.size() == len) {
      Sequence s(node.prefix);
      if (db.contains(s)) continue;
      NoveltyResult res{project_onto_sequence(x_in, s), s, node.cost};
      if (insert) db.insert(s);
      return res;
    }
    if (++expansions > max_expansions) throw NoveltyError("novelty search exceeded its expansion budget");
    const std::size_t i = node.prefix.size();
    for (TokenId v = 0; v < n; ++v) {
      if (cost(i, v) > 0.0 && std::find(excluded.begin(), excluded.end(), v) != excluded.end()) continue;
      Node child{node.cost + cost(i, v), node.prefix};
      child.prefix.push_back(v);
      open.push(std::move(child));
    }
  }
  throw NoveltyError("every candidate sequence is already in the database");
}

}  // namespace cdiff
