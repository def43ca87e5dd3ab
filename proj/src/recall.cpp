#include "hfy/recall.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "hfy/dynamics.hpp"
#include "hfy/errors.hpp"
#include "hfy/simplex.hpp"
#include "hfy/structured.hpp"

namespace hfy {
namespace {

void check_common(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg) {
  if (q0.size() != static_cast<Eigen::Index>(mem.dim())) throw DomainError("recall: cue dimension mismatch");
  if (!(cfg.beta > 0.0)) throw DomainError("recall: beta must be positive");
}

std::size_t outer_count(const PatternMemory& mem, const RecallConfig& cfg) {
  return cfg.outer_steps == 0 ? mem.size() : cfg.outer_steps;
}

RecallStep make_step(const PatternMemory& mem, std::size_t i, Vector dist, const Vector& q,
                     const RecallConfig& cfg) {
  RecallStep s;
  s.step = i;
  s.distribution = std::move(dist);
  s.query = q;
  s.matched = match_pattern(mem, q, cfg.match_threshold, &s.similarity);
  return s;
}

Vector entmax_of(const Vector& theta, double alpha) {
  if (alpha == 1.0) return softmax(theta, 1.0);
  if (alpha == 2.0) return sparsemax(theta);
  return entmax(theta, alpha);
}

}  // namespace

std::vector<int> RecallTrace::matched_sequence() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.matched);
  return out;
}

int match_pattern(const PatternMemory& mem, const Vector& q, double threshold, double* similarity) {
  const double qn = q.norm();
  int best = 0;
  double best_cos = -2.0;
  if (qn > 0.0) {
    const Vector dots = mem.scores(q);
    for (Eigen::Index i = 0; i < dots.size(); ++i) {
      const double xn = mem.norms()[i];
      if (xn == 0.0) continue;
      const double c = dots[i] / (qn * xn);
      if (c > best_cos) {
        best_cos = c;
        best = static_cast<int>(i) + 1;
      }
    }
  }
  if (similarity) *similarity = best == 0 ? 0.0 : best_cos;
  return best_cos > threshold ? best : 0;
}

RecallTrace free_recall_constrained(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg) {
  check_common(mem, q0, cfg);
  const auto n = static_cast<Eigen::Index>(mem.size());
  RecallTrace trace;
  Vector u = Vector::Ones(n);
  Vector q = q0;
  for (std::size_t i = 0; i < outer_count(mem, cfg); ++i) {
    const double mass = u.sum();
    if (mass < 1.0 - 1e-9) {
      trace.exhausted = true;
      break;
    }
    if (mass < 1.0) u /= mass;  // absorb round-off in the last step
    Vector p = Vector::Zero(n);
    for (std::size_t j = 0; j < cfg.inner_steps; ++j) {
      p = constrained_sparsemax(cfg.beta * mem.scores(q), u);
      q = mem.combine(p);
    }
    u = (u - p).cwiseMax(0.0);
    trace.steps.push_back(make_step(mem, i + 1, std::move(p), q, cfg));
  }
  return trace;
}

RecallTrace free_recall_penalized(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg) {
  check_common(mem, q0, cfg);
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw DomainError("recall: tau must be in (0, 1]");
  if (!(cfg.lambda >= 0.0)) throw DomainError("recall: lambda must be >= 0");
  if (!(cfg.alpha >= 1.0)) throw DomainError("recall: alpha must be >= 1");
  const auto n = static_cast<Eigen::Index>(mem.size());
  RecallTrace trace;
  Vector a = Vector::Zero(n);
  Vector q = q0;
  for (std::size_t i = 0; i < outer_count(mem, cfg); ++i) {
    Vector p = entmax_of(cfg.beta * (mem.scores(q) - cfg.lambda * a), cfg.alpha);
    a = cfg.tau * p + (1.0 - cfg.tau) * a;
    q = mem.combine(p);
    for (std::size_t j = 0; j < cfg.inner_steps; ++j) {
      p = entmax_of(cfg.beta * mem.scores(q), cfg.alpha);
      q = mem.combine(p);
    }
    trace.steps.push_back(make_step(mem, i + 1, std::move(p), q, cfg));
  }
  return trace;
}

RecallTrace sequential_recall(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg) {
  check_common(mem, q0, cfg);
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw DomainError("recall: tau must be in (0, 1]");
  if (!(cfg.omega >= 1.0)) throw DomainError("recall: omega must be >= 1");
  if (!(cfg.alpha >= 1.0)) throw DomainError("recall: alpha must be >= 1");
  const std::size_t n = mem.size();
  if (n < 2) throw DomainError("sequential recall needs at least two patterns");
  const SeqKSubsetsSpec seq{n, 2, cfg.t};
  const MapOracle oracle = seq_ksubsets_oracle(seq);
  const double inner_scale = cfg.inner_beta ? cfg.beta : 1.0;

  RecallTrace trace;
  Vector a = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector q = q0;
  for (std::size_t i = 0; i < outer_count(mem, cfg); ++i) {
    const Vector s = cfg.beta * (mem.scores(q) - cfg.lambda * a);
    const Vector y = seq.on_marginals(sparsemap(oracle, seq.scores(s)).unary);
    q = mem.combine(y) - q;
    Vector p = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < cfg.inner_steps; ++j) {
      p = entmax_of(inner_scale * mem.scores(q), cfg.alpha);
      q = mem.combine(p);
    }
    a = cfg.tau * (y - cfg.omega * p) + (1.0 - cfg.tau) * a;
    trace.steps.push_back(make_step(mem, i + 1, y, q, cfg));
  }
  return trace;
}

double unique_memory_ratio(const std::vector<int>& matched, std::size_t n_patterns) {
  if (n_patterns == 0) throw DomainError("unique memory ratio: no patterns");
  std::set<int> distinct;
  for (int m : matched)
    if (m > 0) distinct.insert(m);
  return static_cast<double>(distinct.size()) / static_cast<double>(n_patterns);
}

double unique_memory_ratio(const RecallTrace& trace, std::size_t n_patterns) {
  if (trace.steps.empty()) throw DomainError("unique memory ratio: empty trace");
  return unique_memory_ratio(trace.matched_sequence(), n_patterns);
}

std::size_t levenshtein_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double levenshtein_coefficient(const std::vector<int>& recalled, const std::vector<int>& reference) {
  if (reference.empty()) throw DomainError("levenshtein coefficient: empty reference");
  return 1.0 - static_cast<double>(levenshtein_distance(recalled, reference)) /
                   static_cast<double>(reference.size());
}

std::vector<int> successor_chain(std::size_t n_patterns) {
  std::vector<int> ref;
  for (std::size_t i = 2; i <= n_patterns; ++i) ref.push_back(static_cast<int>(i));
  return ref;
}

void write_recall_json(std::ostream& out, const RecallTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"step", s.step},
                     {"matched", s.matched == 0 ? nlohmann::json(nullptr) : nlohmann::json(s.matched)},
                     {"similarity", s.similarity},
                     {"distribution", std::vector<double>(s.distribution.data(), s.distribution.data() + s.distribution.size())}});
  }
  out << nlohmann::json{{"exhausted", trace.exhausted}, {"steps", steps}}.dump(2) << '\n';
}

void write_recall_csv(std::ostream& out, const RecallTrace& trace) {
  out << "step,matched,similarity,support\n";
  out.precision(17);
  for (const auto& s : trace.steps)
    out << s.step << ',' << s.matched << ',' << s.similarity << ','
        << (s.distribution.array() > 0.0).count() << '\n';
}

}  // namespace hfy
