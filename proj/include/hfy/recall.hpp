#pragma once

// Free and sequential recall simulators and their episode metrics.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "hfy/memory.hpp"

namespace hfy {

struct RecallConfig {
  double beta = 1.0;
  std::size_t inner_steps = 20;  // T
  double lambda = 0.0;           // penalty weight
  double tau = 1.0;              // decay rate of the moving average
  double omega = 1.0;            // successor boost in sequential recall
  double t = 0.0;                // transition score in sequential recall
  double alpha = 2.0;            // entmax order of the (inner) transform; 1 = softmax
  bool inner_beta = false;       // sequential recall: also scale the inner loop by beta
  double match_threshold = 0.9;  // cosine needed to call a query "recalled"
  std::size_t outer_steps = 0;   // 0 = one outer step per pattern
};

struct RecallStep {
  std::size_t step = 0;
  Vector distribution;  // p, or the sequential marginals y
  Vector query;         // query after the step (the recalled item)
  int matched = 0;      // 1-based pattern index, 0 when nothing matches
  double similarity = 0.0;
};

struct RecallTrace {
  std::vector<RecallStep> steps;
  bool exhausted = false;  // free recall ran out of probability mass early

  std::vector<int> matched_sequence() const;
};

/// Constrained-sparsemax free recall. Upper bounds start at 1 and lose the
/// attended mass after every outer step.
RecallTrace free_recall_constrained(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg);

/// Penalized alpha-entmax free recall with an exponentially weighted penalty.
RecallTrace free_recall_penalized(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg);

/// Sequential recall with sequential 2-subsets SparseMAP in the outer loop.
/// Patterns are assumed stored in sequence order.
RecallTrace sequential_recall(const PatternMemory& mem, const Vector& q0, const RecallConfig& cfg);

/// 1-based index of the pattern with the largest cosine to q, or 0 when that
/// cosine does not exceed the threshold.
int match_pattern(const PatternMemory& mem, const Vector& q, double threshold, double* similarity = nullptr);

double unique_memory_ratio(const RecallTrace& trace, std::size_t n_patterns);
double unique_memory_ratio(const std::vector<int>& matched, std::size_t n_patterns);

std::size_t levenshtein_distance(const std::vector<int>& a, const std::vector<int>& b);
/// 1 - D/C with C the reference length.
double levenshtein_coefficient(const std::vector<int>& recalled, const std::vector<int>& reference);

/// Reference order 2..N for a cue at pattern 1.
std::vector<int> successor_chain(std::size_t n_patterns);

void write_recall_json(std::ostream& out, const RecallTrace& trace);
/// Columns: step,matched,similarity,support
void write_recall_csv(std::ostream& out, const RecallTrace& trace);

}  // namespace hfy
