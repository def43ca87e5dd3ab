#pragma once

// Structured regularized argmax over marginal polytopes conv(Y).
//
// A structure is a bit vector y = [y_V; y_F] split into a unary (variable)
// part and a factor part. SparseMAP solves
//
//   argmax_{y in conv(Y)}  theta_V'y_V + theta_F'y_F - 0.5 |y_V|^2
//
// with an active-set method that only needs a MAP oracle over Y. Only the
// unary part is quadratically regularized.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "hfy/simplex.hpp"

namespace hfy {

/// Scores for a factor-graph structure: unary (variable-state) scores and
/// higher-order factor-configuration scores.
struct StructureScores {
  Vector unary;
  Vector factor;
};

/// One vertex of the marginal polytope. Entries are exactly 0 or 1.
struct Structure {
  Vector unary;
  Vector factor;

  double score(const StructureScores& s) const;
  bool operator==(const Structure& other) const;
};

/// Returns an exact maximizer of unary'y_V + factor'y_F over Y.
using MapOracle = std::function<Structure(const StructureScores&)>;

/// Subsets of exactly k out of n patterns. The unary part is the n-bit
/// indicator; there are no factors.
struct KSubsetsSpec {
  std::size_t n = 1;
  std::size_t k = 1;
};

/// k-subsets on a chain with an Ising transition score t on each edge.
///
/// Encoding follows the factor-graph form: each variable i carries a one-hot
/// state pair [off, on] (unary length 2n), each edge (i, i+1) a one-hot
/// configuration over [off-off, off-on, on-off, on-on] (factor length 4(n-1)).
struct SeqKSubsetsSpec {
  std::size_t n = 1;
  std::size_t k = 1;
  double t = 0.0;

  /// Scores for emission scores s: unary [0, s_i], pairwise [0, 0, 0, t].
  StructureScores scores(const Vector& s) const;
  /// The "on" marginal of each variable (length n).
  Vector on_marginals(const Vector& unary) const;
};

/// Indicator of the k largest entries of theta, ties to the lower index.
Vector map_ksubsets(const Vector& theta, std::size_t k);

/// Exact MAP for a chain with a budget of k "on" variables, by dynamic
/// programming over (position, count, state). Ties go to the
/// lexicographically earliest activation pattern.
Structure map_seq_ksubsets(const StructureScores& scores, const SeqKSubsetsSpec& spec);

/// Emission-score convenience form: returns the n-bit "on" indicator.
Vector map_seq_ksubsets(const Vector& s, const SeqKSubsetsSpec& spec);

MapOracle ksubsets_oracle(const KSubsetsSpec& spec);
MapOracle seq_ksubsets_oracle(const SeqKSubsetsSpec& spec);

/// Euclidean projection onto {y in [0,1]^N : sum(y) = k}. This is SparseMAP
/// for the k-subsets polytope.
Vector project_capped_simplex(const Vector& theta, std::size_t k);

struct ActiveSetState {
  std::vector<Structure> structures;
  std::vector<double> weights;
  std::size_t iterations = 0;
  /// Restricted-QP objective 0.5|y_V|^2 - theta'y after each iteration.
  std::vector<double> objective;
  bool converged = false;
};

struct SparseMapResult {
  Vector unary;   // marginals of the unary part
  Vector factor;  // marginals of the factor part
  ActiveSetState state;
};

struct SparseMapOptions {
  std::size_t max_iter = 100;
  double tol = 1e-9;
  std::size_t max_active = 1000;
};

/// SparseMAP by the active-set method. Non-convergence within max_iter
/// returns the last iterate with state.converged == false.
SparseMapResult sparsemap(const MapOracle& oracle, const StructureScores& scores,
                          const SparseMapOptions& opts = {});

/// All vertices of the k-subsets polytope. Throws CapacityError beyond limit.
std::vector<Structure> enumerate_ksubsets(const KSubsetsSpec& spec, std::size_t limit = 1'000'000);
/// All vertices of the sequential k-subsets polytope.
std::vector<Structure> enumerate_seq_ksubsets(const SeqKSubsetsSpec& spec,
                                              std::size_t limit = 1'000'000);

/// Structured margin condition:
///   theta'y >= max_{y' in Y} theta'y' + 0.5 |y - y'|^2   (inclusive).
bool structured_margin_satisfied(const StructureScores& scores, const Structure& y,
                                 const std::vector<Structure>& vertices);

}  // namespace hfy
