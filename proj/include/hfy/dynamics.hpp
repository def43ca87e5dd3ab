#pragma once

// Hopfield-Fenchel-Young update rules, energies and fixed-point iteration.
//
// One update is q+ = post(X' sep(Xq)): similarity, separation, projection,
// post-transformation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hfy/memory.hpp"
#include "hfy/simplex.hpp"
#include "hfy/structured.hpp"

namespace hfy {

struct SeparationSpec {
  enum class Kind { identity, spow, exp, softmax, entmax, normmax, ksubsets, seq_ksubsets };

  Kind kind = Kind::softmax;
  double beta = 1.0;
  double param = 0.0;  // r for spow, alpha for entmax, gamma for normmax, t for seq_ksubsets
  std::size_t k = 1;   // subset size for the sparsemap kinds
  /// Classic HN only: drop the self-coupling diag(X'X) from the Hebbian
  /// weights, i.e. subtract diag(X'X) * q after the projection.
  bool zero_self_coupling = false;

  static SeparationSpec identity(bool zero_self_coupling = false);
  static SeparationSpec spow(double r);
  static SeparationSpec exp(double beta);
  static SeparationSpec softmax(double beta);
  static SeparationSpec entmax(double alpha, double beta);
  static SeparationSpec sparsemax(double beta) { return entmax(2.0, beta); }
  static SeparationSpec normmax(double gamma, double beta);
  static SeparationSpec ksubsets(std::size_t k, double beta);
  static SeparationSpec seq_ksubsets(std::size_t k, double t, double beta);

  /// softmax, entmax and normmax: the separation is a regularized argmax on
  /// the simplex and the energy is defined.
  bool probabilistic() const noexcept;
  NegentropySpec negentropy() const;
  /// Margin of the regularizer; none for dense or non-probabilistic kinds.
  std::optional<double> margin() const;
  std::string describe() const;
};

struct PostSpec {
  enum class Kind { identity, l2norm, layernorm, tanh, sign };

  Kind kind = Kind::identity;
  double r = 1.0;      // l2norm radius
  double eta = 1.0;    // layernorm gain
  Vector delta;        // layernorm shift: empty = 0, size 1 = broadcast, else length D
  double eps = 1e-8;   // layernorm variance offset
  bool unbiased = false;  // layernorm variance with 1/(D-1)
  double beta = 1.0;   // tanh slope

  static PostSpec identity() { return {}; }
  static PostSpec l2norm(double r);
  static PostSpec layernorm(double eta, double delta = 0.0, double eps = 1e-8, bool unbiased = false);
  static PostSpec tanh(double beta);
  static PostSpec sign();

  std::string describe() const;
};

/// The separation map applied to scores theta = Xq.
Vector separation_apply(const SeparationSpec& spec, const Vector& theta);
Vector post_apply(const PostSpec& spec, const Vector& z);

Vector hopfield_update(const Vector& q, const PatternMemory& mem, const SeparationSpec& sep,
                       const PostSpec& post = {});

/// E(q) = -1/beta L(beta Xq; 1/N) + 0.5|q - mu_X|^2 + 0.5(M^2 - |mu_X|^2).
/// Defined for probabilistic separation kinds with the quadratic Psi.
double hfy_energy(const Vector& q, const PatternMemory& mem, const SeparationSpec& sep);

/// Upper bound min{2M^2, -Omega(1/N)/beta + M^2/2} on the energy over conv(X).
double hfy_energy_upper_bound(const PatternMemory& mem, const SeparationSpec& sep);

struct IterateOptions {
  std::size_t max_iter = 1000;
  double tol = 1e-8;
  bool keep_queries = true;
};

struct IterationTrace {
  std::vector<Vector> queries;   // q0, q1, ... (only q0 and the last when not kept)
  std::vector<double> energies;  // per query, when the energy is defined
  bool converged = false;
  std::size_t steps = 0;

  const Vector& final_query() const { return queries.back(); }
};

IterationTrace iterate(const Vector& q0, const PatternMemory& mem, const SeparationSpec& sep,
                       const PostSpec& post = {}, const IterateOptions& opts = {});

/// Support size of the separation output. Softmax counts entries > 0.01,
/// other kinds count strictly positive entries.
std::size_t support_size(const SeparationSpec& sep, const Vector& p);

struct RetrievalReport {
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::vector<bool> eligible;  // patterns meeting the well-separation bound

  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

/// One-step exact retrieval from eps-perturbed patterns. Only patterns with
/// Delta_i >= m/beta + 2 M eps are queried. Success means |q+ - x_i|_inf <= 1e-9.
RetrievalReport exact_retrieval_check(const PatternMemory& mem, const SeparationSpec& sep,
                                      double eps, std::size_t trials, std::uint64_t seed);

struct GridSpec {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t resolution = 51;  // points per axis
  double label_tol = 0.01;
  IterateOptions iterate;
};

/// Basin labels on a 2-D grid. For D = 3 the third coordinate is -(q1 + q2).
/// Label i+1 for convergence within label_tol of pattern i, 0 for metastable.
struct BasinGrid {
  std::vector<double> axis;
  std::vector<int> labels;  // row-major, labels[iy * res + ix]
  std::vector<std::size_t> steps;
  std::size_t resolution = 0;
};

BasinGrid basin_grid(const PatternMemory& mem, const SeparationSpec& sep, const PostSpec& post,
                     const GridSpec& grid);

/// Columns: x,y,label,steps
void write_basin_csv(std::ostream& out, const BasinGrid& grid);
/// Columns: step,energy,q0..q{D-1}; energy is empty when undefined.
void write_trace_csv(std::ostream& out, const IterationTrace& trace);

}  // namespace hfy
