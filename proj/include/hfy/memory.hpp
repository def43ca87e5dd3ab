#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "hfy/simplex.hpp"

namespace hfy {

using Matrix = Eigen::MatrixXd;

/// Stored patterns, one per row of X (N x D). Immutable after construction;
/// norms, the max norm M and the mean pattern are cached.
class PatternMemory {
 public:
  explicit PatternMemory(Matrix patterns);

  const Matrix& patterns() const noexcept { return x_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  Vector row(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)).transpose(); }

  const Vector& norms() const noexcept { return norms_; }
  double max_norm() const noexcept { return max_norm_; }
  const Vector& mean() const noexcept { return mean_; }

  /// Scores Xq.
  Vector scores(const Vector& q) const;
  /// X'p.
  Vector combine(const Vector& p) const;

  /// x_i'x_i - max_{j != i} x_i'x_j; +inf for a single pattern.
  double separation(std::size_t i) const;
  Vector separations() const;

  /// Largest singular value of X by power iteration on X'X.
  double spectral_norm(double rel_tol = 1e-10, int max_iter = 10000) const;

 private:
  Matrix x_;
  Vector norms_;
  double max_norm_ = 0.0;
  Vector mean_;
};

}  // namespace hfy
