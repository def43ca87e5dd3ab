#pragma once

// Regularized argmax transformations onto the probability simplex and the
// generalized negentropies that induce them.
//
// Every transform takes a score vector theta and returns a point of the
// simplex. Sparse transforms (sparsemax, entmax with alpha > 1, normmax,
// constrained sparsemax) emit exact zeros outside their support.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace hfy {

using Vector = Eigen::VectorXd;

/// Default number of bisection halvings for entmax and normmax.
inline constexpr int kDefaultBisectionIters = 50;

/// Indices of the strictly positive entries of y.
std::vector<std::size_t> support_of(const Vector& y);

/// softmax(beta * theta), max-subtracted.
Vector softmax(const Vector& theta, double beta = 1.0);

/// Euclidean projection onto the probability simplex (sort and threshold).
Vector sparsemax(const Vector& theta);

/// Euclidean projection onto {y >= 0, sum(y) = mass}. Requires mass > 0.
Vector project_simplex(const Vector& theta, double mass);

/// alpha-entmax by bisection on the threshold. alpha == 1 dispatches to
/// softmax(theta, 1). The result is renormalized to sum to one.
Vector entmax(const Vector& theta, double alpha, int iters = kDefaultBisectionIters);

/// gamma-normmax by bisection on mu over [max(theta) - 1, max(theta) - N^(1-gamma)].
Vector normmax(const Vector& theta, double gamma, int iters = kDefaultBisectionIters);

/// argmax theta'y - 0.5 |y|^2 over {y in simplex, y <= u}.
/// Solved by clamping violators to their bound and re-projecting the free
/// coordinates onto the residual mass until no bound is violated.
Vector constrained_sparsemax(const Vector& theta, const Vector& upper);

/// Generalized negentropy with an inverse temperature.
///
/// The temperature is applied to the scores: predict(theta) is
/// y_Omega(beta * theta), which equals the argmax regularized by
/// Omega / beta. value(), conjugate() and loss() are all reported for the
/// tempered regularizer Omega / beta.
struct NegentropySpec {
  enum class Kind { shannon, tsallis, norm };

  Kind kind = Kind::shannon;
  double param = 1.0;  // alpha for tsallis, gamma for norm
  double beta = 1.0;

  static NegentropySpec shannon(double beta = 1.0);
  /// alpha == 1 is routed to shannon. Requires alpha >= 1.
  static NegentropySpec tsallis(double alpha, double beta = 1.0);
  static NegentropySpec gini(double beta = 1.0) { return tsallis(2.0, beta); }
  /// Requires gamma > 1.
  static NegentropySpec norm(double gamma, double beta = 1.0);

  /// The regularized argmax y_Omega(beta * theta).
  Vector predict(const Vector& theta) const;
  /// Omega(y) / beta.
  double value(const Vector& y) const;
  /// Fenchel conjugate of Omega / beta evaluated at theta.
  double conjugate(const Vector& theta) const;
};

/// Untempered negentropy Omega(y) (beta ignored).
double negentropy_value(const Vector& y, const NegentropySpec& spec);

/// Fenchel-Young loss Omega(y) + Omega*(theta) - theta'y for the tempered
/// regularizer. Non-negative, zero iff y == spec.predict(theta).
double fy_loss(const Vector& theta, const Vector& y, const NegentropySpec& spec);

/// Score gap beyond which the loss is exactly zero (for beta = 1):
/// 1/(alpha-1) for tsallis, 1 for norm, none for shannon.
std::optional<double> margin_of(const NegentropySpec& spec);

}  // namespace hfy
