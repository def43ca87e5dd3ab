#include "hfy/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hfy/errors.hpp"

namespace hfy {
namespace {

void require_finite(const Vector& theta, const char* who) {
  if (theta.size() == 0) throw DomainError(std::string(who) + ": empty score vector");
  if (!theta.allFinite()) throw DomainError(std::string(who) + ": non-finite scores");
}

Vector one_hot_single() { return Vector::Ones(1); }

// Indices sorted by descending score, ties by ascending index.
std::vector<Eigen::Index> order_desc(const Vector& theta) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return theta[a] > theta[b]; });
  return idx;
}

double safe_xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

double logsumexp(const Vector& theta) {
  const double mx = theta.maxCoeff();
  return mx + std::log((theta.array() - mx).exp().sum());
}

}  // namespace

std::vector<std::size_t> support_of(const Vector& y) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] > 0.0) out.push_back(static_cast<std::size_t>(i));
  return out;
}

Vector softmax(const Vector& theta, double beta) {
  require_finite(theta, "softmax");
  if (!(beta > 0.0)) throw DomainError("softmax: beta must be positive");
  if (theta.size() == 1) return one_hot_single();
  Vector z = beta * theta;
  z.array() -= z.maxCoeff();
  Vector e = z.array().exp();
  return e / e.sum();
}

Vector project_simplex(const Vector& theta, double mass) {
  require_finite(theta, "project_simplex");
  if (!(mass > 0.0)) throw DomainError("project_simplex: mass must be positive");
  const auto n = theta.size();
  if (n == 1) return Vector::Constant(1, mass);

  const auto order = order_desc(theta);
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v = theta[order[static_cast<std::size_t>(k)]];
    cumsum += v;
    const double candidate = (cumsum - mass) / static_cast<double>(k + 1);
    if (v - candidate > 0.0)
      tau = candidate;
    else
      break;
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = theta[i] - tau;
    y[i] = d > 0.0 ? d : 0.0;
  }
  return y;
}

Vector sparsemax(const Vector& theta) {
  require_finite(theta, "sparsemax");
  if (theta.size() == 1) return one_hot_single();
  return project_simplex(theta, 1.0);
}

Vector entmax(const Vector& theta, double alpha, int iters) {
  require_finite(theta, "entmax");
  if (!(alpha >= 1.0)) throw DomainError("entmax: alpha must be >= 1");
  if (iters < 1) throw DomainError("entmax: iteration count must be >= 1");
  if (alpha == 1.0) return softmax(theta, 1.0);
  const auto n = theta.size();
  if (n == 1) return one_hot_single();

  // y_i = [(alpha - 1) theta_i - tau]_+^{1/(alpha-1)}
  const double am1 = alpha - 1.0;
  const double inv = 1.0 / am1;
  const Vector scaled = am1 * theta;
  const double mx = scaled.maxCoeff();
  double lo = mx - 1.0;
  double hi = mx - std::pow(1.0 / static_cast<double>(n), am1);

  auto mass_at = [&](double tau, Vector& out) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = scaled[i] - tau;
      out[i] = d > 0.0 ? std::pow(d, inv) : 0.0;
      s += out[i];
    }
    return s;
  };

  Vector y(n);
  double tau = lo;
  for (int t = 0; t < iters; ++t) {
    tau = 0.5 * (lo + hi);
    const double s = mass_at(tau, y);
    if (std::abs(s - 1.0) <= 1e-12) break;
    if (s < 1.0)
      hi = tau;
    else
      lo = tau;
  }
  const double s = mass_at(tau, y);
  return y / s;
}

Vector normmax(const Vector& theta, double gamma, int iters) {
  require_finite(theta, "normmax");
  if (!(gamma > 1.0)) throw DomainError("normmax: gamma must be > 1");
  if (iters < 1) throw DomainError("normmax: iteration count must be >= 1");
  const auto n = theta.size();
  if (n == 1) return one_hot_single();

  const double mass_exp = gamma / (gamma - 1.0);
  const double prob_exp = 1.0 / (gamma - 1.0);
  const double mx = theta.maxCoeff();
  double mu_min = mx - 1.0;
  double mu_max = mx - std::pow(static_cast<double>(n), 1.0 - gamma);

  double mu = mu_min;
  for (int t = 0; t < iters; ++t) {
    mu = 0.5 * (mu_min + mu_max);
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = theta[j] - mu;
      if (d > 0.0) z += std::pow(d, mass_exp);
    }
    if (std::abs(z - 1.0) <= 1e-12) break;
    if (z < 1.0)
      mu_max = mu;
    else
      mu_min = mu;
  }

  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = theta[i] - mu;
    y[i] = d > 0.0 ? std::pow(d, prob_exp) : 0.0;
  }
  return y / y.sum();
}

Vector constrained_sparsemax(const Vector& theta, const Vector& upper) {
  require_finite(theta, "constrained_sparsemax");
  const auto n = theta.size();
  if (upper.size() != n) throw DomainError("constrained_sparsemax: bound size mismatch");
  if (!upper.allFinite() || (upper.array() < 0.0).any())
    throw DomainError("constrained_sparsemax: bounds must be finite and non-negative");
  if (upper.sum() < 1.0 - 1e-12)
    throw DomainError("constrained_sparsemax: infeasible bounds (sum < 1)");

  std::vector<bool> clamped(static_cast<std::size_t>(n), false);
  Vector y = Vector::Zero(n);
  // The clamped set only grows, so at most n rounds.
  for (Eigen::Index round = 0; round <= n; ++round) {
    double residual = 1.0;
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (clamped[static_cast<std::size_t>(i)]) {
        y[i] = upper[i];
        residual -= upper[i];
      } else {
        free_idx.push_back(i);
      }
    }
    if (free_idx.empty()) return y;
    Vector free_theta(static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t j = 0; j < free_idx.size(); ++j) free_theta[static_cast<Eigen::Index>(j)] = theta[free_idx[j]];
    Vector free_y = residual > 0.0 ? project_simplex(free_theta, residual)
                                   : Vector::Zero(free_theta.size());
    bool violated = false;
    for (std::size_t j = 0; j < free_idx.size(); ++j) {
      const auto i = free_idx[j];
      y[i] = free_y[static_cast<Eigen::Index>(j)];
      if (y[i] > upper[i]) {
        clamped[static_cast<std::size_t>(i)] = true;
        violated = true;
      }
    }
    if (!violated) return y;
  }
  return y;
}

NegentropySpec NegentropySpec::shannon(double beta) {
  if (!(beta > 0.0)) throw DomainError("negentropy: beta must be positive");
  return {Kind::shannon, 1.0, beta};
}

NegentropySpec NegentropySpec::tsallis(double alpha, double beta) {
  if (!(beta > 0.0)) throw DomainError("negentropy: beta must be positive");
  if (!(alpha >= 1.0)) throw DomainError("tsallis negentropy: alpha must be >= 1");
  if (alpha == 1.0) return shannon(beta);
  return {Kind::tsallis, alpha, beta};
}

NegentropySpec NegentropySpec::norm(double gamma, double beta) {
  if (!(beta > 0.0)) throw DomainError("negentropy: beta must be positive");
  if (!(gamma > 1.0)) throw DomainError("norm negentropy: gamma must be > 1");
  return {Kind::norm, gamma, beta};
}

Vector NegentropySpec::predict(const Vector& theta) const {
  switch (kind) {
    case Kind::shannon:
      return softmax(theta, beta);
    case Kind::tsallis:
      if (param == 2.0) return sparsemax(beta * theta);
      return entmax(beta * theta, param);
    case Kind::norm:
      return normmax(beta * theta, param);
  }
  return {};
}

double negentropy_value(const Vector& y, const NegentropySpec& spec) {
  switch (spec.kind) {
    case NegentropySpec::Kind::shannon: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) s += safe_xlogx(y[i]);
      return s;
    }
    case NegentropySpec::Kind::tsallis: {
      const double a = spec.param;
      const double p = y.array().max(0.0).pow(a).sum();
      return (p - 1.0) / (a * (a - 1.0));
    }
    case NegentropySpec::Kind::norm: {
      const double g = spec.param;
      const double p = y.array().abs().pow(g).sum();
      return std::pow(p, 1.0 / g) - 1.0;
    }
  }
  return 0.0;
}

double NegentropySpec::value(const Vector& y) const { return negentropy_value(y, *this) / beta; }

double NegentropySpec::conjugate(const Vector& theta) const {
  // (Omega/beta)*(theta) = Omega*(beta theta) / beta
  const Vector scaled = beta * theta;
  if (kind == Kind::shannon) return logsumexp(scaled) / beta;
  const Vector y = predict(theta);
  return (scaled.dot(y) - negentropy_value(y, *this)) / beta;
}

double fy_loss(const Vector& theta, const Vector& y, const NegentropySpec& spec) {
  if (theta.size() != y.size()) throw DomainError("fy_loss: size mismatch");
  return spec.value(y) + spec.conjugate(theta) - theta.dot(y);
}

std::optional<double> margin_of(const NegentropySpec& spec) {
  switch (spec.kind) {
    case NegentropySpec::Kind::shannon:
      return std::nullopt;
    case NegentropySpec::Kind::tsallis:
      return 1.0 / (spec.param - 1.0);
    case NegentropySpec::Kind::norm:
      return 1.0;
  }
  return std::nullopt;
}

}  // namespace hfy
