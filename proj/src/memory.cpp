#include "hfy/memory.hpp"

#include <cmath>
#include <limits>

#include "hfy/errors.hpp"

namespace hfy {

PatternMemory::PatternMemory(Matrix patterns) : x_(std::move(patterns)) {
  if (x_.rows() < 1 || x_.cols() < 1) throw DomainError("PatternMemory: need at least one pattern of dimension >= 1");
  if (!x_.allFinite()) throw DomainError("PatternMemory: non-finite pattern entries");
  norms_ = x_.rowwise().norm();
  max_norm_ = norms_.maxCoeff();
  mean_ = x_.colwise().mean().transpose();
}

Vector PatternMemory::scores(const Vector& q) const {
  if (q.size() != x_.cols()) throw DomainError("PatternMemory: query dimension mismatch");
  return x_ * q;
}

Vector PatternMemory::combine(const Vector& p) const {
  if (p.size() != x_.rows()) throw DomainError("PatternMemory: weight vector length mismatch");
  return x_.transpose() * p;
}

double PatternMemory::separation(std::size_t i) const {
  if (i >= size()) throw DomainError("PatternMemory: pattern index out of range");
  if (size() == 1) return std::numeric_limits<double>::infinity();
  const auto ii = static_cast<Eigen::Index>(i);
  const Vector s = x_ * x_.row(ii).transpose();
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (j != ii) best = std::max(best, s[j]);
  return s[ii] - best;
}

Vector PatternMemory::separations() const {
  const auto n = x_.rows();
  Vector out(n);
  if (n == 1) {
    out[0] = std::numeric_limits<double>::infinity();
    return out;
  }
  const Matrix gram = x_ * x_.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) best = std::max(best, gram(i, j));
    out[i] = gram(i, i) - best;
  }
  return out;
}

double PatternMemory::spectral_norm(double rel_tol, int max_iter) const {
  const Matrix gram = x_.transpose() * x_;
  Vector v = Vector::Ones(gram.rows()) / std::sqrt(static_cast<double>(gram.rows()));
  // A fixed start can be orthogonal to the top eigenvector; nudge it.
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * static_cast<double>(i + 1) / static_cast<double>(v.size());
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = gram * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / nw;
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace hfy
