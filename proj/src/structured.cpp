#include "hfy/structured.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hfy/errors.hpp"

namespace hfy {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_budget(std::size_t n, std::size_t k, const char* who) {
  if (n == 0 || k < 1 || k > n)
    throw DomainError(std::string(who) + ": need 1 <= k <= n (got n=" + std::to_string(n) +
                      ", k=" + std::to_string(k) + ")");
}

// Edge configuration index for (prev, cur) states: off-off, off-on, on-off, on-on.
inline Eigen::Index edge_config(int prev, int cur) { return 2 * prev + cur; }

Structure seq_structure_from_bits(const std::vector<int>& on, std::size_t n) {
  Structure s;
  const auto nn = static_cast<Eigen::Index>(n);
  s.unary = Vector::Zero(2 * nn);
  s.factor = Vector::Zero(nn > 0 ? 4 * (nn - 1) : 0);
  for (Eigen::Index i = 0; i < nn; ++i) {
    s.unary[2 * i + on[static_cast<std::size_t>(i)]] = 1.0;
    if (i > 0)
      s.factor[4 * (i - 1) + edge_config(on[static_cast<std::size_t>(i - 1)], on[static_cast<std::size_t>(i)])] = 1.0;
  }
  return s;
}

std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  k = std::min(k, n - k);
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (acc > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(acc));
}

// All k-of-n masks in lexicographic order of the index sets.
std::vector<std::vector<int>> k_of_n_masks(std::size_t n, std::size_t k, std::size_t limit) {
  check_budget(n, k, "enumerate");
  if (binomial_capped(n, k, limit) > limit)
    throw CapacityError("enumeration of C(" + std::to_string(n) + "," + std::to_string(k) +
                        ") vertices exceeds limit " + std::to_string(limit));
  std::vector<int> mask(n, 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), 1);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(mask);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

}  // namespace

double Structure::score(const StructureScores& s) const {
  double v = unary.dot(s.unary);
  if (factor.size() > 0) v += factor.dot(s.factor);
  return v;
}

bool Structure::operator==(const Structure& other) const {
  return unary.size() == other.unary.size() && factor.size() == other.factor.size() &&
         unary == other.unary && factor == other.factor;
}

StructureScores SeqKSubsetsSpec::scores(const Vector& s) const {
  if (static_cast<std::size_t>(s.size()) != n)
    throw DomainError("sequential k-subsets: emission score length must equal n");
  const auto nn = static_cast<Eigen::Index>(n);
  StructureScores out;
  out.unary = Vector::Zero(2 * nn);
  for (Eigen::Index i = 0; i < nn; ++i) out.unary[2 * i + 1] = s[i];
  out.factor = Vector::Zero(nn > 0 ? 4 * (nn - 1) : 0);
  for (Eigen::Index e = 0; e + 1 < nn; ++e) out.factor[4 * e + edge_config(1, 1)] = t;
  return out;
}

Vector SeqKSubsetsSpec::on_marginals(const Vector& unary) const {
  const auto nn = static_cast<Eigen::Index>(n);
  if (unary.size() != 2 * nn) throw DomainError("sequential k-subsets: unary length must be 2n");
  Vector on(nn);
  for (Eigen::Index i = 0; i < nn; ++i) on[i] = unary[2 * i + 1];
  return on;
}

Vector map_ksubsets(const Vector& theta, std::size_t k) {
  const auto n = static_cast<std::size_t>(theta.size());
  check_budget(n, k, "map_ksubsets");
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return theta[a] > theta[b]; });
  Vector y = Vector::Zero(theta.size());
  for (std::size_t j = 0; j < k; ++j) y[idx[j]] = 1.0;
  return y;
}

Structure map_seq_ksubsets(const StructureScores& scores, const SeqKSubsetsSpec& spec) {
  const std::size_t n = spec.n;
  const std::size_t k = spec.k;
  check_budget(n, k, "map_seq_ksubsets");
  const auto nn = static_cast<Eigen::Index>(n);
  if (scores.unary.size() != 2 * nn || scores.factor.size() != (nn > 0 ? 4 * (nn - 1) : 0))
    throw DomainError("map_seq_ksubsets: score dimensions do not match the chain");

  // best[i][c][p]: best score over positions i..n-1 with c "on" left to place,
  // given the previous variable's state p.
  const std::size_t K = k + 1;
  std::vector<double> best((n + 1) * K * 2, kNegInf);
  auto at = [&](std::size_t i, std::size_t c, int p) -> double& {
    return best[(i * K + c) * 2 + static_cast<std::size_t>(p)];
  };
  at(n, 0, 0) = 0.0;
  at(n, 0, 1) = 0.0;

  auto option = [&](std::size_t i, std::size_t c, int p, int s) {
    if (s == 1 && c == 0) return kNegInf;
    const double tail = at(i + 1, c - static_cast<std::size_t>(s), s);
    if (tail == kNegInf) return kNegInf;
    const auto ii = static_cast<Eigen::Index>(i);
    double v = scores.unary[2 * ii + s] + tail;
    if (i > 0) v += scores.factor[4 * (ii - 1) + edge_config(p, s)];
    return v;
  };

  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t c = 0; c <= k; ++c) {
      if (c > n - i) continue;
      for (int p = 0; p < 2; ++p) at(i, c, p) = std::max(option(i, c, p, 0), option(i, c, p, 1));
    }
  }

  std::vector<int> on(n, 0);
  std::size_t c = k;
  int p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v_on = option(i, c, p, 1);
    const double v_off = option(i, c, p, 0);
    const int s = (v_on != kNegInf && v_on >= v_off) ? 1 : 0;
    on[i] = s;
    c -= static_cast<std::size_t>(s);
    p = s;
  }
  return seq_structure_from_bits(on, n);
}

Vector map_seq_ksubsets(const Vector& s, const SeqKSubsetsSpec& spec) {
  return spec.on_marginals(map_seq_ksubsets(spec.scores(s), spec).unary);
}

MapOracle ksubsets_oracle(const KSubsetsSpec& spec) {
  check_budget(spec.n, spec.k, "ksubsets_oracle");
  return [spec](const StructureScores& s) {
    if (static_cast<std::size_t>(s.unary.size()) != spec.n)
      throw DomainError("k-subsets oracle: unary length must equal n");
    return Structure{map_ksubsets(s.unary, spec.k), Vector()};
  };
}

MapOracle seq_ksubsets_oracle(const SeqKSubsetsSpec& spec) {
  check_budget(spec.n, spec.k, "seq_ksubsets_oracle");
  return [spec](const StructureScores& s) { return map_seq_ksubsets(s, spec); };
}

Vector project_capped_simplex(const Vector& theta, std::size_t k) {
  const auto n = static_cast<std::size_t>(theta.size());
  check_budget(n, k, "project_capped_simplex");
  if (!theta.allFinite()) throw DomainError("project_capped_simplex: non-finite scores");
  if (k == n) return Vector::Ones(theta.size());

  // g(tau) = sum_i clip(theta_i - tau, 0, 1) is piecewise linear and
  // non-increasing with kinks at theta_i - 1 and theta_i.
  std::vector<double> kinks;
  kinks.reserve(2 * n);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    kinks.push_back(theta[i] - 1.0);
    kinks.push_back(theta[i]);
  }
  std::sort(kinks.begin(), kinks.end());
  auto g = [&](double tau) {
    return (theta.array() - tau).max(0.0).min(1.0).sum();
  };
  const double target = static_cast<double>(k);
  // Largest kink index j with g(kinks[j]) >= k. g(kinks.front()) == n >= k.
  std::size_t lo = 0;
  std::size_t hi = kinks.size() - 1;  // g(kinks.back()) == 0 < k
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (g(kinks[mid]) >= target)
      lo = mid;
    else
      hi = mid;
  }
  const double g_lo = g(kinks[lo]);
  const double g_hi = g(kinks[hi]);
  double tau = kinks[lo];
  if (g_lo > g_hi) tau = kinks[lo] + (g_lo - target) / (g_lo - g_hi) * (kinks[hi] - kinks[lo]);
  return (theta.array() - tau).max(0.0).min(1.0).matrix();
}

SparseMapResult sparsemap(const MapOracle& oracle, const StructureScores& scores,
                          const SparseMapOptions& opts) {
  SparseMapResult res;
  ActiveSetState& st = res.state;
  st.structures.push_back(oracle(scores));
  st.weights.push_back(1.0);

  const auto nv = scores.unary.size();
  const auto nf = scores.factor.size();

  auto marginals = [&](Vector& mu_v, Vector& mu_f) {
    mu_v = Vector::Zero(nv);
    mu_f = Vector::Zero(nf);
    for (std::size_t j = 0; j < st.structures.size(); ++j) {
      mu_v += st.weights[j] * st.structures[j].unary;
      if (nf > 0) mu_f += st.weights[j] * st.structures[j].factor;
    }
  };
  auto objective = [&](const Vector& mu_v, const Vector& mu_f) {
    double lin = scores.unary.dot(mu_v);
    if (nf > 0) lin += scores.factor.dot(mu_f);
    return 0.5 * mu_v.squaredNorm() - lin;
  };

  Vector mu_v;
  Vector mu_f;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    marginals(mu_v, mu_f);
    st.objective.push_back(objective(mu_v, mu_f));
    st.iterations = it + 1;

    StructureScores adjusted{scores.unary - mu_v, scores.factor};
    Structure candidate = oracle(adjusted);
    double current = adjusted.unary.dot(mu_v);
    if (nf > 0) current += adjusted.factor.dot(mu_f);
    const double gap = candidate.score(adjusted) - current;
    if (gap <= opts.tol) {
      st.converged = true;
      break;
    }
    if (std::find(st.structures.begin(), st.structures.end(), candidate) != st.structures.end())
      break;  // restricted problem already optimal up to round-off
    if (st.structures.size() >= opts.max_active) break;

    st.structures.push_back(std::move(candidate));
    st.weights.push_back(0.0);

    // Restricted QP over the weight simplex:
    //   min_w 0.5 w'Gw - c'w  s.t. 1'w = 1, w >= 0.
    // Primal active set warm-started at the current weights; each pass drops
    // one blocking structure. G is only semidefinite: the unary parts of
    // chain structures can be affinely dependent. When the KKT system is then
    // inconsistent the restricted problem is unbounded along a null direction
    // of G, and we follow that direction until a weight hits zero.
    while (true) {
      const auto J = static_cast<Eigen::Index>(st.structures.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(J + 1, J + 1);
      Vector rhs(J + 1);
      for (Eigen::Index a = 0; a < J; ++a) {
        const auto& ya = st.structures[static_cast<std::size_t>(a)];
        for (Eigen::Index b = a; b < J; ++b) {
          const double v = ya.unary.dot(st.structures[static_cast<std::size_t>(b)].unary);
          kkt(a, b) = v;
          kkt(b, a) = v;
        }
        kkt(a, J) = 1.0;
        kkt(J, a) = 1.0;
        rhs[a] = ya.score(scores);
      }
      rhs[J] = 1.0;

      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kkt);
      const Vector& lam = eig.eigenvalues();
      const double cutoff = 1e-9 * std::max(1.0, lam.cwiseAbs().maxCoeff());
      Vector sol = Vector::Zero(J + 1);
      Vector ray = Vector::Zero(J + 1);
      for (Eigen::Index e = 0; e < J + 1; ++e) {
        const double proj = eig.eigenvectors().col(e).dot(rhs);
        if (std::abs(lam[e]) > cutoff)
          sol += (proj / lam[e]) * eig.eigenvectors().col(e);
        else
          ray += proj * eig.eigenvectors().col(e);
      }
      const bool unbounded = ray.head(J).dot(rhs.head(J)) > 1e-12 * std::max(1.0, rhs.head(J).norm());

      // Move along dir = sol - w (bounded case, full step 1) or along the
      // descent ray (unbounded case, step limited only by the bounds).
      Vector dir(J);
      for (Eigen::Index a = 0; a < J; ++a)
        dir[a] = unbounded ? ray[a] : sol[a] - st.weights[static_cast<std::size_t>(a)];
      double step = unbounded ? std::numeric_limits<double>::infinity() : 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index a = 0; a < J; ++a) {
        if (dir[a] >= 0.0) continue;
        const double w = st.weights[static_cast<std::size_t>(a)];
        if (!unbounded && sol[a] > 0.0) continue;
        const double s = w / -dir[a];
        if (s < step) {
          step = s;
          blocking = a;
        }
      }
      if (unbounded && blocking < 0) break;  // cannot happen: sum(dir) = 0
      for (Eigen::Index a = 0; a < J; ++a) st.weights[static_cast<std::size_t>(a)] += step * dir[a];
      if (blocking < 0) break;
      st.weights.erase(st.weights.begin() + blocking);
      st.structures.erase(st.structures.begin() + blocking);
    }

    // Drop structures whose weights fell to zero and renormalize.
    for (std::size_t j = st.weights.size(); j-- > 0;) {
      if (st.weights[j] <= 0.0) {
        st.weights.erase(st.weights.begin() + static_cast<std::ptrdiff_t>(j));
        st.structures.erase(st.structures.begin() + static_cast<std::ptrdiff_t>(j));
      }
    }
    const double total = std::accumulate(st.weights.begin(), st.weights.end(), 0.0);
    for (auto& w : st.weights) w /= total;
  }

  marginals(res.unary, res.factor);
  return res;
}

std::vector<Structure> enumerate_ksubsets(const KSubsetsSpec& spec, std::size_t limit) {
  std::vector<Structure> out;
  for (const auto& mask : k_of_n_masks(spec.n, spec.k, limit)) {
    Vector u(static_cast<Eigen::Index>(spec.n));
    for (std::size_t i = 0; i < spec.n; ++i) u[static_cast<Eigen::Index>(i)] = mask[i];
    out.push_back({u, Vector()});
  }
  return out;
}

std::vector<Structure> enumerate_seq_ksubsets(const SeqKSubsetsSpec& spec, std::size_t limit) {
  std::vector<Structure> out;
  for (const auto& mask : k_of_n_masks(spec.n, spec.k, limit))
    out.push_back(seq_structure_from_bits(mask, spec.n));
  return out;
}

bool structured_margin_satisfied(const StructureScores& scores, const Structure& y,
                                 const std::vector<Structure>& vertices) {
  const double own = y.score(scores);
  for (const auto& other : vertices) {
    double dist2 = (y.unary - other.unary).squaredNorm();
    if (y.factor.size() > 0) dist2 += (y.factor - other.factor).squaredNorm();
    if (own < other.score(scores) + 0.5 * dist2) return false;
  }
  return true;
}

}  // namespace hfy
