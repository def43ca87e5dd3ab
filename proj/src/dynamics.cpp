#include "hfy/dynamics.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "hfy/errors.hpp"

namespace hfy {
namespace {

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("separation: beta must be positive");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

SeparationSpec SeparationSpec::identity(bool zero_self_coupling) {
  SeparationSpec s;
  s.kind = Kind::identity;
  s.zero_self_coupling = zero_self_coupling;
  return s;
}

SeparationSpec SeparationSpec::spow(double r) {
  if (!(r >= 2.0)) throw DomainError("spow separation: r must be >= 2");
  SeparationSpec s;
  s.kind = Kind::spow;
  s.param = r;
  return s;
}

SeparationSpec SeparationSpec::exp(double beta) {
  require_beta(beta);
  SeparationSpec s;
  s.kind = Kind::exp;
  s.beta = beta;
  return s;
}

SeparationSpec SeparationSpec::softmax(double beta) {
  require_beta(beta);
  SeparationSpec s;
  s.kind = Kind::softmax;
  s.beta = beta;
  return s;
}

SeparationSpec SeparationSpec::entmax(double alpha, double beta) {
  require_beta(beta);
  if (!(alpha >= 1.0)) throw DomainError("entmax separation: alpha must be >= 1");
  if (alpha == 1.0) return softmax(beta);
  SeparationSpec s;
  s.kind = Kind::entmax;
  s.beta = beta;
  s.param = alpha;
  return s;
}

SeparationSpec SeparationSpec::normmax(double gamma, double beta) {
  require_beta(beta);
  if (!(gamma > 1.0)) throw DomainError("normmax separation: gamma must be > 1");
  SeparationSpec s;
  s.kind = Kind::normmax;
  s.beta = beta;
  s.param = gamma;
  return s;
}

SeparationSpec SeparationSpec::ksubsets(std::size_t k, double beta) {
  require_beta(beta);
  if (k < 1) throw DomainError("k-subsets separation: k must be >= 1");
  SeparationSpec s;
  s.kind = Kind::ksubsets;
  s.beta = beta;
  s.k = k;
  return s;
}

SeparationSpec SeparationSpec::seq_ksubsets(std::size_t k, double t, double beta) {
  require_beta(beta);
  if (k < 1) throw DomainError("sequential k-subsets separation: k must be >= 1");
  if (!std::isfinite(t)) throw DomainError("sequential k-subsets separation: t must be finite");
  SeparationSpec s;
  s.kind = Kind::seq_ksubsets;
  s.beta = beta;
  s.k = k;
  s.param = t;
  return s;
}

bool SeparationSpec::probabilistic() const noexcept {
  return kind == Kind::softmax || kind == Kind::entmax || kind == Kind::normmax;
}

NegentropySpec SeparationSpec::negentropy() const {
  switch (kind) {
    case Kind::softmax:
      return NegentropySpec::shannon(beta);
    case Kind::entmax:
      return NegentropySpec::tsallis(param, beta);
    case Kind::normmax:
      return NegentropySpec::norm(param, beta);
    default:
      throw DomainError("separation " + describe() + " has no simplex negentropy");
  }
}

std::optional<double> SeparationSpec::margin() const {
  switch (kind) {
    case Kind::entmax:
    case Kind::normmax:
      return margin_of(negentropy());
    case Kind::ksubsets:
    case Kind::seq_ksubsets:
      return 1.0;
    default:
      return std::nullopt;
  }
}

std::string SeparationSpec::describe() const {
  switch (kind) {
    case Kind::identity:
      return zero_self_coupling ? "identity-hebb" : "identity";
    case Kind::spow:
      return "spow:" + fmt(param);
    case Kind::exp:
      return "exp";
    case Kind::softmax:
      return "softmax";
    case Kind::entmax:
      return "entmax:" + fmt(param);
    case Kind::normmax:
      return "normmax:" + fmt(param);
    case Kind::ksubsets:
      return "ksubsets:" + std::to_string(k);
    case Kind::seq_ksubsets:
      return "seq:" + std::to_string(k) + ":" + fmt(param);
  }
  return "?";
}

PostSpec PostSpec::l2norm(double r) {
  if (!(r > 0.0)) throw DomainError("l2norm post: radius must be positive");
  PostSpec p;
  p.kind = Kind::l2norm;
  p.r = r;
  return p;
}

PostSpec PostSpec::layernorm(double eta, double delta, double eps, bool unbiased) {
  if (!(eta > 0.0)) throw DomainError("layernorm post: eta must be positive");
  if (!(eps >= 0.0)) throw DomainError("layernorm post: eps must be >= 0");
  PostSpec p;
  p.kind = Kind::layernorm;
  p.eta = eta;
  p.delta = Vector::Constant(1, delta);
  p.eps = eps;
  p.unbiased = unbiased;
  return p;
}

PostSpec PostSpec::tanh(double beta) {
  if (!(beta > 0.0)) throw DomainError("tanh post: beta must be positive");
  PostSpec p;
  p.kind = Kind::tanh;
  p.beta = beta;
  return p;
}

PostSpec PostSpec::sign() {
  PostSpec p;
  p.kind = Kind::sign;
  return p;
}

std::string PostSpec::describe() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::l2norm:
      return "l2norm:" + fmt(r);
    case Kind::layernorm:
      return "layernorm:" + fmt(eta);
    case Kind::tanh:
      return "tanh:" + fmt(beta);
    case Kind::sign:
      return "sign";
  }
  return "?";
}

Vector separation_apply(const SeparationSpec& spec, const Vector& theta) {
  if (theta.size() == 0 || !theta.allFinite()) throw DomainError("separation: scores must be finite and non-empty");
  using K = SeparationSpec::Kind;
  switch (spec.kind) {
    case K::identity:
      return theta;
    case K::spow: {
      const double e = spec.param - 1.0;
      return theta.unaryExpr([e](double v) {
        const double m = std::pow(std::abs(v), e);
        return v < 0.0 ? -m : m;
      });
    }
    case K::exp:
      return (spec.beta * theta).array().exp().matrix();
    case K::softmax:
      return softmax(theta, spec.beta);
    case K::entmax:
      if (spec.param == 2.0) return sparsemax(spec.beta * theta);
      return entmax(spec.beta * theta, spec.param);
    case K::normmax:
      return normmax(spec.beta * theta, spec.param);
    case K::ksubsets:
      return project_capped_simplex(spec.beta * theta, spec.k);
    case K::seq_ksubsets: {
      const SeqKSubsetsSpec seq{static_cast<std::size_t>(theta.size()), spec.k, spec.param};
      const auto res = sparsemap(seq_ksubsets_oracle(seq), seq.scores(spec.beta * theta));
      return seq.on_marginals(res.unary);
    }
  }
  throw DomainError("separation: unknown kind");
}

Vector post_apply(const PostSpec& spec, const Vector& z) {
  using K = PostSpec::Kind;
  switch (spec.kind) {
    case K::identity:
      return z;
    case K::l2norm: {
      const double n = z.norm();
      if (n == 0.0) throw DomainError("l2norm post: zero vector");
      return spec.r * z / n;
    }
    case K::layernorm: {
      const auto d = z.size();
      if (spec.unbiased && d < 2) throw DomainError("layernorm post: unbiased variance needs D >= 2");
      const double mu = z.mean();
      const Vector c = z.array() - mu;
      const double denom = static_cast<double>(spec.unbiased ? d - 1 : d);
      const double var = c.squaredNorm() / denom;
      if (var + spec.eps == 0.0) throw DomainError("layernorm post: constant input with eps = 0");
      Vector out = spec.eta * c / std::sqrt(var + spec.eps);
      if (spec.delta.size() == 1)
        out.array() += spec.delta[0];
      else if (spec.delta.size() == d)
        out += spec.delta;
      else if (spec.delta.size() != 0)
        throw DomainError("layernorm post: shift length mismatch");
      return out;
    }
    case K::tanh:
      return (spec.beta * z).array().tanh().matrix();
    case K::sign:
      return z.unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
  }
  throw DomainError("post: unknown kind");
}

Vector hopfield_update(const Vector& q, const PatternMemory& mem, const SeparationSpec& sep,
                       const PostSpec& post) {
  const Vector p = separation_apply(sep, mem.scores(q));
  Vector z = mem.combine(p);
  if (sep.zero_self_coupling) {
    if (sep.kind != SeparationSpec::Kind::identity)
      throw DomainError("zero self-coupling applies only to the identity separation");
    z -= (mem.patterns().array().square().colwise().sum().transpose() * q.array()).matrix();
  }
  return post_apply(post, z);
}

double hfy_energy(const Vector& q, const PatternMemory& mem, const SeparationSpec& sep) {
  const NegentropySpec omega = sep.negentropy();
  const auto n = static_cast<Eigen::Index>(mem.size());
  const Vector u = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const Vector theta = mem.scores(q);
  // -1/beta L(beta theta; u) = -Omega(u)/beta - Omega*(beta theta)/beta + theta'u
  const double neg_loss = -omega.value(u) - omega.conjugate(theta) + theta.dot(u);
  const double m2 = mem.max_norm() * mem.max_norm();
  return neg_loss + 0.5 * (q - mem.mean()).squaredNorm() + 0.5 * (m2 - mem.mean().squaredNorm());
}

double hfy_energy_upper_bound(const PatternMemory& mem, const SeparationSpec& sep) {
  const NegentropySpec omega = sep.negentropy();
  const auto n = static_cast<Eigen::Index>(mem.size());
  const Vector u = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double m2 = mem.max_norm() * mem.max_norm();
  return std::min(2.0 * m2, -omega.value(u) + 0.5 * m2);
}

IterationTrace iterate(const Vector& q0, const PatternMemory& mem, const SeparationSpec& sep,
                       const PostSpec& post, const IterateOptions& opts) {
  if (opts.max_iter < 1) throw DomainError("iterate: max_iter must be >= 1");
  const bool with_energy = sep.probabilistic() && post.kind == PostSpec::Kind::identity;
  IterationTrace trace;
  trace.queries.push_back(q0);
  if (with_energy) trace.energies.push_back(hfy_energy(q0, mem, sep));
  Vector q = q0;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    Vector next = hopfield_update(q, mem, sep, post);
    const double change = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    trace.steps = it + 1;
    if (opts.keep_queries) trace.queries.push_back(q);
    if (with_energy) trace.energies.push_back(hfy_energy(q, mem, sep));
    if (change <= opts.tol) {
      trace.converged = true;
      break;
    }
  }
  if (!opts.keep_queries) trace.queries.push_back(q);
  return trace;
}

std::size_t support_size(const SeparationSpec& sep, const Vector& p) {
  const double thr = sep.kind == SeparationSpec::Kind::softmax ? 0.01 : 0.0;
  return static_cast<std::size_t>((p.array() > thr).count());
}

RetrievalReport exact_retrieval_check(const PatternMemory& mem, const SeparationSpec& sep,
                                      double eps, std::size_t trials, std::uint64_t seed) {
  const auto m = sep.margin();
  if (!m) throw DomainError("exact retrieval check needs a separation with a margin");
  if (!(eps >= 0.0)) throw DomainError("exact retrieval check: eps must be >= 0");
  RetrievalReport rep;
  const Vector delta = mem.separations();
  const double bound = *m / sep.beta + 2.0 * mem.max_norm() * eps;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const bool ok = delta[static_cast<Eigen::Index>(i)] >= bound;
    rep.eligible.push_back(ok);
    if (ok) pool.push_back(i);
  }
  if (pool.empty()) return rep;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(mem.dim());
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t i = pool[pick(rng)];
    Vector dir(d);
    for (Eigen::Index j = 0; j < d; ++j) dir[j] = gauss(rng);
    const Vector x = mem.row(i);
    const Vector q0 = x + eps * dir / dir.norm();
    const Vector q1 = hopfield_update(q0, mem, sep);
    ++rep.trials;
    if ((q1 - x).lpNorm<Eigen::Infinity>() <= 1e-9) ++rep.successes;
  }
  return rep;
}

BasinGrid basin_grid(const PatternMemory& mem, const SeparationSpec& sep, const PostSpec& post,
                     const GridSpec& grid) {
  const std::size_t d = mem.dim();
  if (d != 2 && d != 3) throw DomainError("basin grid: patterns must be 2- or 3-dimensional");
  if (!std::isfinite(grid.lo) || !std::isfinite(grid.hi) || !(grid.hi > grid.lo))
    throw DomainError("basin grid: bounds must be finite with lo < hi");
  if (grid.resolution < 2) throw DomainError("basin grid: resolution must be >= 2");

  BasinGrid out;
  out.resolution = grid.resolution;
  for (std::size_t i = 0; i < grid.resolution; ++i)
    out.axis.push_back(grid.lo + (grid.hi - grid.lo) * static_cast<double>(i) /
                                     static_cast<double>(grid.resolution - 1));
  IterateOptions io = grid.iterate;
  io.keep_queries = false;
  for (std::size_t iy = 0; iy < grid.resolution; ++iy) {
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      Vector q(static_cast<Eigen::Index>(d));
      q[0] = out.axis[ix];
      q[1] = out.axis[iy];
      if (d == 3) q[2] = -(q[0] + q[1]);
      const auto trace = iterate(q, mem, sep, post, io);
      const Vector& fin = trace.final_query();
      int label = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < mem.size(); ++i) {
        const double dist = (fin - mem.row(i)).norm();
        if (dist <= grid.label_tol && dist < best) {
          best = dist;
          label = static_cast<int>(i) + 1;
        }
      }
      out.labels.push_back(label);
      out.steps.push_back(trace.steps);
    }
  }
  return out;
}

void write_basin_csv(std::ostream& out, const BasinGrid& grid) {
  out << "x,y,label,steps\n";
  out.precision(17);
  for (std::size_t iy = 0; iy < grid.resolution; ++iy)
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      const std::size_t c = iy * grid.resolution + ix;
      out << grid.axis[ix] << ',' << grid.axis[iy] << ',' << grid.labels[c] << ',' << grid.steps[c] << '\n';
    }
}

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  const auto d = trace.queries.empty() ? 0 : trace.queries.front().size();
  out << "step,energy";
  for (Eigen::Index j = 0; j < d; ++j) out << ",q" << j;
  out << '\n';
  out.precision(17);
  for (std::size_t s = 0; s < trace.queries.size(); ++s) {
    out << s << ',';
    if (s < trace.energies.size()) out << trace.energies[s];
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << trace.queries[s][j];
    out << '\n';
  }
}

}  // namespace hfy
