#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "hfy/dynamics.hpp"
#include "hfy/errors.hpp"
#include "oracles.hpp"

using hfy::Matrix;
using hfy::PatternMemory;
using hfy::PostSpec;
using hfy::SeparationSpec;
using hfy::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix random_sphere(std::mt19937_64& rng, int n, int d, double radius) {
  Matrix x(n, d);
  for (int i = 0; i < n; ++i) {
    const Vector v = oracle::random_vec(rng, d);
    x.row(i) = radius * v.transpose() / v.norm();
  }
  return x;
}

// Regularizer value at the uniform distribution, recomputed from the
// negentropy definitions (without the 1/beta factor).
double omega_uniform(const SeparationSpec& s, int n) {
  const Vector u = Vector::Constant(n, 1.0 / n);
  switch (s.kind) {
    case SeparationSpec::Kind::softmax:
      return oracle::shannon(u);
    case SeparationSpec::Kind::entmax:
      return oracle::tsallis(u, s.param);
    case SeparationSpec::Kind::normmax:
      return oracle::normneg(u, s.param);
    default:
      return 0.0;
  }
}

}  // namespace

TEST_CASE("separation and post parameters and descriptions") {
  CHECK(SeparationSpec::entmax(1.0, 2.0).kind == SeparationSpec::Kind::softmax);
  CHECK(SeparationSpec::sparsemax(1.0).describe() == "entmax:2");
  CHECK(*SeparationSpec::entmax(1.5, 1.0).margin() == doctest::Approx(2.0));
  CHECK(*SeparationSpec::normmax(5.0, 1.0).margin() == doctest::Approx(1.0));
  CHECK_FALSE(SeparationSpec::softmax(1.0).margin().has_value());
  CHECK(SeparationSpec::ksubsets(2, 1.0).describe() == "ksubsets:2");
  CHECK(SeparationSpec::identity(true).describe() == "identity-hebb");
  CHECK_THROWS_AS(SeparationSpec::spow(1.5), hfy::DomainError);
  CHECK_THROWS_AS(SeparationSpec::entmax(0.5, 1.0), hfy::DomainError);
  CHECK_THROWS_AS(SeparationSpec::normmax(1.0, 1.0), hfy::DomainError);
  CHECK(SeparationSpec::softmax(1.0).probabilistic());
  CHECK_FALSE(SeparationSpec::ksubsets(2, 1.0).probabilistic());
}

TEST_CASE("post-transformations") {
  const Vector ln = hfy::post_apply(PostSpec::layernorm(1.0, 0.0, 0.0), vec({1, 2, 3}));
  CHECK(ln[0] == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-14));
  CHECK(std::abs(ln[1]) <= 1e-15);
  CHECK(ln[2] == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
  const Vector l2 = hfy::post_apply(PostSpec::l2norm(1.0), vec({3, 4}));
  CHECK(l2[0] == doctest::Approx(0.6));
  CHECK(l2[1] == doctest::Approx(0.8));
  CHECK(hfy::post_apply(PostSpec::sign(), vec({-0.5, 0.0, 2.0})) == vec({-1, 1, 1}));
  CHECK(hfy::post_apply(PostSpec::tanh(2.0), vec({0.25}))[0] == doctest::Approx(std::tanh(0.5)));
  CHECK_THROWS_AS(hfy::post_apply(PostSpec::l2norm(1.0), Vector::Zero(3)), hfy::DomainError);
  CHECK_THROWS_AS(hfy::post_apply(PostSpec::layernorm(1.0, 0.0, 0.0), Vector::Constant(3, 2.0)), hfy::DomainError);

  // unbiased variance: output radius eta * sqrt(D - 1)
  PostSpec ub = PostSpec::layernorm(1.0, 0.0, 0.0, true);
  CHECK(hfy::post_apply(ub, vec({1, 2, 3})).norm() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("layer norm lands in its feasible set and is idempotent") {
  std::mt19937_64 rng(21);
  for (int d : {2, 3, 8, 17}) {
    for (int r = 0; r < 50; ++r) {
      const double eta = 0.5 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
      const PostSpec zero_shift = PostSpec::layernorm(eta, 0.0, 0.0);
      const Vector z = oracle::random_vec(rng, d, 3.0);
      const Vector y = hfy::post_apply(zero_shift, z);
      CHECK(std::abs(y.mean()) <= 1e-12);
      CHECK(std::abs(y.norm() - eta * std::sqrt(static_cast<double>(d))) <= 1e-9);
      CHECK((hfy::post_apply(zero_shift, y) - y).lpNorm<Eigen::Infinity>() <= 1e-12);

      const PostSpec l2 = PostSpec::l2norm(eta);
      const Vector w = hfy::post_apply(l2, z);
      CHECK((hfy::post_apply(l2, w) - w).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("layer norm maximizes the inner product over its feasible set") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int d : {3, 8}) {
    for (int r = 0; r < 20; ++r) {
      const double eta = 0.5 + 2.0 * unit(rng);
      const Vector delta = oracle::random_vec(rng, d);
      PostSpec spec = PostSpec::layernorm(eta, 0.0, 0.0);
      spec.delta = delta;
      const Vector z = oracle::random_vec(rng, d, 2.0);
      const Vector y = hfy::post_apply(spec, z);
      const double radius = eta * std::sqrt(static_cast<double>(d));
      CHECK(std::abs((y - delta).sum()) <= 1e-9);
      CHECK(std::abs((y - delta).norm() - radius) <= 1e-9);
      const double best = z.dot(y);
      for (int s = 0; s < 2000; ++s) {
        Vector v = oracle::random_vec(rng, d);
        v.array() -= v.mean();
        const Vector q = delta + radius * std::pow(unit(rng), 1.0 / (d - 1)) * v / v.norm();
        CHECK(z.dot(q) < best);
      }
    }
  }
}

TEST_CASE("update rule examples") {
  const PatternMemory eye2(Matrix::Identity(2, 2));
  const Vector soft = hfy::hopfield_update(vec({1, 0}), eye2, SeparationSpec::softmax(1.0));
  const double e = std::exp(1.0);
  CHECK(soft[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(soft[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-14));
  CHECK(hfy::hopfield_update(vec({1, 0}), eye2, SeparationSpec::sparsemax(1.0)) == vec({1, 0}));

  Matrix x(3, 4);
  x << 1, 2, 0, 0,   //
      0, 1, 3, 0,    //
      0, 0, 1, 5;
  const PatternMemory mem(x);
  // q with scores Xq = [10, 9, 0]
  const Vector q = x.completeOrthogonalDecomposition().solve(vec({10, 9, 0}));
  REQUIRE((x * q - vec({10, 9, 0})).norm() <= 1e-10);
  const Vector got = hfy::hopfield_update(q, mem, SeparationSpec::ksubsets(2, 1.0));
  CHECK((got - (x.row(0) + x.row(1)).transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);

  // classic HN: identity separation, sign post
  Matrix b(2, 3);
  b << 1, -1, 1,  //
      -1, -1, 1;
  const PatternMemory bin(b);
  const Vector h = hfy::hopfield_update(vec({1, -1, 1}), bin, SeparationSpec::identity(), PostSpec::sign());
  CHECK(h == post_apply(PostSpec::sign(), b.transpose() * (b * vec({1, -1, 1}))));
  // zero self-coupling removes diag(X'X) q = 2q from the Hebbian field
  const Vector hz = hfy::hopfield_update(vec({1, -1, 1}), bin, SeparationSpec::identity(true));
  CHECK(hz == b.transpose() * (b * vec({1, -1, 1})) - 2.0 * vec({1, -1, 1}));

  // Poly-DAM and Exp-DAM fields
  const Vector theta = vec({0.5, -2.0});
  CHECK(hfy::separation_apply(SeparationSpec::spow(3.0), theta) == vec({0.25, -4.0}));
  CHECK(hfy::separation_apply(SeparationSpec::exp(2.0), theta)[0] == doctest::Approx(e));
  CHECK_THROWS_AS(hfy::hopfield_update(vec({1, 0, 0}), eye2, SeparationSpec::softmax(1.0)), hfy::DomainError);
}

TEST_CASE("stationarity holds exactly when the margin condition holds") {
  // x1 = e1, x2 = (cos phi, sin phi): Delta_1 = 1 - cos phi.
  for (const SeparationSpec& base :
       {SeparationSpec::entmax(1.5, 1.0), SeparationSpec::sparsemax(1.0), SeparationSpec::normmax(2.0, 1.0),
        SeparationSpec::normmax(5.0, 1.0)}) {
    for (double phi : {0.4, 1.0, 1.9}) {
      Matrix x(2, 2);
      x << 1, 0, std::cos(phi), std::sin(phi);
      const PatternMemory mem(x);
      const double delta = 1.0 - std::cos(phi);
      CHECK(mem.separation(0) == doctest::Approx(delta));
      const double m = *base.margin();
      for (double factor : {0.9, 1.02, 1.5}) {
        SeparationSpec s = base;
        s.beta = factor * m / delta;
        const Vector q1 = hfy::hopfield_update(mem.row(0), mem, s);
        const bool fixed = (q1 - mem.row(0)).lpNorm<Eigen::Infinity>() == 0.0;
        CAPTURE(s.describe());
        CAPTURE(factor);
        CHECK(fixed == (factor >= 1.0));
      }
    }
  }
}

TEST_CASE("energy bounds over the convex hull") {
  std::mt19937_64 rng(23);
  for (const SeparationSpec& base : {SeparationSpec::softmax(1.0), SeparationSpec::entmax(1.5, 1.0),
                                     SeparationSpec::sparsemax(1.0), SeparationSpec::normmax(2.0, 1.0)}) {
    for (int r = 0; r < 100; ++r) {
      const int n = std::uniform_int_distribution<int>(1, 12)(rng);
      const int d = std::uniform_int_distribution<int>(1, 10)(rng);
      SeparationSpec s = base;
      s.beta = std::exp(std::uniform_real_distribution<double>(-2.0, 2.5)(rng));
      const PatternMemory mem(oracle::random_vec(rng, n * d).reshaped(n, d).eval());
      const Vector q = mem.combine(oracle::random_simplex(rng, n));
      const double energy = hfy::hfy_energy(q, mem, s);
      const double m2 = mem.max_norm() * mem.max_norm();
      const double upper = std::min(2.0 * m2, -omega_uniform(s, n) / s.beta + 0.5 * m2);
      CHECK(hfy::hfy_energy_upper_bound(mem, s) == doctest::Approx(upper).epsilon(1e-12));
      CHECK(energy >= -1e-9);
      CHECK(energy <= upper + 1e-9);
    }
  }
  // all patterns equal to the query: zero energy
  const Vector x = vec({0.3, -1.2, 2.0});
  const PatternMemory same(x.transpose().replicate(5, 1).eval());
  for (const SeparationSpec& s : {SeparationSpec::softmax(0.7), SeparationSpec::entmax(1.5, 2.0),
                                  SeparationSpec::normmax(3.0, 1.0)})
    CHECK(std::abs(hfy::hfy_energy(x, same, s)) <= 1e-12);
  CHECK_THROWS_AS(hfy::hfy_energy(x, same, SeparationSpec::ksubsets(2, 1.0)), hfy::DomainError);
}

TEST_CASE("iteration descends the energy and stops at fixed points") {
  std::mt19937_64 rng(24);
  for (const SeparationSpec& base : {SeparationSpec::softmax(1.0), SeparationSpec::entmax(1.5, 1.0),
                                     SeparationSpec::sparsemax(1.0), SeparationSpec::normmax(2.0, 1.0)}) {
    for (int r = 0; r < 40; ++r) {
      const int n = std::uniform_int_distribution<int>(2, 10)(rng);
      const int d = std::uniform_int_distribution<int>(2, 8)(rng);
      SeparationSpec s = base;
      s.beta = std::exp(std::uniform_real_distribution<double>(-1.0, 2.0)(rng));
      const PatternMemory mem(oracle::random_vec(rng, n * d).reshaped(n, d).eval());
      const auto trace = hfy::iterate(oracle::random_vec(rng, d, 2.0), mem, s, {}, {200, 1e-10, true});
      REQUIRE(trace.energies.size() == trace.queries.size());
      for (std::size_t i = 1; i < trace.energies.size(); ++i) CHECK(trace.energies[i] <= trace.energies[i - 1] + 1e-9);
      CHECK(trace.steps + 1 == trace.queries.size());
    }
  }
  // a well-separated pattern is recovered in one step
  Matrix x = Matrix::Identity(4, 4) * 2.0;
  const PatternMemory mem(x);
  const auto tr = hfy::iterate(mem.row(2), mem, SeparationSpec::entmax(1.5, 1.0));
  CHECK(tr.converged);
  CHECK(tr.steps == 1);
  CHECK(tr.final_query() == mem.row(2));

  // softmax fixed points lie in the convex hull (here: a segment)
  Matrix seg(2, 2);
  seg << 1, 0, 0, 1;
  const auto ts = hfy::iterate(vec({3, -1}), PatternMemory(seg), SeparationSpec::softmax(0.5));
  CHECK(ts.converged);
  CHECK(ts.final_query().sum() == doctest::Approx(1.0));
  CHECK(ts.final_query().minCoeff() >= 0.0);

  // energies are not recorded for non-probabilistic kinds or non-quadratic posts
  CHECK(hfy::iterate(vec({1, 0}), PatternMemory(seg), SeparationSpec::exp(1.0), PostSpec::tanh(1.0)).energies.empty());
  CHECK(hfy::iterate(vec({1, 0}), PatternMemory(seg), SeparationSpec::softmax(1.0), PostSpec::l2norm(1.0))
            .energies.empty());
}

TEST_CASE("exact retrieval from perturbed queries") {
  std::mt19937_64 rng(25);
  const PatternMemory mem(random_sphere(rng, 16, 32, 3.0));
  const double min_delta = mem.separations().minCoeff();
  const SeparationSpec s = SeparationSpec::sparsemax(2.0 / min_delta);
  const double eps = 0.25 * min_delta / (2.0 * 3.0);
  const auto rep = hfy::exact_retrieval_check(mem, s, eps, 300, 1);
  CHECK(rep.trials == 300);
  CHECK(rep.successes == rep.trials);
  for (bool ok : rep.eligible) CHECK(ok);
  // eps = 0: only the margin condition matters
  CHECK(hfy::exact_retrieval_check(mem, s, 0.0, 50, 2).rate() == 1.0);

  // a duplicated direction leaves both copies ineligible
  Matrix dup = random_sphere(rng, 4, 8, 1.0);
  dup.row(3) = dup.row(0);
  const auto r2 = hfy::exact_retrieval_check(PatternMemory(dup), SeparationSpec::sparsemax(1e3), 0.0, 40, 3);
  CHECK_FALSE(r2.eligible[0]);
  CHECK_FALSE(r2.eligible[3]);
  CHECK(r2.successes == r2.trials);
  CHECK_THROWS_AS(hfy::exact_retrieval_check(mem, SeparationSpec::softmax(1.0), 0.0, 1, 0), hfy::DomainError);
}

TEST_CASE("normalized patterns retrieve the same with and without the post-transformation") {
  std::mt19937_64 rng(26);
  const double radius = 2.0;
  const PatternMemory mem(random_sphere(rng, 8, 16, radius));
  const SeparationSpec s = SeparationSpec::entmax(1.5, 4.0 / mem.separations().minCoeff());
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const Vector q0 = mem.row(i) + 1e-3 * oracle::random_vec(rng, 16);
    const Vector plain = hfy::hopfield_update(q0, mem, s);
    const Vector normed = hfy::hopfield_update(q0, mem, s, PostSpec::l2norm(radius));
    CHECK(plain == mem.row(i));
    CHECK((normed - plain).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("support size") {
  CHECK(hfy::support_size(SeparationSpec::softmax(1.0), vec({0.985, 0.009, 0.006})) == 1);
  CHECK(hfy::support_size(SeparationSpec::sparsemax(1.0), vec({0.985, 0.009, 0.006})) == 3);
  CHECK(hfy::support_size(SeparationSpec::sparsemax(1.0), vec({1, 0, 0})) == 1);
}

TEST_CASE("basin grids") {
  hfy::GridSpec g;
  g.resolution = 11;
  Matrix one(1, 2);
  one << 0.5, 0.5;
  const auto single = hfy::basin_grid(PatternMemory(one), SeparationSpec::softmax(1.0), {}, g);
  CHECK(single.labels.size() == 121);
  for (int l : single.labels) CHECK(l == 1);

  // two opposite patterns: the perpendicular axis is equidistant and stays at
  // the uniform mixture, which is metastable
  Matrix two(2, 2);
  two << 1, 0, -1, 0;
  g.resolution = 3;
  const auto grid = hfy::basin_grid(PatternMemory(two), SeparationSpec::normmax(2.0, 1.0), {}, g);
  REQUIRE(grid.axis == std::vector<double>{-1.0, 0.0, 1.0});
  for (std::size_t iy = 0; iy < 3; ++iy) {
    CHECK(grid.labels[iy * 3 + 0] == 2);
    CHECK(grid.labels[iy * 3 + 1] == 0);
    CHECK(grid.labels[iy * 3 + 2] == 1);
  }

  // stored patterns are their own labels in 3-D (third coordinate -(x + y))
  Matrix tri(2, 3);
  tri << 1, 0, -1, 0, -1, 1;
  const auto g3 = hfy::basin_grid(PatternMemory(tri), SeparationSpec::sparsemax(4.0), {}, g);
  CHECK(g3.labels[1 * 3 + 2] == 1);  // (x, y) = (1, 0)
  CHECK(g3.labels[0 * 3 + 1] == 2);  // (x, y) = (0, -1)

  std::ostringstream csv;
  hfy::write_basin_csv(csv, grid);
  CHECK(csv.str().rfind("x,y,label,steps\n", 0) == 0);
  CHECK_THROWS_AS(hfy::basin_grid(PatternMemory(Matrix::Identity(4, 4)), SeparationSpec::softmax(1.0), {}, g),
                  hfy::DomainError);
}

TEST_CASE("trace csv") {
  Matrix seg(2, 2);
  seg << 1, 0, 0, 1;
  const auto tr = hfy::iterate(vec({1, 0}), PatternMemory(seg), SeparationSpec::softmax(1.0));
  std::ostringstream out;
  hfy::write_trace_csv(out, tr);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,energy,q0,q1");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == tr.queries.size());
}
