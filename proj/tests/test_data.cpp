#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "hfy/data.hpp"
#include "hfy/errors.hpp"

using hfy::Matrix;
using hfy::Vector;

namespace {

void put_be32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string idx_file(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, unsigned char fill = 0) {
  std::string s;
  put_be32(s, 0x00000803);
  put_be32(s, count);
  put_be32(s, rows);
  put_be32(s, cols);
  s.append(std::size_t{count} * rows * cols, static_cast<char>(fill));
  return s;
}

hfy::PatternMemory parse_idx(const std::string& bytes, std::size_t max_images = 0) {
  std::istringstream in(bytes);
  return hfy::read_idx_images(in, max_images);
}

std::size_t idx_error_offset(const std::string& bytes) {
  try {
    parse_idx(bytes);
  } catch (const hfy::FormatError& e) {
    return e.offset();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_CASE("IDX images") {
  const auto zeros = parse_idx(idx_file(4, 2, 2));
  CHECK(zeros.size() == 4);
  CHECK(zeros.dim() == 4);
  CHECK(zeros.patterns() == Matrix::Constant(4, 4, -1.0));
  CHECK(parse_idx(idx_file(1, 1, 3, 255)).patterns() == Matrix::Ones(1, 3));

  // row-major flattening and the linear pixel map
  std::string s = idx_file(1, 2, 2);
  s[16] = 0;
  s[17] = static_cast<char>(51);
  s[18] = static_cast<char>(204);
  s[19] = static_cast<char>(255);
  const auto one = parse_idx(s);
  CHECK(one.row(0)[0] == -1.0);
  CHECK(one.row(0)[1] == doctest::Approx(-0.6));
  CHECK(one.row(0)[2] == doctest::Approx(0.6));
  CHECK(one.row(0)[3] == 1.0);

  CHECK(parse_idx(idx_file(5, 2, 3), 2).size() == 2);
  CHECK_THROWS_AS(hfy::load_idx_images("/nonexistent/file.idx"), hfy::FormatError);
}

TEST_CASE("IDX header fuzz corpus is rejected") {
  const std::string good = idx_file(3, 4, 5, 7);
  REQUIRE_NOTHROW(parse_idx(good));

  // every single-byte change to the magic
  for (std::size_t i = 0; i < 4; ++i)
    for (int delta : {1, 2, 0x80, 0xff}) {
      std::string bad = good;
      bad[i] = static_cast<char>(static_cast<unsigned char>(bad[i]) ^ delta);
      CHECK_THROWS_AS(parse_idx(bad), hfy::FormatError);
      CHECK(idx_error_offset(bad) == 0);
    }
  // counts and dimensions that disagree with the payload
  CHECK(idx_error_offset(idx_file(0, 4, 5)) == 4);
  CHECK(idx_error_offset(idx_file(3, 0, 5)) == 8);
  CHECK(idx_error_offset(idx_file(3, 4, 0)) == 12);
  for (std::size_t field = 1; field < 4; ++field)
    for (std::uint32_t v : {2u, 4u, 6u, 1000u, 0xffffffffu}) {
      std::string bad = good.substr(0, 4 * field);
      put_be32(bad, v);
      bad += good.substr(4 * field + 4);
      const std::uint32_t orig = field == 1 ? 3 : field == 2 ? 4 : 5;
      if (v == orig) continue;
      CAPTURE(field);
      CAPTURE(v);
      CHECK_THROWS_AS(parse_idx(bad), hfy::FormatError);
    }
  // every truncation
  for (std::size_t len = 0; len < good.size(); ++len) {
    CAPTURE(len);
    CHECK_THROWS_AS(parse_idx(good.substr(0, len)), hfy::FormatError);
    if (len >= 4) CHECK(idx_error_offset(good.substr(0, len)) == len);
  }
  // trailing bytes
  CHECK(idx_error_offset(good + "x") == good.size());

  // random byte flips inside the header
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> pos(0, 15);
  std::uniform_int_distribution<int> byte(1, 255);
  std::size_t rejected = 0, total = 0;
  for (int r = 0; r < 500; ++r) {
    std::string bad = good;
    bad[pos(rng)] ^= static_cast<char>(byte(rng));
    ++total;
    try {
      parse_idx(bad);
    } catch (const hfy::FormatError&) {
      ++rejected;
    }
  }
  CHECK(rejected == total);
}

TEST_CASE("flat binary round trip") {
  Matrix x(3, 2);
  x << 1.5, -2, 0, 1e-300, 7, 3.25;
  std::stringstream buf;
  hfy::write_flat_binary(buf, x);
  CHECK(buf.str().size() == 16 + 6 * 8);
  CHECK(buf.str()[0] == 3);  // little-endian count
  CHECK(hfy::read_flat_binary(buf).patterns() == x);

  const std::string bytes = [&] {
    std::stringstream b;
    hfy::write_flat_binary(b, x);
    return b.str();
  }();
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    std::istringstream in(bytes.substr(0, len));
    CHECK_THROWS_AS(hfy::read_flat_binary(in), hfy::FormatError);
  }
  std::string huge = bytes;
  huge[4] = static_cast<char>(0x7f);  // claims ~2^31 rows
  std::istringstream hin(huge);
  CHECK_THROWS_AS(hfy::read_flat_binary(hin), hfy::FormatError);
  std::string nan_bytes = bytes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  nan_bytes.replace(16, 8, reinterpret_cast<const char*>(&nan), 8);
  std::istringstream nin(nan_bytes);
  CHECK_THROWS_AS(hfy::read_flat_binary(nin), hfy::FormatError);
}

TEST_CASE("synthetic patterns") {
  hfy::SynthSpec s;
  s.n = 20;
  s.d = 16;
  s.radius = 2.5;
  s.seed = 3;
  const auto a = hfy::synth_patterns(s);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(a.row(i).norm() - 2.5) <= 1e-12);
  CHECK(hfy::synth_patterns(s).patterns() == a.patterns());
  s.seed = 4;
  CHECK(hfy::synth_patterns(s).patterns() != a.patterns());

  s.min_separation = 4.0;
  const auto sep = hfy::synth_patterns(s);
  CHECK(sep.separations().minCoeff() >= 4.0);

  s.min_separation = 2.5 * 2.5 + 1.0;  // above the largest possible gap on this sphere
  s.max_draws = 200;
  CHECK_THROWS_AS(hfy::synth_patterns(s), hfy::CapacityError);

  hfy::SynthSpec b;
  b.kind = hfy::SynthSpec::Kind::binary;
  b.n = 10;
  b.d = 12;
  const auto bin = hfy::synth_patterns(b);
  CHECK((bin.patterns().array().abs() == 1.0).all());

  hfy::SynthSpec g;
  g.kind = hfy::SynthSpec::Kind::gaussian;
  g.n = 400;
  g.d = 50;
  const auto gm = hfy::synth_patterns(g);
  CHECK(std::abs(gm.patterns().mean()) < 0.02);
  CHECK(std::abs(gm.patterns().squaredNorm() / (400.0 * 50.0) - 1.0) < 0.03);

  const auto orth = hfy::orthogonal_patterns(5, 9, 3.0, 1);
  const Matrix gram = orth.patterns() * orth.patterns().transpose();
  CHECK((gram - 9.0 * Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(hfy::orthogonal_patterns(5, 4, 1.0, 1), hfy::DomainError);
}

TEST_CASE("query corruption") {
  std::mt19937_64 rng(42);
  Vector q(10);
  for (Eigen::Index i = 0; i < 10; ++i) q[i] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);

  CHECK(hfy::corrupt(q, {hfy::CorruptSpec::Mode::gaussian, 0.0, 0.0}, 1) == q);
  for (double sigma : {0.1, 1.0, 10.0}) {
    const Vector c = hfy::corrupt(q, {hfy::CorruptSpec::Mode::gaussian, sigma, 0.0}, 2);
    CHECK(c.maxCoeff() <= 1.0);
    CHECK(c.minCoeff() >= -1.0);
    CHECK(c != q);
    CHECK(hfy::corrupt(q, {hfy::CorruptSpec::Mode::gaussian, sigma, 0.0}, 2) == c);
  }
  CHECK(hfy::corrupt(q, {hfy::CorruptSpec::Mode::mask, 0.0, 1.0}, 0) == Vector::Zero(10));
  CHECK(hfy::corrupt(q, {hfy::CorruptSpec::Mode::mask, 0.0, 0.0}, 0) == q);
  const Vector half = hfy::corrupt(q, {hfy::CorruptSpec::Mode::mask, 0.0, 0.3}, 0);
  CHECK(half.head(7) == q.head(7));
  CHECK(half.tail(3) == Vector::Zero(3));
  CHECK_THROWS_AS(hfy::corrupt(q, {hfy::CorruptSpec::Mode::mask, 0.0, 1.5}, 0), hfy::DomainError);
  CHECK_THROWS_AS(hfy::corrupt(q, {hfy::CorruptSpec::Mode::gaussian, -1.0, 0.0}, 0), hfy::DomainError);
}
