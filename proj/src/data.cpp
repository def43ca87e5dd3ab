#include "hfy/data.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "hfy/errors.hpp"

namespace hfy {
namespace {

static_assert(std::endian::native == std::endian::little, "flat binary I/O assumes a little-endian host");

constexpr std::uint32_t kIdxUbyte3d = 0x00000803;

// Reads exactly n bytes or throws with the offset where data ran out.
void read_exact(std::istream& in, char* dst, std::size_t n, std::size_t& offset, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != n) throw FormatError(std::string("truncated ") + what, offset + got);
  offset += n;
}

std::uint32_t read_be32(std::istream& in, std::size_t& offset, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, offset, what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path, 0);
  return in;
}

}  // namespace

PatternMemory read_idx_images(std::istream& in, std::size_t max_images) {
  std::size_t offset = 0;
  const std::uint32_t magic = read_be32(in, offset, "IDX header");
  if (magic != kIdxUbyte3d) throw FormatError("bad IDX magic (expected 0x00000803 unsigned-byte 3-D)", 0);
  const std::uint32_t count = read_be32(in, offset, "IDX header");
  const std::uint32_t rows = read_be32(in, offset, "IDX header");
  const std::uint32_t cols = read_be32(in, offset, "IDX header");
  if (count == 0) throw FormatError("IDX file holds no images", 4);
  if (rows == 0 || cols == 0) throw FormatError("IDX image dimension is zero", rows == 0 ? 8 : 12);

  const std::uint64_t dim = std::uint64_t{rows} * cols;
  const std::size_t keep = max_images == 0 ? count : std::min<std::size_t>(count, max_images);
  // Sizes come from an untrusted header: read in bounded chunks so a bogus
  // count fails as a truncation instead of a huge allocation.
  constexpr std::size_t kChunk = std::size_t{1} << 20;
  std::vector<unsigned char> pixels;
  std::vector<char> chunk;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::uint64_t done = 0; done < dim;) {
      const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, dim - done));
      chunk.resize(n);
      read_exact(in, chunk.data(), n, offset, "IDX pixel payload");
      if (i < keep) pixels.insert(pixels.end(), chunk.begin(), chunk.end());
      done += n;
    }
  }
  Matrix x(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < keep; ++i)
    for (std::uint64_t j = 0; j < dim; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(pixels[i * dim + j]) / 127.5 - 1.0;
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("IDX payload longer than the header count", offset);
  return PatternMemory(std::move(x));
}

PatternMemory load_idx_images(const std::string& path, std::size_t max_images) {
  auto in = open_binary(path);
  return read_idx_images(in, max_images);
}

PatternMemory read_flat_binary(std::istream& in) {
  std::size_t offset = 0;
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  read_exact(in, reinterpret_cast<char*>(&n), 8, offset, "flat binary header");
  read_exact(in, reinterpret_cast<char*>(&d), 8, offset, "flat binary header");
  if (n == 0 || d == 0) throw FormatError("flat binary matrix has a zero dimension", n == 0 ? 0 : 8);
  if (n > std::numeric_limits<std::uint32_t>::max() || d > std::numeric_limits<std::uint32_t>::max())
    throw FormatError("flat binary dimensions implausibly large", 0);
  // Grow with the data actually present rather than trusting the header.
  constexpr std::uint64_t kChunk = std::uint64_t{1} << 17;  // doubles
  const std::uint64_t total = n * d;
  std::vector<double> values;
  for (std::uint64_t done = 0; done < total;) {
    const auto len = static_cast<std::size_t>(std::min(kChunk, total - done));
    const std::size_t at = values.size();
    values.resize(at + len);
    read_exact(in, reinterpret_cast<char*>(values.data() + at), len * sizeof(double), offset, "flat binary payload");
    done += len;
  }
  Matrix x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  if (!x.allFinite()) throw FormatError("flat binary payload holds non-finite values", 16);
  return PatternMemory(std::move(x));
}

PatternMemory load_flat_binary(const std::string& path) {
  auto in = open_binary(path);
  return read_flat_binary(in);
}

void write_flat_binary(std::ostream& out, const Matrix& x) {
  const std::uint64_t n = static_cast<std::uint64_t>(x.rows());
  const std::uint64_t d = static_cast<std::uint64_t>(x.cols());
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

PatternMemory synth_patterns(const SynthSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw DomainError("synth_patterns: need n, d >= 1");
  if (spec.kind == SynthSpec::Kind::sphere && !(spec.radius > 0.0))
    throw DomainError("synth_patterns: sphere radius must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const auto d = static_cast<Eigen::Index>(spec.d);

  auto draw = [&]() {
    Vector v(d);
    switch (spec.kind) {
      case SynthSpec::Kind::sphere: {
        double nrm = 0.0;
        while (nrm == 0.0) {
          for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
          nrm = v.norm();
        }
        v *= spec.radius / nrm;
        break;
      }
      case SynthSpec::Kind::gaussian:
        for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
        break;
      case SynthSpec::Kind::binary:
        for (Eigen::Index j = 0; j < d; ++j) v[j] = coin(rng) ? 1.0 : -1.0;
        break;
    }
    return v;
  };

  Matrix x(static_cast<Eigen::Index>(spec.n), d);
  const std::size_t budget = spec.max_draws == 0 ? 1000 * spec.n : spec.max_draws;
  std::size_t draws = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    while (true) {
      if (spec.min_separation && draws >= budget)
        throw CapacityError("synth_patterns: rejection budget of " + std::to_string(budget) +
                            " draws exhausted after " + std::to_string(i) + " accepted patterns");
      ++draws;
      const Vector v = draw();
      bool ok = true;
      if (spec.min_separation) {
        const double b = *spec.min_separation;
        const double vv = v.squaredNorm();
        for (std::size_t j = 0; j < i && ok; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          const double cross = x.row(jj).dot(v);
          ok = vv - cross >= b && x.row(jj).squaredNorm() - cross >= b;
        }
      }
      if (ok) {
        x.row(static_cast<Eigen::Index>(i)) = v.transpose();
        break;
      }
    }
  }
  return PatternMemory(std::move(x));
}

PatternMemory orthogonal_patterns(std::size_t n, std::size_t d, double radius, std::uint64_t seed) {
  if (n < 1 || d < n) throw DomainError("orthogonal_patterns: need 1 <= n <= d");
  if (!(radius > 0.0)) throw DomainError("orthogonal_patterns: radius must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  return PatternMemory(radius * q.transpose());
}

Vector corrupt(const Vector& q, const CorruptSpec& spec, std::uint64_t seed) {
  switch (spec.mode) {
    case CorruptSpec::Mode::gaussian: {
      if (!(spec.sigma >= 0.0)) throw DomainError("corrupt: sigma must be >= 0");
      if (spec.sigma == 0.0) return q;
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss(0.0, spec.sigma);
      Vector out = q;
      for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += gauss(rng);
      return out.cwiseMax(-1.0).cwiseMin(1.0);
    }
    case CorruptSpec::Mode::mask: {
      if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) throw DomainError("corrupt: mask fraction must be in [0, 1]");
      Vector out = q;
      const auto m = static_cast<Eigen::Index>(std::llround(spec.fraction * static_cast<double>(q.size())));
      out.tail(m).setZero();
      return out;
    }
  }
  throw DomainError("corrupt: unknown mode");
}

}  // namespace hfy
