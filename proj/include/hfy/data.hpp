#pragma once

// Pattern ingestion, synthetic pattern generators and query corruption.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "hfy/memory.hpp"

namespace hfy {

/// IDX unsigned-byte 3-D image file (magic 0x00000803). Pixels are mapped
/// from [0, 255] to [-1, 1]; images are flattened row-major. Throws
/// FormatError with the offending byte offset.
PatternMemory load_idx_images(const std::string& path, std::size_t max_images = 0);
PatternMemory read_idx_images(std::istream& in, std::size_t max_images = 0);

/// Raw matrix: u64 N, u64 D, then N*D float64, all little-endian.
PatternMemory load_flat_binary(const std::string& path);
PatternMemory read_flat_binary(std::istream& in);
void write_flat_binary(std::ostream& out, const Matrix& x);

struct SynthSpec {
  enum class Kind { sphere, gaussian, binary };

  Kind kind = Kind::sphere;
  std::size_t n = 1;
  std::size_t d = 1;
  double radius = 1.0;  // sphere: row norm M
  /// Rejection sampling until every Delta_i reaches this bound.
  std::optional<double> min_separation;
  std::size_t max_draws = 0;  // rejection budget; 0 = 1000 * n
  std::uint64_t seed = 0;
};

/// sphere: uniform directions scaled to norm M. gaussian: i.i.d. N(0, 1)
/// entries. binary: i.i.d. uniform +-1 entries. Throws CapacityError when the
/// rejection budget runs out.
PatternMemory synth_patterns(const SynthSpec& spec);

/// N orthogonal rows of norm M in dimension D >= N (random rotation).
PatternMemory orthogonal_patterns(std::size_t n, std::size_t d, double radius, std::uint64_t seed);

struct CorruptSpec {
  enum class Mode { gaussian, mask };

  Mode mode = Mode::gaussian;
  double sigma = 0.0;     // gaussian noise level
  double fraction = 0.0;  // masked fraction: a contiguous suffix is zeroed
};

/// Gaussian mode adds noise and clips to [-1, 1]. Mask mode zeroes the last
/// round(fraction * D) entries, i.e. the bottom rows of a row-major image.
Vector corrupt(const Vector& q, const CorruptSpec& spec, std::uint64_t seed);

}  // namespace hfy
