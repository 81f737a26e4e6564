#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ltlab {

/// Dense row-major matrix of 64-bit floats. All public operations keep
/// entries finite; dimension mismatches throw std::invalid_argument.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, size rows*cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0);

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Standard matrix product with a fixed left-to-right summation order per
/// output cell, so results are bit-reproducible.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// log(sum_i exp(v_i)) with max-subtraction; no intermediate overflow.
/// Throws std::invalid_argument("empty reduction") on empty input.
double log_sum_exp(std::span<const double> values);

/// Deterministic PRNG: xoshiro256++ seeded through splitmix64.
///
/// The integer stream depends only on the seed, not on the platform.
/// `split(stream)` derives an independent generator for a named purpose
/// (data generation, shuffling, init, ...) so experiment sub-streams do
/// not interleave. Instances are single-owner; do not share across
/// threads without external coordination.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  double uniform(double lo, double hi);

  /// Unbiased integer in [0, bound) via rejection sampling. bound > 0.
  std::uint64_t uniform_int(std::uint64_t bound);

  /// Standard normal via the Marsaglia polar method (pairs are cached).
  double normal();

  /// Independent sub-stream keyed by (seed, stream).
  Rng split(std::uint64_t stream) const;

  /// Fisher-Yates shuffle driven by this generator.
  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Named sub-streams used across the artifact; keeping the ids in one
/// place guarantees that e.g. data generation never shares a stream with
/// weight initialization.
namespace rng_stream {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kEpochSampling = 2;
inline constexpr std::uint64_t kStage2Sampling = 3;
inline constexpr std::uint64_t kTrainData = 4;
inline constexpr std::uint64_t kTestData = 5;
}  // namespace rng_stream

}  // namespace ltlab
