#include "doctest.h"

#include "ltlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

using namespace ltlab;

namespace {

// Independent triple-loop product used as an oracle against matmul.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < a.cols; ++t) acc += a.at(i, t) * b.at(t, j);
      out.at(i, j) = acc;
    }
  return out;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("log_sum_exp matches closed forms") {
  const std::vector<double> two_zeros{0.0, 0.0};
  CHECK(log_sum_exp(two_zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> large{1000.0, 1000.0};
  CHECK(log_sum_exp(large) ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

  // Small inputs agree with the naive sum-of-exponentials form.
  const std::vector<double> mixed{-1.0, 2.0, 0.5};
  const double naive =
      std::log(std::exp(-1.0) + std::exp(2.0) + std::exp(0.5));
  CHECK(log_sum_exp(mixed) == doctest::Approx(naive).epsilon(1e-14));
}

TEST_CASE("log_sum_exp does not overflow and is shift invariant") {
  const std::vector<double> big{710.0, 0.0};
  const double v = log_sum_exp(big);
  CHECK(std::isfinite(v));
  // exp(-710) vanishes at double precision, so the result is 710 itself.
  CHECK(v == doctest::Approx(710.0).epsilon(1e-15));

  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v0(5);
    for (double& x : v0) x = rng.uniform(-3.0, 3.0);
    const double shift = rng.uniform(-100.0, 100.0);
    std::vector<double> v1 = v0;
    for (double& x : v1) x += shift;
    CHECK(log_sum_exp(v1) - shift ==
          doctest::Approx(log_sum_exp(v0)).epsilon(1e-12));
  }
}

TEST_CASE("log_sum_exp rejects empty input") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(log_sum_exp(empty), std::invalid_argument);
  CHECK_THROWS_WITH(log_sum_exp(empty), "empty reduction");
}

TEST_CASE("matmul identity and scalar products") {
  Matrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Rng rng(11);
  const Matrix a = random_matrix(3, 3, rng);
  const Matrix left = matmul(eye, a);
  const Matrix right = matmul(a, eye);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(left.data[i] == a.data[i]);
    CHECK(right.data[i] == a.data[i]);
  }

  Matrix two(1, 1), three(1, 1);
  two.at(0, 0) = 2.0;
  three.at(0, 0) = 3.0;
  CHECK(matmul(two, three).at(0, 0) == 6.0);
}

TEST_CASE("matmul agrees with a naive triple loop") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 3, rng);
    const Matrix b = random_matrix(3, 2, rng);
    const Matrix got = matmul(a, b);
    const Matrix want = naive_matmul(a, b);
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (std::size_t i = 0; i < want.data.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul is associative within float tolerance") {
  Rng rng(17);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix b = random_matrix(3, 5, rng);
  const Matrix c = random_matrix(5, 2, rng);
  const Matrix left = matmul(matmul(a, b), c);
  const Matrix right = matmul(a, matmul(b, c));
  REQUIRE(left.same_shape(right));
  for (std::size_t i = 0; i < left.data.size(); ++i)
    CHECK(left.data[i] == doctest::Approx(right.data[i]).epsilon(1e-9));
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("transpose swaps indices") {
  Rng rng(19);
  const Matrix a = random_matrix(3, 5, rng);
  const Matrix t = transpose(a);
  REQUIRE(t.rows == 5);
  REQUIRE(t.cols == 3);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) CHECK(t.at(j, i) == a.at(i, j));
}

TEST_CASE("rng streams are reproducible per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_differs = false;
  for (int i = 0; i < 256; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) all_equal = false;
    if (va != c.next_u64()) any_differs = true;
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("rng split derives independent sub-streams") {
  Rng base(5);
  Rng s1 = base.split(1);
  Rng s2 = base.split(2);
  // Same key gives the same stream; different keys give different streams.
  Rng s1b = base.split(1);
  bool same = true;
  bool differs = false;
  for (int i = 0; i < 128; ++i) {
    const std::uint64_t v = s1.next_u64();
    if (v != s1b.next_u64()) same = false;
    if (v != s2.next_u64()) differs = true;
  }
  CHECK(same);
  CHECK(differs);

  // Splitting does not advance or disturb the parent stream.
  Rng fresh(5);
  (void)fresh.split(9);
  Rng untouched(5);
  CHECK(fresh.next_u64() == untouched.next_u64());
}

TEST_CASE("uniform stays in range and covers the unit interval") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);

  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-4.0, 9.0);
    CHECK(u >= -4.0);
    CHECK(u < 9.0);
  }
}

TEST_CASE("uniform_int is bounded and hits every residue") {
  Rng rng(29);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 4000; ++i) {
    const std::uint64_t v = rng.uniform_int(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}

TEST_CASE("normal produces a roughly standard distribution") {
  Rng rng(31);
  const int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("shuffle permutes without losing elements") {
  Rng rng(37);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> shuffled = v;
  rng.shuffle(shuffled);
  CHECK(shuffled != v);  // 1/100! chance of a false alarm
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);

  // Same seed, same permutation.
  Rng r1(41), r2(41);
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
}
