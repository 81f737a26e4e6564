#include "doctest.h"

#include "ltlab/margins.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace ltlab;

namespace {

ClassCounts cc(std::vector<std::int64_t> counts) {
  return ClassCounts::from_counts(std::move(counts));
}

// Brute-force minimum of the bound objective over the margin simplex
// {gamma > 0, sum gamma = beta}, discretized at `res`.
double grid_min_objective(const ClassCounts& counts, double beta, double res) {
  double best = std::numeric_limits<double>::infinity();
  if (counts.k() == 2) {
    for (double s = res; s < 1.0; s += res) {
      const std::vector<double> g{beta * s, beta * (1.0 - s)};
      best = std::min(best, bound_objective(g, counts, 1.0));
    }
  } else if (counts.k() == 3) {
    for (double s = res; s < 1.0; s += res)
      for (double t = res; s + t < 1.0; t += res) {
        const std::vector<double> g{beta * s, beta * t, beta * (1.0 - s - t)};
        best = std::min(best, bound_objective(g, counts, 1.0));
      }
  }
  return best;
}

}  // namespace

TEST_CASE("empirical margin is threshold minus worst loss") {
  const std::vector<double> losses{0.5, 0.2};
  CHECK(empirical_margin(losses, 1.0) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> single{2.0};
  CHECK(empirical_margin(single, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));

  const std::vector<double> empty;
  CHECK_THROWS_WITH(empirical_margin(empty, 1.0), "no samples for class");
}

TEST_CASE("threshold error counts strict exceedances") {
  const std::vector<double> losses{0.1, 0.2, 0.9};
  CHECK(threshold_error(losses, 0.5) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(threshold_error(losses, -1.0) == 1.0);
  CHECK(threshold_error(losses, 0.9) ==
        doctest::Approx(0.0).epsilon(1e-15));  // strict comparison
  const std::vector<double> empty;
  CHECK_THROWS_AS(threshold_error(empty, 0.5), std::invalid_argument);
}

TEST_CASE("optimal margins follow the fourth-root allocation") {
  auto g = optimal_margins(cc({1, 16}), 3.0);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-14));

  g = optimal_margins(cc({8, 8, 8}), 3.0);
  for (double v : g) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  // Weights scale as n^(-1/4): count 16 contributes 1/2, count 256 a 1/4.
  g = optimal_margins(cc({1, 1, 16}), 1.0);
  CHECK(g[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(0.2).epsilon(1e-14));

  g = optimal_margins(cc({1, 1, 256}), 1.0);
  CHECK(g[0] == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(1.0 / 9.0).epsilon(1e-14));

  CHECK_THROWS_AS(optimal_margins(cc({1, 2}), 0.0), std::invalid_argument);
}

TEST_CASE("optimal margins sum to beta and scale linearly in it") {
  Rng rng(211);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::int64_t> counts(3);
    for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.uniform_int(5000));
    const ClassCounts c = cc(counts);
    const double beta = rng.uniform(0.1, 10.0);
    const auto g = optimal_margins(c, beta);
    double sum = 0.0;
    for (double v : g) sum += v;
    CHECK(std::abs(sum - beta) < 1e-12 * std::max(1.0, beta));

    // Doubling beta doubles every margin exactly (power-of-two scaling).
    const auto g2 = optimal_margins(c, 2.0 * beta);
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(g2[j] == 2.0 * g[j]);
  }
}

TEST_CASE("optimal margins shrink for better-represented classes") {
  const auto g = optimal_margins(cc({3, 30, 3000}), 1.0);
  CHECK(g[0] > g[1]);
  CHECK(g[1] > g[2]);
}

TEST_CASE("bound objective closed form and scaling") {
  const ClassCounts counts = cc({1, 16});
  const std::vector<double> gammas{2.0, 1.0};
  CHECK(bound_objective(gammas, counts, 1.0) ==
        doctest::Approx(3.0).epsilon(1e-14));
  // sqrt(4C) = 2 sqrt(C), so quadrupling C doubles the objective.
  CHECK(bound_objective(gammas, counts, 4.0) ==
        doctest::Approx(6.0).epsilon(1e-14));

  const std::vector<double> swapped{1.0, 2.0};
  const ClassCounts swapped_counts = cc({16, 1});
  CHECK(bound_objective(swapped, swapped_counts, 1.0) ==
        doctest::Approx(bound_objective(gammas, counts, 1.0)).epsilon(1e-12));

  const std::vector<double> short_g{1.0};
  CHECK_THROWS_AS(bound_objective(short_g, counts, 1.0), std::invalid_argument);
  const std::vector<double> zero_g{0.0, 1.0};
  CHECK_THROWS_WITH(bound_objective(zero_g, counts, 1.0),
                    "non-positive gamma for class 0");
  CHECK_THROWS_AS(bound_objective(gammas, counts, 0.0), std::invalid_argument);
}

TEST_CASE("optimal margins beat a simplex grid search") {
  Rng rng(223);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<std::int64_t> counts(trial % 2 == 0 ? 2 : 3);
    for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.uniform_int(2000));
    const ClassCounts c = cc(counts);
    const double beta = rng.uniform(0.5, 4.0);
    const auto g = optimal_margins(c, beta);
    const double at_opt = bound_objective(g, c, 1.0);
    const double res = c.k() == 2 ? 1e-3 : 5e-3;
    CHECK(at_opt <= grid_min_objective(c, beta, res) + 1e-12);
  }
}

TEST_CASE("epsilon term decreases with class count") {
  const double eps4 = bound_epsilon_term(1.0, 4.0, 10.0, 0.05);
  const double eps16 = bound_epsilon_term(1.0, 16.0, 10.0, 0.05);
  const double eps64 = bound_epsilon_term(1.0, 64.0, 10.0, 0.05);
  CHECK(eps4 > eps16);
  CHECK(eps16 > eps64);

  // Closed form at n=4, gamma=1, B=10, delta=0.5.
  const double want = std::sqrt(std::log(std::log2(40.0)) / 4.0) +
                      std::sqrt(std::log(2.0) / 8.0);
  CHECK(bound_epsilon_term(1.0, 4.0, 10.0, 0.5) ==
        doctest::Approx(want).epsilon(1e-14));

  // log2(4B/gamma) must exceed 1 for the outer log to stay positive.
  CHECK_THROWS_WITH(bound_epsilon_term(1.0, 4.0, 0.5, 0.05),
                    "B too small for margin");
}

TEST_CASE("margin config defaults and validation") {
  const MarginConfig d = MarginConfig::defaults_for(5);
  CHECK(d.threshold_t == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(d.beta == 1.0);
  CHECK(d.complexity_c == 1.0);
  CHECK(d.confidence_delta == 0.05);
  CHECK(d.bound_b == 10.0);
  CHECK_NOTHROW(d.validate());

  MarginConfig bad = d;
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.threshold_t = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.confidence_delta = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.bound_b = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.complexity_c = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("bound estimate closed form on two identical classes") {
  // Four samples per class, worst loss 0.5 against threshold 1.5, so the
  // inferred margin is exactly 1 and no sample exceeds t - gamma = 0.5.
  MarginConfig config;
  config.threshold_t = 1.5;
  config.confidence_delta = 0.5;
  const std::vector<std::vector<double>> losses{
      {0.5, 0.3, 0.1, 0.5}, {0.5, 0.3, 0.1, 0.5}};
  const auto report = bound_estimate(losses, cc({4, 4}), config);

  REQUIRE(report.gammas.size() == 2);
  CHECK(report.gammas[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(report.gammas[1] == doctest::Approx(1.0).epsilon(1e-14));

  const double want = 2.0 + std::sqrt(std::log(std::log2(40.0)) / 4.0) +
                      std::sqrt(std::log(2.0) / 8.0);
  REQUIRE(report.per_class_terms.size() == 2);
  CHECK(report.per_class_terms[0] == doctest::Approx(want).epsilon(1e-13));
  CHECK(report.per_class_terms[1] == doctest::Approx(want).epsilon(1e-13));
  CHECK(report.bound_value == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("bound estimate averages the per-class terms") {
  MarginConfig config;
  config.threshold_t = 2.0;
  const std::vector<std::vector<double>> losses{
      {1.9, 0.5}, {0.2, 0.1, 0.3}, {1.0}};
  const auto report = bound_estimate(losses, cc({2, 3, 1}), config);
  REQUIRE(report.per_class_terms.size() == 3);
  const double mean = (report.per_class_terms[0] + report.per_class_terms[1] +
                       report.per_class_terms[2]) /
                      3.0;
  CHECK(report.bound_value == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("bound estimate counts the error against t minus gamma") {
  // With an explicit margin of 1 the error threshold moves to t - 1 = 1,
  // so exactly one of the two samples (1.9) exceeds it.
  MarginConfig config;
  config.threshold_t = 2.0;
  std::vector<double> gammas{1.0, 1.0};
  const std::vector<std::vector<double>> losses{{1.9, 0.5}, {0.5, 0.5}};
  const ClassCounts counts = cc({2, 2});
  const auto report = bound_estimate(losses, counts, config, gammas);

  const double complexity = (4.0 / 1.0) * std::sqrt(1.0 / 2.0);
  const double eps = bound_epsilon_term(1.0, 2.0, config.bound_b,
                                        config.confidence_delta);
  CHECK(report.per_class_terms[0] ==
        doctest::Approx(0.5 + complexity + eps).epsilon(1e-13));
  CHECK(report.per_class_terms[1] ==
        doctest::Approx(0.0 + complexity + eps).epsilon(1e-13));
}

TEST_CASE("bound estimate rejects bad shapes and non-positive margins") {
  MarginConfig config;
  config.threshold_t = 1.0;
  const std::vector<std::vector<double>> losses{{0.5}, {0.5}};
  CHECK_THROWS_AS(bound_estimate(losses, cc({1, 1, 1}), config),
                  std::invalid_argument);

  std::vector<double> bad_gammas{1.0};
  CHECK_THROWS_AS(
      bound_estimate(losses, cc({1, 1}), config, bad_gammas),
      std::invalid_argument);

  // Worst loss 2.0 against threshold 1.0 gives a negative margin.
  const std::vector<std::vector<double>> hopeless{{2.0}, {0.5}};
  CHECK_THROWS_WITH(bound_estimate(hopeless, cc({1, 1}), config),
                    "non-positive margin for class 0");
}
