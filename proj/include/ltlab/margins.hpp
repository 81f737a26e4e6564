#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ltlab/losses.hpp"

namespace ltlab {

/// Parameters of the margin-based generalization bound. The bound is used
/// comparatively, so C, B, delta and t carry documented defaults rather
/// than values fixed by theory (t defaults to ln k, the loss of a uniform
/// prediction).
struct MarginConfig {
  double beta = 1.0;              // margin budget, sum_j gamma_j = beta
  double complexity_c = 1.0;      // complexity constant C
  double threshold_t = 0.0;       // loss threshold t >= 0
  double confidence_delta = 0.05; // bound holds with prob. 1 - delta
  double bound_b = 10.0;          // sup |l(theta) - t| <= B

  static MarginConfig defaults_for(std::size_t k);
  void validate() const;
};

struct MarginReport {
  std::vector<double> gammas;
  double bound_value = 0.0;
  std::vector<double> per_class_terms;
};

/// gamma_j = t - max over the class's per-sample losses. Negative margins
/// are reported as-is. Throws "no samples for class" on an empty list.
double empirical_margin(std::span<const double> per_sample_losses,
                        double threshold_t);

/// Fraction of losses strictly greater than t.
double threshold_error(std::span<const double> per_sample_losses,
                       double threshold_t);

/// Margin allocation minimizing the bound under sum gamma_j = beta:
///   gamma*_j = beta * n_j^{-1/4} / sum_i n_i^{-1/4}.
std::vector<double> optimal_margins(const ClassCounts& counts, double beta);

/// The minimized quantity sum_j (4/gamma_j) sqrt(C/n_j). All gammas must
/// be positive.
double bound_objective(std::span<const double> gammas, const ClassCounts& counts,
                       double complexity_c);

/// Per-class low-order term
///   eps_j(gamma) = sqrt(log(log2(4B/gamma)) / n_j) + sqrt(log(1/delta) / (2 n_j)).
/// Requires log2(4B/gamma) > 1, i.e. gamma < 2B.
double bound_epsilon_term(double gamma, double n_j, double bound_b,
                          double confidence_delta);

/// Full per-class bound terms
///   err_hat_{gamma,j}(t) + (4/gamma_j) sqrt(C/n_j) + eps_j(gamma_j),
/// averaged over classes. Gammas default to the empirical margins of each
/// class; non-positive margins make the bound undefined and throw.
MarginReport bound_estimate(const std::vector<std::vector<double>>& per_class_losses,
                            const ClassCounts& counts, const MarginConfig& config,
                            std::optional<std::vector<double>> gammas = std::nullopt);

}  // namespace ltlab
