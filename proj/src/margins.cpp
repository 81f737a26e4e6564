#include "ltlab/margins.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ltlab {

MarginConfig MarginConfig::defaults_for(std::size_t k) {
  MarginConfig c;
  c.threshold_t = std::log(static_cast<double>(k));
  return c;
}

void MarginConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(complexity_c > 0.0)) throw std::invalid_argument("C must be positive");
  if (!(threshold_t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (!(confidence_delta > 0.0 && confidence_delta < 1.0))
    throw std::invalid_argument("delta must lie in (0,1)");
  if (!(bound_b > 0.0)) throw std::invalid_argument("B must be positive");
}

double empirical_margin(std::span<const double> per_sample_losses,
                        double threshold_t) {
  if (per_sample_losses.empty())
    throw std::invalid_argument("no samples for class");
  double worst = per_sample_losses[0];
  for (double l : per_sample_losses) worst = std::max(worst, l);
  return threshold_t - worst;
}

double threshold_error(std::span<const double> per_sample_losses,
                       double threshold_t) {
  if (per_sample_losses.empty())
    throw std::invalid_argument("no samples for class");
  std::size_t over = 0;
  for (double l : per_sample_losses)
    if (l > threshold_t) ++over;
  return static_cast<double>(over) / static_cast<double>(per_sample_losses.size());
}

std::vector<double> optimal_margins(const ClassCounts& counts, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  std::vector<double> w(counts.k());
  double denom = 0.0;
  for (std::size_t j = 0; j < counts.k(); ++j) {
    w[j] = std::pow(static_cast<double>(counts.counts[j]), -0.25);
    denom += w[j];
  }
  for (double& g : w) g = beta * g / denom;
  return w;
}

double bound_objective(std::span<const double> gammas, const ClassCounts& counts,
                       double complexity_c) {
  if (gammas.size() != counts.k())
    throw std::invalid_argument("gammas/counts dimension mismatch");
  if (!(complexity_c > 0.0)) throw std::invalid_argument("C must be positive");
  double acc = 0.0;
  for (std::size_t j = 0; j < gammas.size(); ++j) {
    if (!(gammas[j] > 0.0))
      throw std::invalid_argument("non-positive gamma for class " + std::to_string(j));
    acc += (4.0 / gammas[j]) *
           std::sqrt(complexity_c / static_cast<double>(counts.counts[j]));
  }
  return acc;
}

double bound_epsilon_term(double gamma, double n_j, double bound_b,
                          double confidence_delta) {
  const double log2_arg = std::log2(4.0 * bound_b / gamma);
  if (!(log2_arg > 1.0)) throw std::invalid_argument("B too small for margin");
  return std::sqrt(std::log(log2_arg) / n_j) +
         std::sqrt(std::log(1.0 / confidence_delta) / (2.0 * n_j));
}

MarginReport bound_estimate(const std::vector<std::vector<double>>& per_class_losses,
                            const ClassCounts& counts, const MarginConfig& config,
                            std::optional<std::vector<double>> gammas) {
  config.validate();
  if (per_class_losses.size() != counts.k())
    throw std::invalid_argument("per-class losses/counts dimension mismatch");

  MarginReport report;
  if (gammas) {
    if (gammas->size() != counts.k())
      throw std::invalid_argument("gammas/counts dimension mismatch");
    report.gammas = std::move(*gammas);
  } else {
    report.gammas.resize(counts.k());
    for (std::size_t j = 0; j < counts.k(); ++j)
      report.gammas[j] = empirical_margin(per_class_losses[j], config.threshold_t);
  }

  report.per_class_terms.resize(counts.k());
  double acc = 0.0;
  for (std::size_t j = 0; j < counts.k(); ++j) {
    const double gamma = report.gammas[j];
    if (!(gamma > 0.0))
      throw std::invalid_argument("non-positive margin for class " + std::to_string(j));
    const double n_j = static_cast<double>(counts.counts[j]);
    // err_hat_{gamma,j}(t) counts losses with l + gamma > t.
    const double margin_err =
        threshold_error(per_class_losses[j], config.threshold_t - gamma);
    const double complexity_term =
        (4.0 / gamma) * std::sqrt(config.complexity_c / n_j);
    const double eps =
        bound_epsilon_term(gamma, n_j, config.bound_b, config.confidence_delta);
    report.per_class_terms[j] = margin_err + complexity_term + eps;
    acc += report.per_class_terms[j];
  }
  report.bound_value = acc / static_cast<double>(counts.k());
  return report;
}

}  // namespace ltlab
