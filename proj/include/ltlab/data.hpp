#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltlab/losses.hpp"
#include "ltlab/numerics.hpp"

namespace ltlab {

/// Exponential long-tail profile: class j receives
/// n_j = round(n_max * IF^(-j/(k-1))), so counts decay from n_max down to
/// round(n_max / IF) with max/min ratio equal to the imbalance factor.
struct LongTailProfile {
  std::size_t k = 2;
  std::int64_t n_max = 100;
  double imbalance_factor = 1.0;
};

ClassCounts longtail_counts(const LongTailProfile& profile);

/// k Gaussian components with diagonal covariance. Means are k x d,
/// variances are k x d (per-class diagonal); all variances positive.
struct GaussianMixtureSpec {
  std::size_t dim = 0;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;

  static GaussianMixtureSpec shared_isotropic(std::vector<std::vector<double>> means,
                                              double variance);
  std::size_t k() const { return means.size(); }
  void validate() const;
};

/// Benchmark mixture: k Gaussians with equal isotropic variance whose
/// means sit evenly spaced on a circle of the given radius in the first
/// two dimensions (zeros elsewhere). Requires dim >= 2.
GaussianMixtureSpec circle_mixture(std::size_t k, std::size_t dim,
                                   double radius, double variance);

/// Feature matrix (one row per sample) with integer labels in [0, k) and
/// counts kept consistent with the labels. Every class must be present.
struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;
  ClassCounts counts;

  /// Builds a dataset, recomputing counts from the labels and validating
  /// shape, label range, and class coverage.
  static Dataset from_parts(Matrix features, std::vector<std::size_t> labels,
                            std::size_t k);

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }
  std::size_t k() const { return counts.k(); }
};

/// Draws exactly counts[j] samples from component j. Rows are grouped by
/// class, then shuffled together with their labels when `shuffle` is set.
/// Deterministic for a given rng state.
Dataset synthesize_gaussian(const GaussianMixtureSpec& spec,
                            const ClassCounts& counts, Rng& rng,
                            bool shuffle = true);

/// Exact Bayes posterior p(y=j|x) under the given prior, computed from the
/// Gaussian densities in log space. Zero prior entries are honored exactly.
PosteriorVector bayes_posterior(const GaussianMixtureSpec& spec,
                                std::span<const double> prior,
                                std::span<const double> x);

/// Comma-separated, UTF-8, decimal-point CSV. The label column may hold
/// integers (used directly as class indices) or symbols (mapped to indices
/// in first-appearance order). When `label_vocabulary` is given, symbols
/// outside it are rejected.
struct CsvSchema {
  std::vector<std::size_t> feature_cols;
  std::size_t label_col = 0;
  bool has_header = false;
  std::optional<std::vector<std::string>> label_vocabulary;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writer for the identical format: header "f0,...,f{d-1},label", features
/// printed with enough digits to round-trip exactly.
void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               bool header = true);

}  // namespace ltlab
