#pragma once

#include <string>
#include <vector>

#include "ltlab/data.hpp"

namespace ltlab {

enum class SamplerKind { instance_balanced, class_balanced, repeat_factor };

const char* sampler_kind_name(SamplerKind k);
SamplerKind sampler_kind_from_name(const std::string& name);

/// Deterministic epoch plan. For repeat_factor, per_sample_repeat holds
/// one repeat factor >= 1 per training sample; the other kinds leave it
/// empty.
struct SamplerPlan {
  SamplerKind kind = SamplerKind::instance_balanced;
  double rf_threshold = 0.001;
  std::vector<double> per_sample_repeat;
};

/// Per-class repeat factors r_j = max(1, sqrt(t / f_j)) with f_j = n_j/n.
/// Classes at or above the frequency threshold get exactly 1.
std::vector<double> repeat_factors(const ClassCounts& counts, double threshold);

/// Builds a plan consistent with the dataset (expands per-class repeat
/// factors to per-sample ones for repeat_factor).
SamplerPlan make_sampler_plan(SamplerKind kind, const Dataset& dataset,
                              double rf_threshold = 0.001);

/// One epoch of sample indices:
///  - instance_balanced: a shuffle of 0..N-1;
///  - class_balanced: N draws of (uniform class, uniform sample within it);
///  - repeat_factor: index i appears floor(r_i) times plus one more with
///    probability frac(r_i), then shuffled.
std::vector<std::size_t> epoch_indices(const SamplerPlan& plan,
                                       const Dataset& dataset, Rng& rng);

/// Exact expected fraction of draws landing in each class under the plan:
/// n_j/n, 1/k, or r_j n_j / sum_i r_i n_i respectively.
std::vector<double> expected_class_frequencies(const SamplerPlan& plan,
                                               const ClassCounts& counts);

}  // namespace ltlab
