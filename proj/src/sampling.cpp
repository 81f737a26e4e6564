#include "ltlab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ltlab {

const char* sampler_kind_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::instance_balanced: return "instance_balanced";
    case SamplerKind::class_balanced: return "class_balanced";
    case SamplerKind::repeat_factor: return "repeat_factor";
  }
  throw std::logic_error("unreachable sampler kind");
}

SamplerKind sampler_kind_from_name(const std::string& name) {
  if (name == "instance_balanced") return SamplerKind::instance_balanced;
  if (name == "class_balanced") return SamplerKind::class_balanced;
  if (name == "repeat_factor") return SamplerKind::repeat_factor;
  throw std::invalid_argument("unknown sampler kind: " + name);
}

std::vector<double> repeat_factors(const ClassCounts& counts, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("repeat factor threshold must lie in (0,1)");
  const double n = static_cast<double>(counts.n());
  std::vector<double> r(counts.k());
  for (std::size_t j = 0; j < counts.k(); ++j) {
    const double f = static_cast<double>(counts.counts[j]) / n;
    r[j] = std::max(1.0, std::sqrt(threshold / f));
  }
  return r;
}

SamplerPlan make_sampler_plan(SamplerKind kind, const Dataset& dataset,
                              double rf_threshold) {
  SamplerPlan plan;
  plan.kind = kind;
  plan.rf_threshold = rf_threshold;
  if (kind == SamplerKind::repeat_factor) {
    auto per_class = repeat_factors(dataset.counts, rf_threshold);
    plan.per_sample_repeat.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      plan.per_sample_repeat[i] = per_class[dataset.labels[i]];
  }
  return plan;
}

std::vector<std::size_t> epoch_indices(const SamplerPlan& plan,
                                       const Dataset& dataset, Rng& rng) {
  const std::size_t n = dataset.size();
  if (n == 0) throw std::invalid_argument("empty dataset");

  switch (plan.kind) {
    case SamplerKind::instance_balanced: {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      rng.shuffle(idx);
      return idx;
    }
    case SamplerKind::class_balanced: {
      // index lists per class, in dataset order
      std::vector<std::vector<std::size_t>> by_class(dataset.k());
      for (std::size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.uniform_int(dataset.k());
        const auto& members = by_class[c];
        idx[i] = members[rng.uniform_int(members.size())];
      }
      return idx;
    }
    case SamplerKind::repeat_factor: {
      if (plan.per_sample_repeat.size() != n)
        throw std::invalid_argument("repeat-factor plan does not match dataset");
      std::vector<std::size_t> idx;
      idx.reserve(n + n / 4);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = plan.per_sample_repeat[i];
        if (!(r >= 1.0))
          throw std::invalid_argument("repeat factors must be >= 1");
        double whole;
        const double frac = std::modf(r, &whole);
        std::size_t copies = static_cast<std::size_t>(whole);
        if (frac > 0.0 && rng.uniform() < frac) ++copies;  // stochastic rounding
        for (std::size_t c = 0; c < copies; ++c) idx.push_back(i);
      }
      rng.shuffle(idx);
      return idx;
    }
  }
  throw std::logic_error("unreachable sampler kind");
}

std::vector<double> expected_class_frequencies(const SamplerPlan& plan,
                                               const ClassCounts& counts) {
  const double n = static_cast<double>(counts.n());
  std::vector<double> freq(counts.k());
  switch (plan.kind) {
    case SamplerKind::instance_balanced:
      for (std::size_t j = 0; j < counts.k(); ++j)
        freq[j] = static_cast<double>(counts.counts[j]) / n;
      return freq;
    case SamplerKind::class_balanced:
      std::fill(freq.begin(), freq.end(), 1.0 / static_cast<double>(counts.k()));
      return freq;
    case SamplerKind::repeat_factor: {
      auto r = repeat_factors(counts, plan.rf_threshold);
      double denom = 0.0;
      for (std::size_t j = 0; j < counts.k(); ++j) {
        freq[j] = r[j] * static_cast<double>(counts.counts[j]);
        denom += freq[j];
      }
      for (double& f : freq) f /= denom;
      return freq;
    }
  }
  throw std::logic_error("unreachable sampler kind");
}

}  // namespace ltlab
