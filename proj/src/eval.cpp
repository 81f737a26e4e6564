#include "ltlab/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace ltlab {

const char* group_name(Group g) {
  switch (g) {
    case Group::frequent: return "frequent";
    case Group::common: return "common";
    case Group::rare: return "rare";
  }
  throw std::logic_error("unreachable group");
}

std::vector<Group> group_classes(const ClassCounts& counts,
                                 const GroupThresholds& thresholds) {
  if (thresholds.rare_max >= thresholds.common_max &&
      !(thresholds.rare_max == 0 && thresholds.common_max == 0))
    throw std::invalid_argument("rare_max must be below common_max");
  std::vector<Group> groups(counts.k());
  for (std::size_t j = 0; j < counts.k(); ++j) {
    const std::int64_t n_j = counts.counts[j];
    if (n_j <= thresholds.rare_max)
      groups[j] = Group::rare;
    else if (n_j <= thresholds.common_max)
      groups[j] = Group::common;
    else
      groups[j] = Group::frequent;
  }
  return groups;
}

const char* marginal_mode_name(MarginalMode m) {
  return m == MarginalMode::mean_predictive ? "mean_predictive"
                                            : "argmax_histogram";
}

MarginalMode marginal_mode_from_name(const std::string& name) {
  if (name == "mean_predictive") return MarginalMode::mean_predictive;
  if (name == "argmax_histogram") return MarginalMode::argmax_histogram;
  throw std::invalid_argument("unknown marginal mode: " + name);
}

double uniform_kl_divergence(std::span<const double> marginal) {
  const double u = 1.0 / static_cast<double>(marginal.size());
  double kl = 0.0;
  for (double m : marginal) kl += u * std::log(u / m);
  return kl;
}

namespace {

// Predictive distribution for one sample. Softmax-family losses use
// softmax(logits); sigmoid-family ones normalize the per-class sigmoids so
// the marginal likelihood is a distribution.
std::vector<double> predictive_probs(const LossSpec& spec,
                                     std::span<const double> logits) {
  switch (spec.kind) {
    case LossKind::softmax_ce:
    case LossKind::balanced_softmax:
    case LossKind::cbw_softmax_ce:
      return softmax_probs(logits).probs;
    case LossKind::multi_binary_sigmoid:
    case LossKind::balanced_sigmoid: {
      std::vector<double> p(logits.size());
      double sum = 0.0;
      for (std::size_t j = 0; j < logits.size(); ++j) {
        p[j] = stable_sigmoid(logits[j]);
        sum += p[j];
      }
      for (double& v : p) v /= sum;
      return p;
    }
  }
  throw std::logic_error("unreachable loss kind");
}

}  // namespace

EvalReport evaluate(const ModelParams& params, const LossSpec& loss,
                    const Dataset& test, const std::vector<Group>& groups,
                    const EvalOptions& options) {
  if (groups.size() != test.k())
    throw std::invalid_argument("group map does not cover all classes");
  if (options.posthoc_convert && !options.train_counts)
    throw std::invalid_argument("post-hoc conversion needs train counts");

  const std::size_t k = test.k();
  const std::size_t n = test.size();
  Matrix logits = forward_logits(params, test.features);
  if (logits.cols != k)
    throw std::invalid_argument("model output dimension does not match test set");

  EvalReport report;
  report.per_class_accuracy.assign(k, 0.0);
  report.marginal_likelihood.assign(k, 0.0);
  std::vector<std::size_t> correct(k, 0);
  std::vector<std::size_t> argmax_hist(k, 0);

  for (std::size_t i = 0; i < n; ++i) {
    auto probs = predictive_probs(loss, logits.row(i));
    std::size_t predicted;
    if (options.posthoc_convert) {
      PosteriorVector converted = posterior_train_to_balanced(
          PosteriorVector{std::move(probs)}, *options.train_counts);
      probs = std::move(converted.probs);
      predicted = argmax_prediction(probs);
    } else {
      predicted = argmax_prediction(logits.row(i));
    }
    if (predicted == test.labels[i]) ++correct[test.labels[i]];
    ++argmax_hist[predicted];
    for (std::size_t j = 0; j < k; ++j) report.marginal_likelihood[j] += probs[j];
  }

  double overall = 0.0;
  double balanced = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double class_n = static_cast<double>(test.counts.counts[j]);
    report.per_class_accuracy[j] = static_cast<double>(correct[j]) / class_n;
    overall += static_cast<double>(correct[j]);
    balanced += report.per_class_accuracy[j];
  }
  report.overall_accuracy = overall / static_cast<double>(n);
  report.balanced_accuracy = balanced / static_cast<double>(k);

  if (options.marginal_mode == MarginalMode::mean_predictive) {
    for (double& m : report.marginal_likelihood) m /= static_cast<double>(n);
  } else {
    for (std::size_t j = 0; j < k; ++j)
      report.marginal_likelihood[j] =
          static_cast<double>(argmax_hist[j]) / static_cast<double>(n);
  }
  report.uniform_kl = uniform_kl_divergence(report.marginal_likelihood);

  // group accuracy = mean per-class accuracy within each non-empty group
  std::map<std::string, std::pair<double, std::size_t>> agg;
  for (std::size_t j = 0; j < k; ++j) {
    auto& slot = agg[group_name(groups[j])];
    slot.first += report.per_class_accuracy[j];
    slot.second += 1;
  }
  for (const auto& [name, slot] : agg)
    report.group_accuracy[name] = slot.first / static_cast<double>(slot.second);

  return report;
}

}  // namespace ltlab
