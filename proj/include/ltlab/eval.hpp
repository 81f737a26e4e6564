#pragma once

#include <map>
#include <string>
#include <vector>

#include "ltlab/data.hpp"
#include "ltlab/losses.hpp"
#include "ltlab/training.hpp"

namespace ltlab {

enum class Group { frequent, common, rare };

const char* group_name(Group g);

/// LVIS-style frequency grouping; thresholds are configurable because the
/// source convention fixes only the group names.
struct GroupThresholds {
  std::int64_t rare_max = 10;
  std::int64_t common_max = 100;
};

/// class j is rare if n_j <= rare_max, common if n_j <= common_max, else
/// frequent. Requires rare_max < common_max (or both zero for the vacuous
/// all-frequent map).
std::vector<Group> group_classes(const ClassCounts& counts,
                                 const GroupThresholds& thresholds);

/// How the marginal likelihood p(y) is aggregated: the mean predictive
/// distribution over test samples, or the histogram of argmax predictions.
enum class MarginalMode { mean_predictive, argmax_histogram };

const char* marginal_mode_name(MarginalMode m);
MarginalMode marginal_mode_from_name(const std::string& name);

struct EvalOptions {
  MarginalMode marginal_mode = MarginalMode::mean_predictive;
  /// Post-hoc conversion of the predictive distribution through
  /// posterior_train_to_balanced, for models trained with plain softmax on
  /// imbalanced data. Requires train_counts.
  bool posthoc_convert = false;
  std::optional<ClassCounts> train_counts;
};

struct EvalReport {
  double overall_accuracy = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::map<std::string, double> group_accuracy;  // only non-empty groups
  std::vector<double> marginal_likelihood;
  double uniform_kl = 0.0;
};

/// Balanced-test-set evaluation. Predictions are argmax over raw logits
/// (ties to the lowest index) for every loss family; counts are not
/// applied at test time. The predictive distribution is softmax(logits)
/// for the softmax family and normalized per-class sigmoids for the
/// sigmoid family.
EvalReport evaluate(const ModelParams& params, const LossSpec& loss,
                    const Dataset& test, const std::vector<Group>& groups,
                    const EvalOptions& options = {});

/// KL(uniform || marginal); 0 exactly when the marginal is uniform.
double uniform_kl_divergence(std::span<const double> marginal);

}  // namespace ltlab
