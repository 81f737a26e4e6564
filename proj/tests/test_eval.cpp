#include "doctest.h"

#include "ltlab/eval.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace ltlab;

namespace {

// Test set with one-hot features: a model whose weight matrix is chosen by
// hand then produces fully predictable logits per class.
Dataset one_hot_dataset(const std::vector<std::size_t>& labels, std::size_t k) {
  Matrix features(labels.size(), k);
  for (std::size_t i = 0; i < labels.size(); ++i)
    features.at(i, labels[i]) = 1.0;
  return Dataset::from_parts(std::move(features), labels, k);
}

ModelParams linear_model(Matrix weight) {
  ModelParams m;
  const std::size_t rows = weight.rows;
  m.layers.push_back({std::move(weight), std::vector<double>(rows, 0.0)});
  return m;
}

}  // namespace

TEST_CASE("class grouping by training frequency") {
  const ClassCounts counts = ClassCounts::from_counts({1000, 50, 5});
  const auto groups = group_classes(counts, GroupThresholds{10, 100});
  REQUIRE(groups.size() == 3);
  CHECK(groups[0] == Group::frequent);
  CHECK(groups[1] == Group::common);
  CHECK(groups[2] == Group::rare);

  // Boundary counts land in the smaller group.
  const ClassCounts edges = ClassCounts::from_counts({10, 100, 101});
  const auto edge_groups = group_classes(edges, GroupThresholds{10, 100});
  CHECK(edge_groups[0] == Group::rare);
  CHECK(edge_groups[1] == Group::common);
  CHECK(edge_groups[2] == Group::frequent);

  // Zeroed thresholds disable the split entirely.
  for (Group g : group_classes(counts, GroupThresholds{0, 0}))
    CHECK(g == Group::frequent);

  CHECK_THROWS_WITH(group_classes(counts, GroupThresholds{100, 100}),
                    "rare_max must be below common_max");
}

TEST_CASE("group and marginal mode names") {
  CHECK(std::string(group_name(Group::frequent)) == "frequent");
  CHECK(std::string(group_name(Group::common)) == "common");
  CHECK(std::string(group_name(Group::rare)) == "rare");

  for (MarginalMode m :
       {MarginalMode::mean_predictive, MarginalMode::argmax_histogram})
    CHECK(marginal_mode_from_name(marginal_mode_name(m)) == m);
  CHECK_THROWS_AS(marginal_mode_from_name("modal"), std::invalid_argument);
}

TEST_CASE("uniform KL divergence closed forms") {
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  CHECK(uniform_kl_divergence(uniform) == 0.0);

  const std::vector<double> skew{0.7, 0.3};
  const double want =
      0.5 * std::log(0.5 / 0.7) + 0.5 * std::log(0.5 / 0.3);
  CHECK(uniform_kl_divergence(skew) == doctest::Approx(want).epsilon(1e-14));
  CHECK(uniform_kl_divergence(skew) > 0.0);
}

TEST_CASE("a perfect predictor scores 1.0 everywhere") {
  const Dataset test = one_hot_dataset({0, 0, 1, 1, 2, 2}, 3);
  Matrix w(3, 3);
  for (std::size_t j = 0; j < 3; ++j) w.at(j, j) = 1.0;
  const ModelParams model = linear_model(std::move(w));

  LossSpec spec;
  const std::vector<Group> groups(3, Group::frequent);
  const EvalReport report = evaluate(model, spec, test, groups);
  CHECK(report.overall_accuracy == 1.0);
  CHECK(report.balanced_accuracy == 1.0);
  for (double acc : report.per_class_accuracy) CHECK(acc == 1.0);
  CHECK(report.group_accuracy.at("frequent") == 1.0);
  CHECK(report.group_accuracy.size() == 1);  // only non-empty groups appear
}

TEST_CASE("hand-tallied confusion on three classes") {
  // Class-2 features are steered onto class 0; the other two stay correct.
  const Dataset test = one_hot_dataset({0, 0, 1, 1, 2, 2}, 3);
  Matrix w(3, 3);
  w.at(0, 0) = 1.0;
  w.at(1, 1) = 1.0;
  w.at(0, 2) = 2.0;  // column 2 now votes for class 0
  const ModelParams model = linear_model(std::move(w));

  LossSpec spec;
  const std::vector<Group> groups{Group::frequent, Group::common, Group::rare};
  const EvalReport report = evaluate(model, spec, test, groups);

  CHECK(report.per_class_accuracy[0] == 1.0);
  CHECK(report.per_class_accuracy[1] == 1.0);
  CHECK(report.per_class_accuracy[2] == 0.0);
  CHECK(report.overall_accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-14));
  CHECK(report.balanced_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(report.group_accuracy.at("frequent") == 1.0);
  CHECK(report.group_accuracy.at("common") == 1.0);
  CHECK(report.group_accuracy.at("rare") == 0.0);
}

TEST_CASE("zero model yields a uniform marginal under mean predictive") {
  const Dataset test = one_hot_dataset({0, 1, 0, 1}, 2);
  const ModelParams model = linear_model(Matrix(2, 2));
  const std::vector<Group> groups(2, Group::frequent);

  for (LossKind kind : {LossKind::softmax_ce, LossKind::multi_binary_sigmoid}) {
    LossSpec spec;
    spec.kind = kind;
    const EvalReport report = evaluate(model, spec, test, groups);
    CHECK(report.marginal_likelihood[0] ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(report.marginal_likelihood[1] ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(report.uniform_kl) < 1e-12);
    // All-zero logits tie, so argmax sends everything to class 0.
    CHECK(report.overall_accuracy == 0.5);
  }
}

TEST_CASE("argmax histogram marginal counts predictions") {
  const Dataset test = one_hot_dataset({0, 1, 0, 1}, 2);
  const ModelParams model = linear_model(Matrix(2, 2));
  const std::vector<Group> groups(2, Group::frequent);

  LossSpec spec;
  EvalOptions options;
  options.marginal_mode = MarginalMode::argmax_histogram;
  const EvalReport report = evaluate(model, spec, test, groups, options);
  CHECK(report.marginal_likelihood[0] == 1.0);  // every tie resolves to 0
  CHECK(report.marginal_likelihood[1] == 0.0);
  CHECK(std::isinf(report.uniform_kl));
}

TEST_CASE("marginal likelihood is a distribution for both families") {
  const GaussianMixtureSpec mix = circle_mixture(3, 2, 2.0, 1.0);
  Rng data_rng(61);
  const Dataset test = synthesize_gaussian(
      mix, ClassCounts::from_counts({20, 20, 20}), data_rng);
  Rng init_rng(62);
  const ModelParams model = init_params(2, 3, std::nullopt, init_rng);
  const std::vector<Group> groups(3, Group::frequent);

  for (LossKind kind : {LossKind::softmax_ce, LossKind::balanced_softmax,
                        LossKind::multi_binary_sigmoid,
                        LossKind::balanced_sigmoid}) {
    LossSpec spec;
    spec.kind = kind;
    const EvalReport report = evaluate(model, spec, test, groups);
    double sum = 0.0;
    for (double m : report.marginal_likelihood) {
      CHECK(m >= 0.0);
      sum += m;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("balanced accuracy equals overall accuracy on a balanced test set") {
  const GaussianMixtureSpec mix = circle_mixture(4, 2, 2.0, 1.0);
  Rng data_rng(63);
  const Dataset test = synthesize_gaussian(
      mix, ClassCounts::from_counts({25, 25, 25, 25}), data_rng);
  Rng init_rng(64);
  const ModelParams model = init_params(2, 4, std::nullopt, init_rng);
  LossSpec spec;
  const std::vector<Group> groups(4, Group::frequent);
  const EvalReport report = evaluate(model, spec, test, groups);
  CHECK(report.balanced_accuracy ==
        doctest::Approx(report.overall_accuracy).epsilon(1e-12));
}

TEST_CASE("evaluation is pure and repeatable") {
  const Dataset test = one_hot_dataset({0, 1, 2, 0, 1, 2}, 3);
  Rng rng(65);
  const ModelParams model = init_params(3, 3, 4, rng);
  const ModelParams before = model;
  LossSpec spec;
  const std::vector<Group> groups(3, Group::frequent);

  const EvalReport a = evaluate(model, spec, test, groups);
  const EvalReport b = evaluate(model, spec, test, groups);
  CHECK(a.overall_accuracy == b.overall_accuracy);
  CHECK(a.balanced_accuracy == b.balanced_accuracy);
  CHECK(a.marginal_likelihood == b.marginal_likelihood);
  CHECK(bitwise_equal(model, before));
}

TEST_CASE("post-hoc conversion reweights predictions by train counts") {
  // Both samples produce logits (0.6, 0.4): the raw argmax says class 0,
  // but dividing out train counts of (100, 1) flips the call to class 1.
  Matrix features(2, 1);
  features.at(0, 0) = 1.0;
  features.at(1, 0) = 1.0;
  const Dataset test = Dataset::from_parts(std::move(features), {0, 1}, 2);
  Matrix w(2, 1);
  w.at(0, 0) = 0.6;
  w.at(1, 0) = 0.4;
  const ModelParams model = linear_model(std::move(w));
  LossSpec spec;
  const std::vector<Group> groups(2, Group::frequent);

  const EvalReport raw = evaluate(model, spec, test, groups);
  CHECK(raw.per_class_accuracy[0] == 1.0);
  CHECK(raw.per_class_accuracy[1] == 0.0);

  EvalOptions options;
  options.posthoc_convert = true;
  options.train_counts = ClassCounts::from_counts({100, 1});
  const EvalReport converted = evaluate(model, spec, test, groups, options);
  CHECK(converted.per_class_accuracy[0] == 0.0);
  CHECK(converted.per_class_accuracy[1] == 1.0);
  // The reported marginal reflects the converted distribution.
  CHECK(converted.marginal_likelihood[1] > raw.marginal_likelihood[1]);

  EvalOptions missing;
  missing.posthoc_convert = true;
  CHECK_THROWS_WITH(evaluate(model, spec, test, groups, missing),
                    "post-hoc conversion needs train counts");
}

TEST_CASE("evaluate rejects inconsistent group maps") {
  const Dataset test = one_hot_dataset({0, 1}, 2);
  const ModelParams model = linear_model(Matrix(2, 2));
  LossSpec spec;
  const std::vector<Group> too_short(1, Group::frequent);
  CHECK_THROWS_AS(evaluate(model, spec, test, too_short),
                  std::invalid_argument);
}
