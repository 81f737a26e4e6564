#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltlab/numerics.hpp"

namespace ltlab {

/// Per-class training sample counts n_j with k = counts.size() and
/// n = sum_j n_j. Requires k >= 2 and every n_j >= 1; zero counts are
/// rejected at construction (pass min_count_floor=true to clamp them to 1
/// instead, e.g. for noisy external count files).
struct ClassCounts {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  static ClassCounts from_counts(std::vector<std::int64_t> c,
                                 bool min_count_floor = false);

  std::size_t k() const { return counts.size(); }
  std::int64_t n() const { return total; }
  bool all_equal() const;
  /// ln n_j per class.
  std::vector<double> log_counts() const;
};

enum class LossKind {
  softmax_ce,
  balanced_softmax,
  multi_binary_sigmoid,
  balanced_sigmoid,
  cbw_softmax_ce,
};

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

/// Which activation/loss to train with. `tau` is the exponent applied as
/// n_j^tau inside the balanced softmax: tau=1 is the shift that exactly
/// matches the training label distribution, tau=1/4 the margin-derived
/// variant. `class_weights` is required for cbw_softmax_ce.
struct LossSpec {
  LossKind kind = LossKind::softmax_ce;
  double tau = 1.0;
  std::optional<std::vector<double>> class_weights;

  void validate(std::size_t k) const;
};

/// Probability vector over k classes. Softmax-family outputs sum to 1;
/// per-class sigmoid outputs are carried unnormalized where noted.
struct PosteriorVector {
  std::vector<double> probs;

  std::size_t k() const { return probs.size(); }
};

/// Standard softmax, computed through log_sum_exp. Throws on non-finite
/// logits or k < 2.
PosteriorVector softmax_probs(std::span<const double> logits);

/// n_j^tau e^{eta_j} / sum_i n_i^tau e^{eta_i}, evaluated as
/// softmax(eta + tau*log n). Equal counts cancel exactly, so that case
/// reproduces softmax_probs(logits) bit for bit.
PosteriorVector balanced_softmax_probs(std::span<const double> logits,
                                       const ClassCounts& counts, double tau);

/// -log of the balanced-softmax probability at `label`.
double balanced_softmax_loss(std::span<const double> logits, std::size_t label,
                             const ClassCounts& counts, double tau);

/// d loss / d logits = balanced_probs - one_hot(label); sums to 0.
std::vector<double> balanced_softmax_grad(std::span<const double> logits,
                                          std::size_t label,
                                          const ClassCounts& counts, double tau);

double softmax_ce_loss(std::span<const double> logits, std::size_t label);
std::vector<double> softmax_ce_grad(std::span<const double> logits,
                                    std::size_t label);

/// Sum over k independent binary logistic problems: target 1 for the true
/// class, 0 elsewhere. Evaluated through softplus so saturated logits do
/// not overflow.
double multi_binary_logistic_loss(std::span<const double> logits,
                                  std::size_t label);
std::vector<double> multi_binary_logistic_grad(std::span<const double> logits,
                                               std::size_t label);

/// Per-class additive logit offset of the balanced sigmoid:
///   offset_j = log( (n/k)/n_j * (n-n_j)/(n-n/k) )
/// so that the balanced per-class probability is sigma(eta_j - offset_j).
/// Balanced counts give exactly zero offsets. Throws "degenerate counts"
/// if any n_j >= n.
std::vector<double> balanced_sigmoid_offsets(const ClassCounts& counts);

/// multi_binary_logistic_loss applied to (logits - offsets).
double balanced_sigmoid_loss(std::span<const double> logits, std::size_t label,
                             const ClassCounts& counts);
std::vector<double> balanced_sigmoid_grad(std::span<const double> logits,
                                          std::size_t label,
                                          const ClassCounts& counts);

/// phi_hat_j = n_j phi_j / sum_i n_i phi_i (balanced posterior -> posterior
/// under the training label distribution).
PosteriorVector posterior_balanced_to_train(const PosteriorVector& phi,
                                            const ClassCounts& counts);

/// Exact inverse: (phi_hat_j / n_j) / sum_i (phi_hat_i / n_i).
PosteriorVector posterior_train_to_balanced(const PosteriorVector& phi_hat,
                                            const ClassCounts& counts);

enum class CbwScheme { inverse_frequency };

/// Class-balanced weights w_j = n / (k n_j); all-ones for balanced counts.
std::vector<double> cbw_weights(const ClassCounts& counts,
                                CbwScheme scheme = CbwScheme::inverse_frequency);

/// Prediction rule shared by every loss: argmax over raw logits, ties
/// broken toward the lowest class index.
std::size_t argmax_prediction(std::span<const double> logits);

/// Dispatch on LossSpec. `counts` supplies the n_j used by the balanced
/// variants and is ignored by softmax_ce / multi_binary_sigmoid.
double loss_value(const LossSpec& spec, std::span<const double> logits,
                  std::size_t label, const ClassCounts& counts);
std::vector<double> loss_grad(const LossSpec& spec, std::span<const double> logits,
                              std::size_t label, const ClassCounts& counts);

/// Stable sigmoid and softplus helpers used by the sigmoid-family losses.
double stable_sigmoid(double x);
double softplus(double x);

}  // namespace ltlab
