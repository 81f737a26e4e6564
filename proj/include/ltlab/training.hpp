#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltlab/data.hpp"
#include "ltlab/losses.hpp"
#include "ltlab/sampling.hpp"

namespace ltlab {

/// One affine layer: weight is (out x in), bias has length out.
struct Layer {
  Matrix weight;
  std::vector<double> bias;
};

/// Linear (1 layer) or one-hidden-layer (2 layers, relu between)
/// classifier. When lws_scales is present, final logit j is multiplied by
/// scales[j]; scales stay positive because training optimizes their log.
struct ModelParams {
  std::vector<Layer> layers;
  std::optional<std::vector<double>> lws_scales;

  std::size_t input_dim() const { return layers.front().weight.cols; }
  std::size_t output_dim() const { return layers.back().weight.rows; }
  void validate() const;
};

bool bitwise_equal(const ModelParams& a, const ModelParams& b);

enum class LrScheduleKind { constant, step };

struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::constant;
  std::vector<std::size_t> milestones;  // epochs at which lr is scaled
  double factor = 0.1;

  double multiplier_at(std::size_t epoch) const;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> hidden_dim;  // absent => linear model
  LrSchedule lr_schedule;

  void validate(bool allow_zero_epochs = false) const;
};

struct TrainTrace {
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_balanced_accuracy;  // empty without a validation set
};

struct TrainResult {
  ModelParams params;
  TrainTrace trace;
};

/// Raised when the training loss turns non-finite. Carries the trace of
/// the epochs completed before the failure so callers can persist it.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, TrainTrace trace)
      : std::runtime_error(what), partial_trace(std::move(trace)) {}

  TrainTrace partial_trace;
};

/// Fan-in scaled uniform weights, zero biases, deterministic in the rng.
ModelParams init_params(std::size_t input_dim, std::size_t k,
                        std::optional<std::size_t> hidden_dim, Rng& rng);

/// Model output eta for a batch (rows = samples).
Matrix forward_logits(const ModelParams& params, const Matrix& features);

/// Mean loss over a batch under the spec; pure, no regularization terms.
double batch_loss(const ModelParams& params, const Matrix& features,
                  std::span<const std::size_t> labels, const LossSpec& spec,
                  const ClassCounts& counts);

/// Analytic parameter gradients of batch_loss, mirrored onto the model
/// structure. log_scale_grad is the gradient with respect to log(scales)
/// and is empty when the model carries no scales.
struct ParamGrads {
  std::vector<Layer> layers;
  std::vector<double> log_scale_grad;
};

ParamGrads batch_gradients(const ModelParams& params, const Matrix& features,
                           std::span<const std::size_t> labels,
                           const LossSpec& spec, const ClassCounts& counts);

/// Deterministic minibatch SGD with momentum and weight decay. Counts for
/// the balanced losses come from dataset.counts. Throws
/// "diverged at epoch e, batch b" if the loss turns non-finite. When
/// `validation` is given, balanced validation accuracy is traced per epoch.
TrainResult train(const Dataset& dataset, const LossSpec& loss,
                  const SamplerPlan& sampler, const TrainConfig& config,
                  const Dataset* validation = nullptr);

/// Classifier retraining: freezes every layer except the last (bitwise)
/// and continues training the final layer with class-balanced sampling.
/// Requires a backbone (>= 2 layers) unless allow_linear is set, since cRT
/// on a linear model degenerates to plain retraining. Zero epochs is a
/// no-op.
ModelParams crt_retrain(const ModelParams& stage1, const Dataset& dataset,
                        const LossSpec& loss, const TrainConfig& config,
                        bool allow_linear = false);

/// Learnable weight scaling: freezes all stage-1 weights (bitwise) and
/// trains only per-class logit scales, initialized to 1, with
/// class-balanced sampling.
ModelParams lws_retrain(const ModelParams& stage1, const Dataset& dataset,
                        const LossSpec& loss, const TrainConfig& config,
                        bool allow_linear = false);

/// Versioned text checkpoint with hex-float values; round-trips exactly.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ltlab
