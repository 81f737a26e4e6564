#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ltlab/data.hpp"
#include "ltlab/eval.hpp"
#include "ltlab/losses.hpp"
#include "ltlab/sampling.hpp"
#include "ltlab/training.hpp"

namespace ltlab {

/// Synthetic dataset description: a long-tail training profile drawn from
/// a Gaussian mixture, plus a balanced test split from the same mixture.
struct SyntheticSpec {
  LongTailProfile profile;
  GaussianMixtureSpec mixture;
  std::int64_t test_per_class = 500;
};

/// External train/test pair in the artifact's own CSV format (feature
/// columns first, label column last).
struct CsvDatasetSpec {
  std::string train_path;
  std::string test_path;
  bool has_header = true;
};

enum class DecoupleMethod { crt, lws };

const char* decouple_method_name(DecoupleMethod m);
DecoupleMethod decouple_method_from_name(const std::string& name);

/// Optional second training stage on a frozen stage-1 model.
struct DecoupleSpec {
  DecoupleMethod method = DecoupleMethod::crt;
  TrainConfig stage2;
};

struct EvalSpec {
  GroupThresholds groups;
  MarginalMode marginal_mode = MarginalMode::mean_predictive;
  bool posthoc_convert = false;
};

/// Complete, serializable description of one experiment. Exactly one of
/// `synthetic` / `csv` must be set; `train.seed` is the master seed for
/// data generation, initialization, and sampling.
struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<CsvDatasetSpec> csv;
  LossSpec loss;
  SamplerKind sampler = SamplerKind::instance_balanced;
  double rf_threshold = 0.001;
  TrainConfig train;
  std::optional<DecoupleSpec> decouple;
  EvalSpec eval;
  std::string output_dir;

  void validate() const;
};

/// JSON (de)serialization; parse(serialize(c)) == c. Parse errors and
/// inconsistent configs throw std::invalid_argument with a diagnostic.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_json_file(const std::filesystem::path& path);
std::string config_to_json_text(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

struct DataBundle {
  Dataset train;
  Dataset test;
};

/// Materializes the configured train/test pair (synthesis or CSV load).
DataBundle materialize_data(const ExperimentConfig& config);

/// Training-set class counts implied by the config without materializing
/// features for the synthetic case (CSV configs scan the train file).
ClassCounts train_counts_for(const ExperimentConfig& config);

/// Fills derived loss parameters that depend on the training counts
/// (class-balanced weights); other specs pass through unchanged.
LossSpec resolve_loss(const LossSpec& spec, const ClassCounts& counts);

/// Runs one experiment end to end: materialize data, train (plus the
/// optional decoupled stage 2), evaluate on the balanced test set, and
/// write config.json, metrics.txt, trace.csv, py_curve.csv and model.ckpt
/// under output_dir. Prints a one-line summary. On divergence the partial
/// trace is written before the error propagates.
EvalReport run_experiment(const ExperimentConfig& config);

/// Re-evaluates a saved checkpoint against the config's test split. When
/// output_dir is nonempty, writes metrics.txt there.
EvalReport evaluate_checkpoint(const ExperimentConfig& config,
                               const std::filesystem::path& checkpoint);

struct SweepAxis {
  std::vector<double> imbalance_factors;
  std::vector<LossSpec> losses;
  std::vector<std::uint64_t> seeds;
};

struct SweepCell {
  double imbalance_factor = 0.0;
  LossSpec loss;
  std::size_t runs = 0;
  bool failed = false;
  double mean_balanced_accuracy = 0.0;
  double stddev_balanced_accuracy = 0.0;  // population stddev over seeds
  std::string error;                      // first failure message, if any
};

/// Grid of imbalance factor x loss, each cell averaged over the seeds.
/// Rows are ordered by decreasing imbalance factor. A failing cell is
/// recorded as failed and the sweep continues. Writes sweep.csv plus one
/// artifact directory per run under out_dir; returns the table.
std::vector<SweepCell> run_sweep(const ExperimentConfig& base,
                                 const SweepAxis& axis,
                                 const std::string& out_dir);

/// Marginal-likelihood plot data: header plus one row per class with
/// columns class_index, train_count, marginal_likelihood, ordered by
/// decreasing train count with ties broken by index.
void emit_py_curve(const EvalReport& report, const ClassCounts& train_counts,
                   const std::filesystem::path& path);

/// Reads a metrics.txt document back into key -> value form.
std::map<std::string, std::string> read_metrics(const std::filesystem::path& path);

/// Applies posterior_train_to_balanced row by row to a predictions CSV
/// (one probability column per class, optional header) and writes the
/// converted rows in the same format.
void convert_predictions_file(const std::filesystem::path& in,
                              const std::filesystem::path& out,
                              const ClassCounts& counts);

}  // namespace ltlab
