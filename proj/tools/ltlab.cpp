#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ltlab/experiment.hpp"

namespace {

std::string default_out_root() {
  const char* env = std::getenv("LTLAB_OUT_ROOT");
  return (env && *env) ? env : "out";
}

std::string config_stem(const std::string& config_path) {
  return std::filesystem::path(config_path).stem().string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-tailed classification laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string loss_name;
  std::string sampler_name;
  double tau = 1.0;
  std::uint64_t seed = 0;
  double imbalance = 1.0;

  CLI::App* run_cmd = app.add_subcommand("run", "train and evaluate one experiment");
  run_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  run_cmd->add_option("--seed", seed, "override the master seed");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--loss", loss_name, "override the loss kind");
  run_cmd->add_option("--tau", tau, "override the count exponent of the balanced softmax");
  run_cmd->add_option("--sampler", sampler_name, "override the sampler kind");
  run_cmd->add_option("--if", imbalance, "override the imbalance factor");

  std::vector<double> sweep_ifs;
  std::vector<std::string> sweep_losses;
  std::vector<std::uint64_t> sweep_seeds;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "grid of imbalance factor x loss, averaged over seeds");
  sweep_cmd->add_option("--config", config_path, "base config (JSON)")->required();
  sweep_cmd->add_option("--if", sweep_ifs, "imbalance factors to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--loss", sweep_losses, "loss kinds to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--seed", sweep_seeds, "seeds to average over")
      ->delimiter(',');
  sweep_cmd->add_option("--tau", tau, "tau applied to every swept loss");
  sweep_cmd->add_option("--sampler", sampler_name, "override the sampler kind");
  sweep_cmd->add_option("--out", out_dir, "sweep output directory");

  std::string checkpoint;
  CLI::App* eval_cmd = app.add_subcommand("eval", "re-evaluate a saved checkpoint");
  eval_cmd->add_option("checkpoint", checkpoint, "model checkpoint file")
      ->required();
  eval_cmd->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  eval_cmd->add_option("--seed", seed, "override the master seed (test split)");
  eval_cmd->add_option("--out", out_dir, "directory for metrics output");
  eval_cmd->add_option("--loss", loss_name, "override the loss kind");
  eval_cmd->add_option("--tau", tau, "override the count exponent");

  std::string pred_in;
  std::string pred_out;
  std::vector<std::int64_t> counts_list;
  CLI::App* convert_cmd = app.add_subcommand(
      "convert", "reweight a predictions file to the balanced posterior");
  convert_cmd->add_option("input", pred_in, "predictions CSV (one probability column per class)")
      ->required();
  convert_cmd->add_option("output", pred_out, "converted predictions CSV")
      ->required();
  convert_cmd->add_option("--config", config_path,
                          "config supplying the training counts");
  convert_cmd->add_option("--counts", counts_list, "explicit per-class counts")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run_cmd) {
      ltlab::ExperimentConfig config = ltlab::config_from_json_file(config_path);
      if (run_cmd->count("--seed")) {
        config.train.seed = seed;
        if (config.decouple) config.decouple->stage2.seed = seed;
      }
      if (run_cmd->count("--loss")) {
        config.loss.kind = ltlab::loss_kind_from_name(loss_name);
        config.loss.class_weights.reset();
      }
      if (run_cmd->count("--tau")) config.loss.tau = tau;
      if (run_cmd->count("--sampler"))
        config.sampler = ltlab::sampler_kind_from_name(sampler_name);
      if (run_cmd->count("--if")) {
        if (!config.synthetic)
          throw std::invalid_argument("--if needs a synthetic dataset");
        config.synthetic->profile.imbalance_factor = imbalance;
      }
      if (run_cmd->count("--out")) config.output_dir = out_dir;
      if (config.output_dir.empty())
        config.output_dir = default_out_root() + "/" + config_stem(config_path);
      ltlab::run_experiment(config);
      return 0;
    }

    if (*sweep_cmd) {
      ltlab::ExperimentConfig base = ltlab::config_from_json_file(config_path);
      if (sweep_cmd->count("--tau")) base.loss.tau = tau;
      if (sweep_cmd->count("--sampler"))
        base.sampler = ltlab::sampler_kind_from_name(sampler_name);
      ltlab::SweepAxis axis;
      if (sweep_cmd->count("--if"))
        axis.imbalance_factors = sweep_ifs;
      else if (base.synthetic)
        axis.imbalance_factors = {base.synthetic->profile.imbalance_factor};
      if (sweep_cmd->count("--loss")) {
        for (const std::string& name : sweep_losses) {
          ltlab::LossSpec l = base.loss;
          l.kind = ltlab::loss_kind_from_name(name);
          l.class_weights.reset();
          axis.losses.push_back(l);
        }
      } else {
        axis.losses = {base.loss};
      }
      axis.seeds = sweep_cmd->count("--seed")
                       ? sweep_seeds
                       : std::vector<std::uint64_t>{base.train.seed};
      std::string sweep_out;
      if (sweep_cmd->count("--out"))
        sweep_out = out_dir;
      else if (!base.output_dir.empty())
        sweep_out = base.output_dir;
      else
        sweep_out = default_out_root() + "/" + config_stem(config_path) + "_sweep";
      base.output_dir.clear();  // cells get their own directories
      ltlab::run_sweep(base, axis, sweep_out);
      std::printf("[ltlab sweep] table -> %s/sweep.csv\n", sweep_out.c_str());
      return 0;
    }

    if (*eval_cmd) {
      ltlab::ExperimentConfig config = ltlab::config_from_json_file(config_path);
      if (eval_cmd->count("--seed")) config.train.seed = seed;
      if (eval_cmd->count("--loss")) {
        config.loss.kind = ltlab::loss_kind_from_name(loss_name);
        config.loss.class_weights.reset();
      }
      if (eval_cmd->count("--tau")) config.loss.tau = tau;
      config.output_dir = eval_cmd->count("--out") ? out_dir : "";
      ltlab::evaluate_checkpoint(config, checkpoint);
      return 0;
    }

    if (*convert_cmd) {
      ltlab::ClassCounts counts = [&] {
        if (convert_cmd->count("--counts"))
          return ltlab::ClassCounts::from_counts(counts_list);
        if (convert_cmd->count("--config"))
          return ltlab::train_counts_for(ltlab::config_from_json_file(config_path));
        throw std::invalid_argument(
            "convert needs --counts or --config for the class counts");
      }();
      ltlab::convert_predictions_file(pred_in, pred_out, counts);
      std::printf("[ltlab convert] %s -> %s (k=%zu)\n", pred_in.c_str(),
                  pred_out.c_str(), counts.k());
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "ltlab: config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ltlab: error: %s\n", e.what());
    return 2;
  }
  return 0;
}
