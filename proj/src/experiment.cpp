#include "ltlab/experiment.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;

namespace ltlab {

const char* decouple_method_name(DecoupleMethod m) {
  return m == DecoupleMethod::crt ? "crt" : "lws";
}

DecoupleMethod decouple_method_from_name(const std::string& name) {
  if (name == "crt") return DecoupleMethod::crt;
  if (name == "lws") return DecoupleMethod::lws;
  throw std::invalid_argument("unknown decouple method: " + name);
}

void ExperimentConfig::validate() const {
  if (static_cast<bool>(synthetic) == static_cast<bool>(csv))
    throw std::invalid_argument(
        "config needs exactly one dataset spec (synthetic or csv)");
  if (synthetic) {
    const SyntheticSpec& s = *synthetic;
    if (s.profile.k < 2)
      throw std::invalid_argument("synthetic dataset needs at least two classes");
    if (s.profile.n_max < 1)
      throw std::invalid_argument("n_max must be positive");
    if (!(s.profile.imbalance_factor >= 1.0))
      throw std::invalid_argument("imbalance factor must be >= 1");
    s.mixture.validate();
    if (s.mixture.k() != s.profile.k)
      throw std::invalid_argument("mixture and profile disagree on the class count");
    if (s.test_per_class < 1)
      throw std::invalid_argument("test_per_class must be positive");
  } else {
    if (csv->train_path.empty() || csv->test_path.empty())
      throw std::invalid_argument("csv dataset needs train and test paths");
  }
  if (!std::isfinite(loss.tau) || !(loss.tau > 0.0))
    throw std::invalid_argument("tau must be positive and finite");
  if (sampler == SamplerKind::repeat_factor &&
      !(rf_threshold > 0.0 && rf_threshold < 1.0))
    throw std::invalid_argument("repeat-factor threshold must lie in (0, 1)");
  train.validate();
  if (decouple) decouple->stage2.validate(/*allow_zero_epochs=*/true);
  const GroupThresholds& g = eval.groups;
  if (g.rare_max >= g.common_max && !(g.rare_max == 0 && g.common_max == 0))
    throw std::invalid_argument("rare_max must be below common_max");
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::json;

void expect_keys(const json& obj, const char* where,
                 std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
  }
}

std::uint64_t require_uint(const json& j, const char* what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const std::int64_t v = j.get<std::int64_t>();
    if (v < 0)
      throw std::invalid_argument(std::string(what) + " must be nonnegative");
    return static_cast<std::uint64_t>(v);
  }
  throw std::invalid_argument(std::string(what) + " must be an integer");
}

double require_double(const json& j, const char* what) {
  if (!j.is_number())
    throw std::invalid_argument(std::string(what) + " must be a number");
  return j.get<double>();
}

std::string require_string(const json& j, const char* what) {
  if (!j.is_string())
    throw std::invalid_argument(std::string(what) + " must be a string");
  return j.get<std::string>();
}

TrainConfig train_from_json(const json& j, const char* where,
                            const TrainConfig& defaults) {
  expect_keys(j, where,
              {"epochs", "batch_size", "learning_rate", "momentum",
               "weight_decay", "seed", "hidden_dim", "lr_schedule"});
  TrainConfig c = defaults;
  if (j.contains("epochs"))
    c.epochs = static_cast<std::size_t>(require_uint(j.at("epochs"), "epochs"));
  if (j.contains("batch_size"))
    c.batch_size =
        static_cast<std::size_t>(require_uint(j.at("batch_size"), "batch_size"));
  if (j.contains("learning_rate"))
    c.learning_rate = require_double(j.at("learning_rate"), "learning_rate");
  if (j.contains("momentum"))
    c.momentum = require_double(j.at("momentum"), "momentum");
  if (j.contains("weight_decay"))
    c.weight_decay = require_double(j.at("weight_decay"), "weight_decay");
  if (j.contains("seed")) c.seed = require_uint(j.at("seed"), "seed");
  if (j.contains("hidden_dim")) {
    const std::uint64_t h = require_uint(j.at("hidden_dim"), "hidden_dim");
    if (h == 0) throw std::invalid_argument("hidden_dim must be positive");
    c.hidden_dim = static_cast<std::size_t>(h);
  }
  if (j.contains("lr_schedule")) {
    const json& s = j.at("lr_schedule");
    expect_keys(s, "lr_schedule", {"kind", "milestones", "factor"});
    if (s.contains("kind")) {
      const std::string kind = require_string(s.at("kind"), "lr_schedule.kind");
      if (kind == "constant")
        c.lr_schedule.kind = LrScheduleKind::constant;
      else if (kind == "step")
        c.lr_schedule.kind = LrScheduleKind::step;
      else
        throw std::invalid_argument("unknown lr schedule kind: " + kind);
    }
    if (s.contains("milestones")) {
      const json& m = s.at("milestones");
      if (!m.is_array())
        throw std::invalid_argument("lr_schedule.milestones must be an array");
      c.lr_schedule.milestones.clear();
      for (const json& e : m)
        c.lr_schedule.milestones.push_back(
            static_cast<std::size_t>(require_uint(e, "milestone")));
    }
    if (s.contains("factor"))
      c.lr_schedule.factor = require_double(s.at("factor"), "lr_schedule.factor");
  }
  return c;
}

json train_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  if (c.hidden_dim) j["hidden_dim"] = *c.hidden_dim;
  json sched;
  sched["kind"] =
      c.lr_schedule.kind == LrScheduleKind::constant ? "constant" : "step";
  sched["milestones"] = c.lr_schedule.milestones;
  sched["factor"] = c.lr_schedule.factor;
  j["lr_schedule"] = sched;
  return j;
}

void dataset_from_json(const json& j, ExperimentConfig& config) {
  if (!j.is_object() || !j.contains("type"))
    throw std::invalid_argument("dataset spec needs a 'type'");
  const std::string type = require_string(j.at("type"), "dataset.type");
  if (type == "csv") {
    expect_keys(j, "dataset", {"type", "train", "test", "has_header"});
    CsvDatasetSpec csv;
    if (!j.contains("train") || !j.contains("test"))
      throw std::invalid_argument("csv dataset needs 'train' and 'test' paths");
    csv.train_path = require_string(j.at("train"), "dataset.train");
    csv.test_path = require_string(j.at("test"), "dataset.test");
    if (j.contains("has_header"))
      csv.has_header = j.at("has_header").get<bool>();
    config.csv = std::move(csv);
    return;
  }
  if (type != "synthetic")
    throw std::invalid_argument("unknown dataset type: " + type);

  expect_keys(j, "dataset",
              {"type", "k", "n_max", "imbalance_factor", "dim", "test_per_class",
               "means", "variances", "mean_radius", "variance"});
  SyntheticSpec s;
  s.profile.k =
      j.contains("k") ? static_cast<std::size_t>(require_uint(j.at("k"), "k")) : 3;
  s.profile.n_max = j.contains("n_max")
                        ? static_cast<std::int64_t>(
                              require_uint(j.at("n_max"), "n_max"))
                        : 300;
  s.profile.imbalance_factor =
      j.contains("imbalance_factor")
          ? require_double(j.at("imbalance_factor"), "imbalance_factor")
          : 10.0;
  const std::size_t dim =
      j.contains("dim") ? static_cast<std::size_t>(require_uint(j.at("dim"), "dim"))
                        : 2;
  s.test_per_class = j.contains("test_per_class")
                         ? static_cast<std::int64_t>(require_uint(
                               j.at("test_per_class"), "test_per_class"))
                         : 100;

  if (j.contains("means")) {
    if (j.contains("mean_radius"))
      throw std::invalid_argument(
          "give either explicit means or a mean_radius, not both");
    GaussianMixtureSpec mix;
    mix.dim = dim;
    mix.means = j.at("means").get<std::vector<std::vector<double>>>();
    if (j.contains("variances")) {
      mix.variances = j.at("variances").get<std::vector<std::vector<double>>>();
      mix.validate();
      s.mixture = std::move(mix);
    } else {
      const double variance =
          j.contains("variance") ? require_double(j.at("variance"), "variance")
                                 : 1.0;
      s.mixture =
          GaussianMixtureSpec::shared_isotropic(std::move(mix.means), variance);
      if (s.mixture.dim != dim)
        throw std::invalid_argument("means do not match the declared dim");
    }
  } else {
    if (j.contains("variances"))
      throw std::invalid_argument("variances need explicit means");
    const double radius = j.contains("mean_radius")
                              ? require_double(j.at("mean_radius"), "mean_radius")
                              : 2.0;
    const double variance =
        j.contains("variance") ? require_double(j.at("variance"), "variance")
                               : 1.0;
    s.mixture = circle_mixture(s.profile.k, dim, radius, variance);
  }
  config.synthetic = std::move(s);
}

json dataset_to_json(const ExperimentConfig& config) {
  json j;
  if (config.synthetic) {
    const SyntheticSpec& s = *config.synthetic;
    j["type"] = "synthetic";
    j["k"] = s.profile.k;
    j["n_max"] = s.profile.n_max;
    j["imbalance_factor"] = s.profile.imbalance_factor;
    j["dim"] = s.mixture.dim;
    j["test_per_class"] = s.test_per_class;
    j["means"] = s.mixture.means;
    j["variances"] = s.mixture.variances;
  } else {
    j["type"] = "csv";
    j["train"] = config.csv->train_path;
    j["test"] = config.csv->test_path;
    j["has_header"] = config.csv->has_header;
  }
  return j;
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["dataset"] = dataset_to_json(config);
  json loss;
  loss["kind"] = loss_kind_name(config.loss.kind);
  loss["tau"] = config.loss.tau;
  if (config.loss.class_weights) loss["class_weights"] = *config.loss.class_weights;
  j["loss"] = loss;
  json sampler;
  sampler["kind"] = sampler_kind_name(config.sampler);
  sampler["rf_threshold"] = config.rf_threshold;
  j["sampler"] = sampler;
  j["train"] = train_to_json(config.train);
  if (config.decouple) {
    json d;
    d["method"] = decouple_method_name(config.decouple->method);
    d["stage2"] = train_to_json(config.decouple->stage2);
    j["decouple"] = d;
  }
  json ev;
  ev["rare_max"] = config.eval.groups.rare_max;
  ev["common_max"] = config.eval.groups.common_max;
  ev["marginal_mode"] = marginal_mode_name(config.eval.marginal_mode);
  ev["posthoc_convert"] = config.eval.posthoc_convert;
  j["eval"] = ev;
  j["output_dir"] = config.output_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  expect_keys(j, "config",
              {"dataset", "loss", "sampler", "train", "decouple", "eval",
               "output_dir"});
  if (!j.contains("dataset"))
    throw std::invalid_argument("config needs a 'dataset' section");

  ExperimentConfig config;
  dataset_from_json(j.at("dataset"), config);

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    expect_keys(l, "loss", {"kind", "tau", "class_weights"});
    if (l.contains("kind"))
      config.loss.kind = loss_kind_from_name(require_string(l.at("kind"), "loss.kind"));
    if (l.contains("tau")) config.loss.tau = require_double(l.at("tau"), "tau");
    if (l.contains("class_weights"))
      config.loss.class_weights =
          l.at("class_weights").get<std::vector<double>>();
  }
  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    expect_keys(s, "sampler", {"kind", "rf_threshold"});
    if (s.contains("kind"))
      config.sampler =
          sampler_kind_from_name(require_string(s.at("kind"), "sampler.kind"));
    if (s.contains("rf_threshold"))
      config.rf_threshold = require_double(s.at("rf_threshold"), "rf_threshold");
  }
  if (j.contains("train"))
    config.train = train_from_json(j.at("train"), "train", TrainConfig{});
  if (j.contains("decouple") && !j.at("decouple").is_null()) {
    const json& d = j.at("decouple");
    expect_keys(d, "decouple", {"method", "stage2"});
    if (!d.contains("method"))
      throw std::invalid_argument("decouple needs a 'method' (crt or lws)");
    DecoupleSpec spec;
    spec.method =
        decouple_method_from_name(require_string(d.at("method"), "decouple.method"));
    TrainConfig stage2_defaults = config.train;
    stage2_defaults.epochs = std::max<std::size_t>(1, config.train.epochs / 2);
    spec.stage2 = d.contains("stage2")
                      ? train_from_json(d.at("stage2"), "stage2", stage2_defaults)
                      : stage2_defaults;
    config.decouple = std::move(spec);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    expect_keys(e, "eval",
                {"rare_max", "common_max", "marginal_mode", "posthoc_convert"});
    if (e.contains("rare_max"))
      config.eval.groups.rare_max =
          static_cast<std::int64_t>(require_uint(e.at("rare_max"), "rare_max"));
    if (e.contains("common_max"))
      config.eval.groups.common_max = static_cast<std::int64_t>(
          require_uint(e.at("common_max"), "common_max"));
    if (e.contains("marginal_mode"))
      config.eval.marginal_mode = marginal_mode_from_name(
          require_string(e.at("marginal_mode"), "marginal_mode"));
    if (e.contains("posthoc_convert"))
      config.eval.posthoc_convert = e.at("posthoc_convert").get<bool>();
  }
  if (j.contains("output_dir"))
    config.output_dir = require_string(j.at("output_dir"), "output_dir");

  config.validate();
  return config;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_compact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool parse_double_strict(const std::string& token, double& out) {
  if (token.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(token.c_str(), &end);
  return errno == 0 && end == token.c_str() + token.size();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig config_from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::string config_to_json_text(const ExperimentConfig& config) {
  return config_to_json(config).dump(2);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

// ---------------------------------------------------------------------------
// Data materialization
// ---------------------------------------------------------------------------

namespace {

CsvSchema schema_for(const fs::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv " + path.string());
  std::string first;
  if (!std::getline(in, first))
    throw std::invalid_argument("empty csv " + path.string());
  const std::size_t fields =
      1 + static_cast<std::size_t>(std::count(first.begin(), first.end(), ','));
  if (fields < 2)
    throw std::invalid_argument("csv needs at least one feature column: " +
                                path.string());
  CsvSchema schema;
  schema.feature_cols.resize(fields - 1);
  std::iota(schema.feature_cols.begin(), schema.feature_cols.end(),
            std::size_t{0});
  schema.label_col = fields - 1;
  schema.has_header = has_header;
  return schema;
}

}  // namespace

DataBundle materialize_data(const ExperimentConfig& config) {
  config.validate();
  if (config.synthetic) {
    const SyntheticSpec& s = *config.synthetic;
    ClassCounts train_counts = longtail_counts(s.profile);
    ClassCounts test_counts = ClassCounts::from_counts(
        std::vector<std::int64_t>(s.profile.k, s.test_per_class));
    const Rng master(config.train.seed);
    Rng train_rng = master.split(rng_stream::kTrainData);
    Rng test_rng = master.split(rng_stream::kTestData);
    DataBundle bundle{
        synthesize_gaussian(s.mixture, train_counts, train_rng),
        synthesize_gaussian(s.mixture, test_counts, test_rng)};
    return bundle;
  }
  const CsvDatasetSpec& c = *config.csv;
  DataBundle bundle{
      load_csv(c.train_path, schema_for(c.train_path, c.has_header)),
      load_csv(c.test_path, schema_for(c.test_path, c.has_header))};
  if (bundle.train.dim() != bundle.test.dim())
    throw std::invalid_argument("train/test feature dimension mismatch");
  if (bundle.train.k() != bundle.test.k())
    throw std::invalid_argument("train/test class count mismatch");
  return bundle;
}

ClassCounts train_counts_for(const ExperimentConfig& config) {
  config.validate();
  if (config.synthetic) return longtail_counts(config.synthetic->profile);
  const CsvDatasetSpec& c = *config.csv;
  return load_csv(c.train_path, schema_for(c.train_path, c.has_header)).counts;
}

LossSpec resolve_loss(const LossSpec& spec, const ClassCounts& counts) {
  LossSpec out = spec;
  if (out.kind == LossKind::cbw_softmax_ce && !out.class_weights)
    out.class_weights = cbw_weights(counts);
  return out;
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

namespace {

void write_trace(const TrainTrace& trace, const fs::path& path) {
  std::ofstream out = open_out(path);
  const bool with_accuracy = !trace.epoch_balanced_accuracy.empty();
  out << (with_accuracy ? "epoch,mean_loss,balanced_accuracy\n"
                        : "epoch,mean_loss\n");
  for (std::size_t e = 0; e < trace.epoch_mean_loss.size(); ++e) {
    out << e << ',' << fmt_double(trace.epoch_mean_loss[e]);
    if (with_accuracy) out << ',' << fmt_double(trace.epoch_balanced_accuracy[e]);
    out << '\n';
  }
}

using MetricList = std::vector<std::pair<std::string, std::string>>;

void write_metric_file(const MetricList& kv, const fs::path& path) {
  std::ofstream out = open_out(path);
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
}

MetricList metrics_for(const ExperimentConfig& config, const EvalReport& report,
                       std::optional<double> final_train_loss,
                       std::optional<double> stage1_balanced) {
  MetricList kv;
  kv.emplace_back("dataset", config.synthetic ? "synthetic" : "csv");
  kv.emplace_back("k", std::to_string(report.per_class_accuracy.size()));
  if (config.synthetic)
    kv.emplace_back("imbalance_factor",
                    fmt_double(config.synthetic->profile.imbalance_factor));
  kv.emplace_back("loss", loss_kind_name(config.loss.kind));
  kv.emplace_back("tau", fmt_double(config.loss.tau));
  kv.emplace_back("sampler", sampler_kind_name(config.sampler));
  kv.emplace_back("seed", std::to_string(config.train.seed));
  kv.emplace_back("epochs", std::to_string(config.train.epochs));
  kv.emplace_back("model", config.train.hidden_dim ? "mlp" : "linear");
  kv.emplace_back("decouple", config.decouple
                                  ? decouple_method_name(config.decouple->method)
                                  : "none");
  if (final_train_loss)
    kv.emplace_back("final_train_loss", fmt_double(*final_train_loss));
  if (stage1_balanced)
    kv.emplace_back("stage1_balanced_accuracy", fmt_double(*stage1_balanced));
  kv.emplace_back("overall_accuracy", fmt_double(report.overall_accuracy));
  kv.emplace_back("balanced_accuracy", fmt_double(report.balanced_accuracy));
  for (std::size_t j = 0; j < report.per_class_accuracy.size(); ++j)
    kv.emplace_back("per_class_accuracy." + std::to_string(j),
                    fmt_double(report.per_class_accuracy[j]));
  for (const char* name : {"frequent", "common", "rare"}) {
    auto it = report.group_accuracy.find(name);
    if (it != report.group_accuracy.end())
      kv.emplace_back(std::string("group_accuracy.") + name,
                      fmt_double(it->second));
  }
  for (std::size_t j = 0; j < report.marginal_likelihood.size(); ++j)
    kv.emplace_back("marginal_likelihood." + std::to_string(j),
                    fmt_double(report.marginal_likelihood[j]));
  kv.emplace_back("uniform_kl", fmt_double(report.uniform_kl));
  return kv;
}

EvalOptions eval_options_for(const ExperimentConfig& config,
                             const ClassCounts& train_counts) {
  EvalOptions opts;
  opts.marginal_mode = config.eval.marginal_mode;
  opts.posthoc_convert = config.eval.posthoc_convert;
  if (opts.posthoc_convert) opts.train_counts = train_counts;
  return opts;
}

void print_summary(const char* verb, const ExperimentConfig& config,
                   const EvalReport& report) {
  std::printf("[ltlab %s] loss=%s sampler=%s seed=%llu balanced_accuracy=%.4f"
              " overall=%.4f uniform_kl=%.5f out=%s\n",
              verb, loss_kind_name(config.loss.kind),
              sampler_kind_name(config.sampler),
              static_cast<unsigned long long>(config.train.seed),
              report.balanced_accuracy, report.overall_accuracy,
              report.uniform_kl,
              config.output_dir.empty() ? "-" : config.output_dir.c_str());
}

}  // namespace

void emit_py_curve(const EvalReport& report, const ClassCounts& train_counts,
                   const fs::path& path) {
  if (report.marginal_likelihood.size() != train_counts.k())
    throw std::invalid_argument("report and train counts disagree on k");
  std::vector<std::size_t> order(train_counts.k());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return train_counts.counts[a] > train_counts.counts[b];
                   });
  std::ofstream out = open_out(path);
  out << "class_index,train_count,marginal_likelihood\n";
  for (std::size_t j : order)
    out << j << ',' << train_counts.counts[j] << ','
        << fmt_double(report.marginal_likelihood[j]) << '\n';
}

std::map<std::string, std::string> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open metrics " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("malformed metrics line " +
                                  std::to_string(lineno) + " in " +
                                  path.string());
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

void convert_predictions_file(const fs::path& in_path, const fs::path& out_path,
                              const ClassCounts& counts) {
  std::ifstream in(in_path);
  if (!in)
    throw std::invalid_argument("cannot open predictions " + in_path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool maybe_header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (!parse_double_strict(fields[i], row[i])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      if (maybe_header) {  // a single leading header row is allowed
        maybe_header = false;
        continue;
      }
      throw std::invalid_argument("malformed predictions row " +
                                  std::to_string(lineno));
    }
    maybe_header = false;
    if (row.size() != counts.k())
      throw std::invalid_argument(
          "predictions row " + std::to_string(lineno) + " has " +
          std::to_string(row.size()) + " columns, expected " +
          std::to_string(counts.k()));
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw std::invalid_argument("no prediction rows in " + in_path.string());

  std::ofstream out = open_out(out_path);
  for (std::size_t j = 0; j < counts.k(); ++j)
    out << (j ? ",p" : "p") << j;
  out << '\n';
  for (auto& row : rows) {
    PosteriorVector converted =
        posterior_train_to_balanced(PosteriorVector{std::move(row)}, counts);
    for (std::size_t j = 0; j < converted.probs.size(); ++j)
      out << (j ? "," : "") << fmt_double(converted.probs[j]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

EvalReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.output_dir.empty())
    throw std::invalid_argument("output directory not set");
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  open_out(dir / "config.json") << config_to_json_text(config) << '\n';

  const DataBundle data = materialize_data(config);
  const LossSpec loss = resolve_loss(config.loss, data.train.counts);
  const SamplerPlan plan =
      make_sampler_plan(config.sampler, data.train, config.rf_threshold);

  TrainResult stage1;
  try {
    stage1 = train(data.train, loss, plan, config.train);
  } catch (const DivergenceError& e) {
    write_trace(e.partial_trace, dir / "trace.csv");
    throw;
  }

  const std::vector<Group> groups =
      group_classes(data.train.counts, config.eval.groups);
  const EvalOptions opts = eval_options_for(config, data.train.counts);

  ModelParams final_params = stage1.params;
  std::optional<double> stage1_balanced;
  if (config.decouple) {
    stage1_balanced =
        evaluate(stage1.params, loss, data.test, groups, opts).balanced_accuracy;
    try {
      final_params =
          config.decouple->method == DecoupleMethod::crt
              ? crt_retrain(stage1.params, data.train, loss,
                            config.decouple->stage2)
              : lws_retrain(stage1.params, data.train, loss,
                            config.decouple->stage2);
    } catch (const DivergenceError&) {
      write_trace(stage1.trace, dir / "trace.csv");
      throw;
    }
  }

  const EvalReport report = evaluate(final_params, loss, data.test, groups, opts);

  write_trace(stage1.trace, dir / "trace.csv");
  emit_py_curve(report, data.train.counts, dir / "py_curve.csv");
  save_checkpoint(final_params, dir / "model.ckpt");
  std::optional<double> final_loss;
  if (!stage1.trace.epoch_mean_loss.empty())
    final_loss = stage1.trace.epoch_mean_loss.back();
  write_metric_file(metrics_for(config, report, final_loss, stage1_balanced),
                    dir / "metrics.txt");

  print_summary("run", config, report);
  return report;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& config,
                               const fs::path& checkpoint) {
  config.validate();
  const DataBundle data = materialize_data(config);
  const ModelParams params = load_checkpoint(checkpoint);
  if (params.input_dim() != data.test.dim() ||
      params.output_dim() != data.test.k())
    throw std::invalid_argument(
        "checkpoint shape does not match the configured dataset");
  const LossSpec loss = resolve_loss(config.loss, data.train.counts);
  const std::vector<Group> groups =
      group_classes(data.train.counts, config.eval.groups);
  const EvalReport report = evaluate(params, loss, data.test, groups,
                                     eval_options_for(config, data.train.counts));
  if (!config.output_dir.empty()) {
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    write_metric_file(metrics_for(config, report, std::nullopt, std::nullopt),
                      dir / "metrics.txt");
    emit_py_curve(report, data.train.counts, dir / "py_curve.csv");
  }
  print_summary("eval", config, report);
  return report;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base,
                                 const SweepAxis& axis,
                                 const std::string& out_dir) {
  base.validate();
  if (!base.synthetic)
    throw std::invalid_argument(
        "sweep varies the imbalance factor and needs a synthetic dataset");
  if (axis.imbalance_factors.empty() || axis.losses.empty() ||
      axis.seeds.empty())
    throw std::invalid_argument(
        "sweep axis must list imbalance factors, losses, and seeds");
  if (out_dir.empty()) throw std::invalid_argument("output directory not set");
  fs::create_directories(out_dir);

  std::vector<double> factors = axis.imbalance_factors;
  std::sort(factors.begin(), factors.end(), std::greater<>());

  std::vector<SweepCell> cells;
  for (double imbalance : factors) {
    for (const LossSpec& loss : axis.losses) {
      SweepCell cell;
      cell.imbalance_factor = imbalance;
      cell.loss = loss;
      std::vector<double> accuracies;
      for (std::uint64_t seed : axis.seeds) {
        ExperimentConfig c = base;
        c.synthetic->profile.imbalance_factor = imbalance;
        c.loss = loss;
        c.train.seed = seed;
        if (c.decouple) c.decouple->stage2.seed = seed;
        c.output_dir =
            (fs::path(out_dir) / "cells" /
             ("if" + fmt_compact(imbalance) + "_" + loss_kind_name(loss.kind) +
              "_seed" + std::to_string(seed)))
                .string();
        try {
          accuracies.push_back(run_experiment(c).balanced_accuracy);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
          break;
        }
      }
      cell.runs = accuracies.size();
      if (!accuracies.empty()) {
        const double mean =
            std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
            static_cast<double>(accuracies.size());
        double var = 0.0;
        for (double a : accuracies) var += (a - mean) * (a - mean);
        var /= static_cast<double>(accuracies.size());
        cell.mean_balanced_accuracy = mean;
        cell.stddev_balanced_accuracy = std::sqrt(var);
      }
      cells.push_back(std::move(cell));
    }
  }

  std::ofstream out = open_out(fs::path(out_dir) / "sweep.csv");
  out << "imbalance_factor,loss,tau,runs,balanced_accuracy_mean,"
         "balanced_accuracy_stddev,status\n";
  for (const SweepCell& cell : cells) {
    out << fmt_double(cell.imbalance_factor) << ','
        << loss_kind_name(cell.loss.kind) << ',' << fmt_double(cell.loss.tau)
        << ',' << cell.runs << ',';
    if (cell.failed)
      out << ",,failed\n";
    else
      out << fmt_double(cell.mean_balanced_accuracy) << ','
          << fmt_double(cell.stddev_balanced_accuracy) << ",ok\n";
  }
  return cells;
}

}  // namespace ltlab
