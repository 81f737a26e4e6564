#include "ltlab/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ltlab {

ClassCounts longtail_counts(const LongTailProfile& profile) {
  if (profile.k < 2) throw std::invalid_argument("profile needs k >= 2");
  if (profile.n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (!(profile.imbalance_factor >= 1.0))
    throw std::invalid_argument("imbalance factor must be >= 1");

  const double n_max = static_cast<double>(profile.n_max);
  const double km1 = static_cast<double>(profile.k - 1);
  std::vector<std::int64_t> counts(profile.k);
  for (std::size_t j = 0; j < profile.k; ++j) {
    double raw;
    if (j == 0) {
      raw = n_max;
    } else if (j == profile.k - 1) {
      raw = n_max / profile.imbalance_factor;  // endpoint pinned to n_max/IF
    } else {
      raw = n_max * std::pow(profile.imbalance_factor,
                             -static_cast<double>(j) / km1);
    }
    std::int64_t c = std::llround(raw);
    if (j == profile.k - 1 && c < 1)
      throw std::invalid_argument("smallest class rounds to 0");
    counts[j] = std::max<std::int64_t>(1, c);
  }
  return ClassCounts::from_counts(std::move(counts));
}

GaussianMixtureSpec GaussianMixtureSpec::shared_isotropic(
    std::vector<std::vector<double>> means, double variance) {
  GaussianMixtureSpec spec;
  if (means.empty()) throw std::invalid_argument("mixture needs at least one mean");
  spec.dim = means[0].size();
  spec.means = std::move(means);
  spec.variances.assign(spec.means.size(), std::vector<double>(spec.dim, variance));
  spec.validate();
  return spec;
}

void GaussianMixtureSpec::validate() const {
  if (means.empty() || dim == 0)
    throw std::invalid_argument("mixture spec is empty");
  if (variances.size() != means.size())
    throw std::invalid_argument("means/variances count mismatch");
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (means[j].size() != dim || variances[j].size() != dim)
      throw std::invalid_argument("mixture dimension mismatch");
    for (double v : variances[j])
      if (!(v > 0.0)) throw std::invalid_argument("variances must be positive");
  }
}

GaussianMixtureSpec circle_mixture(std::size_t k, std::size_t dim,
                                   double radius, double variance) {
  if (k < 2) throw std::invalid_argument("mixture needs at least two components");
  if (dim < 2) throw std::invalid_argument("circle layout needs dim >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  std::vector<std::vector<double>> means(k, std::vector<double>(dim, 0.0));
  const double step = 2.0 * std::numbers::pi / static_cast<double>(k);
  for (std::size_t j = 0; j < k; ++j) {
    means[j][0] = radius * std::cos(step * static_cast<double>(j));
    means[j][1] = radius * std::sin(step * static_cast<double>(j));
  }
  return GaussianMixtureSpec::shared_isotropic(std::move(means), variance);
}

Dataset Dataset::from_parts(Matrix features, std::vector<std::size_t> labels,
                            std::size_t k) {
  if (features.rows != labels.size())
    throw std::invalid_argument("feature rows and label count differ");
  std::vector<std::int64_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k)
      throw std::invalid_argument("label out of range at row " + std::to_string(i));
    ++counts[labels[i]];
  }
  Dataset d;
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.counts = ClassCounts::from_counts(std::move(counts));  // rejects empty classes
  return d;
}

Dataset synthesize_gaussian(const GaussianMixtureSpec& spec,
                            const ClassCounts& counts, Rng& rng, bool shuffle) {
  spec.validate();
  if (spec.k() != counts.k())
    throw std::invalid_argument("mixture/counts dimension mismatch");

  const std::size_t total = static_cast<std::size_t>(counts.n());
  Matrix features(total, spec.dim);
  std::vector<std::size_t> labels(total);
  std::size_t row = 0;
  for (std::size_t j = 0; j < spec.k(); ++j) {
    for (std::int64_t s = 0; s < counts.counts[j]; ++s, ++row) {
      labels[row] = j;
      for (std::size_t d = 0; d < spec.dim; ++d) {
        features.at(row, d) =
            spec.means[j][d] + std::sqrt(spec.variances[j][d]) * rng.normal();
      }
    }
  }

  if (shuffle) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Matrix shuffled(total, spec.dim);
    std::vector<std::size_t> shuffled_labels(total);
    for (std::size_t i = 0; i < total; ++i) {
      shuffled_labels[i] = labels[order[i]];
      for (std::size_t d = 0; d < spec.dim; ++d)
        shuffled.at(i, d) = features.at(order[i], d);
    }
    features = std::move(shuffled);
    labels = std::move(shuffled_labels);
  }
  return Dataset::from_parts(std::move(features), std::move(labels), spec.k());
}

PosteriorVector bayes_posterior(const GaussianMixtureSpec& spec,
                                std::span<const double> prior,
                                std::span<const double> x) {
  spec.validate();
  if (prior.size() != spec.k())
    throw std::invalid_argument("prior/mixture dimension mismatch");
  if (x.size() != spec.dim)
    throw std::invalid_argument("point/mixture dimension mismatch");
  double prior_sum = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw std::invalid_argument("prior entries must be >= 0");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9)
    throw std::invalid_argument("prior must sum to 1");

  constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
  std::vector<double> log_post(spec.k());
  for (std::size_t j = 0; j < spec.k(); ++j) {
    if (prior[j] == 0.0) {
      log_post[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double ll = std::log(prior[j]);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const double var = spec.variances[j][d];
      const double diff = x[d] - spec.means[j][d];
      ll += -0.5 * (kLog2Pi + std::log(var)) - diff * diff / (2.0 * var);
    }
    log_post[j] = ll;
  }

  // Normalize in log space; -inf entries (zero prior) stay exactly zero.
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_post) m = std::max(m, v);
  if (std::isinf(m)) throw std::invalid_argument("prior must sum to 1");
  PosteriorVector out;
  out.probs.resize(spec.k());
  double denom = 0.0;
  for (std::size_t j = 0; j < spec.k(); ++j) {
    out.probs[j] = std::isinf(log_post[j]) ? 0.0 : std::exp(log_post[j] - m);
    denom += out.probs[j];
  }
  for (double& p : out.probs) p /= denom;
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

double parse_double_or_throw(const std::string& s, std::size_t row) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size())
    throw std::runtime_error("malformed row " + std::to_string(row) +
                             ": bad numeric field '" + s + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  if (schema.feature_cols.empty())
    throw std::invalid_argument("schema needs at least one feature column");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (schema.has_header && !skipped_header) {
      skipped_header = true;
      continue;
    }
    auto fields = split_csv_line(line);
    std::size_t needed = schema.label_col;
    for (std::size_t c : schema.feature_cols) needed = std::max(needed, c);
    if (fields.size() <= needed)
      throw std::runtime_error("malformed row " + std::to_string(line_no) +
                               ": expected at least " + std::to_string(needed + 1) +
                               " fields, got " + std::to_string(fields.size()));
    std::vector<double> feats(schema.feature_cols.size());
    for (std::size_t c = 0; c < schema.feature_cols.size(); ++c)
      feats[c] = parse_double_or_throw(fields[schema.feature_cols[c]], line_no);
    rows.push_back(std::move(feats));
    raw_labels.push_back(fields[schema.label_col]);
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path.string());

  // Integer labels index classes directly; otherwise map symbols in
  // first-appearance order (or against the supplied vocabulary).
  std::vector<std::size_t> labels(raw_labels.size());
  std::size_t k = 0;
  bool all_int = true;
  std::vector<std::int64_t> int_labels(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    if (!parse_int(raw_labels[i], int_labels[i]) || int_labels[i] < 0) {
      all_int = false;
      break;
    }
  }
  if (all_int && !schema.label_vocabulary) {
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      labels[i] = static_cast<std::size_t>(int_labels[i]);
      k = std::max(k, labels[i] + 1);
    }
  } else {
    std::vector<std::string> vocab =
        schema.label_vocabulary ? *schema.label_vocabulary
                                : std::vector<std::string>{};
    const bool fixed_vocab = schema.label_vocabulary.has_value();
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      auto it = std::find(vocab.begin(), vocab.end(), raw_labels[i]);
      if (it == vocab.end()) {
        if (fixed_vocab)
          throw std::runtime_error("unknown label symbol '" + raw_labels[i] +
                                   "' at data row " + std::to_string(i + 1));
        vocab.push_back(raw_labels[i]);
        it = vocab.end() - 1;
      }
      labels[i] = static_cast<std::size_t>(it - vocab.begin());
    }
    k = vocab.size();
  }

  Matrix features(rows.size(), schema.feature_cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) features.at(i, c) = rows[i][c];
  return Dataset::from_parts(std::move(features), std::move(labels), k);
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               bool header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (header) {
    for (std::size_t c = 0; c < dataset.dim(); ++c) out << "f" << c << ",";
    out << "label\n";
  }
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t c = 0; c < dataset.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.features.at(i, c));
      out << buf << ",";
    }
    out << dataset.labels[i] << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace ltlab
