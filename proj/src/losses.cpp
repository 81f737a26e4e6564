#include "ltlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ltlab {

ClassCounts ClassCounts::from_counts(std::vector<std::int64_t> c,
                                     bool min_count_floor) {
  if (c.size() < 2) throw std::invalid_argument("ClassCounts requires k >= 2");
  std::int64_t total = 0;
  for (auto& v : c) {
    if (v < 1) {
      if (min_count_floor && v == 0) {
        v = 1;
      } else {
        throw std::invalid_argument("ClassCounts requires every n_j >= 1");
      }
    }
    total += v;
  }
  ClassCounts out;
  out.counts = std::move(c);
  out.total = total;
  return out;
}

bool ClassCounts::all_equal() const {
  for (std::size_t j = 1; j < counts.size(); ++j)
    if (counts[j] != counts[0]) return false;
  return true;
}

std::vector<double> ClassCounts::log_counts() const {
  std::vector<double> out(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j)
    out[j] = std::log(static_cast<double>(counts[j]));
  return out;
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::softmax_ce: return "softmax_ce";
    case LossKind::balanced_softmax: return "balanced_softmax";
    case LossKind::multi_binary_sigmoid: return "multi_binary_sigmoid";
    case LossKind::balanced_sigmoid: return "balanced_sigmoid";
    case LossKind::cbw_softmax_ce: return "cbw_softmax_ce";
  }
  throw std::logic_error("unreachable loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "softmax_ce") return LossKind::softmax_ce;
  if (name == "balanced_softmax") return LossKind::balanced_softmax;
  if (name == "multi_binary_sigmoid") return LossKind::multi_binary_sigmoid;
  if (name == "balanced_sigmoid") return LossKind::balanced_sigmoid;
  if (name == "cbw_softmax_ce") return LossKind::cbw_softmax_ce;
  throw std::invalid_argument("unknown loss kind: " + name);
}

void LossSpec::validate(std::size_t k) const {
  if (!(tau > 0.0)) throw std::invalid_argument("LossSpec tau must be positive");
  if (kind == LossKind::cbw_softmax_ce) {
    if (!class_weights)
      throw std::invalid_argument("cbw_softmax_ce requires class_weights");
  }
  if (class_weights) {
    if (class_weights->size() != k)
      throw std::invalid_argument("class_weights length must equal k");
    for (double w : *class_weights)
      if (!(w > 0.0)) throw std::invalid_argument("class_weights must be positive");
  }
}

namespace {

void check_logits(std::span<const double> logits) {
  if (logits.size() < 2) throw std::invalid_argument("need at least 2 logits");
  for (double v : logits)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite logit");
}

void check_label(std::size_t label, std::size_t k) {
  if (label >= k) throw std::invalid_argument("label out of range");
}

void check_dims(std::span<const double> logits, const ClassCounts& counts) {
  if (logits.size() != counts.k())
    throw std::invalid_argument("logits/counts dimension mismatch");
}

// logits + tau*log(n_j); identically the input when counts are all equal,
// since the constant shift cancels inside the softmax.
std::vector<double> shifted_logits(std::span<const double> logits,
                                   const ClassCounts& counts, double tau) {
  std::vector<double> s(logits.begin(), logits.end());
  if (counts.all_equal()) return s;
  for (std::size_t j = 0; j < s.size(); ++j)
    s[j] += tau * std::log(static_cast<double>(counts.counts[j]));
  return s;
}

}  // namespace

PosteriorVector softmax_probs(std::span<const double> logits) {
  check_logits(logits);
  double lse = log_sum_exp(logits);
  PosteriorVector out;
  out.probs.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    out.probs[j] = std::exp(logits[j] - lse);
  return out;
}

PosteriorVector balanced_softmax_probs(std::span<const double> logits,
                                       const ClassCounts& counts, double tau) {
  check_dims(logits, counts);
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  auto s = shifted_logits(logits, counts, tau);
  return softmax_probs(s);
}

double balanced_softmax_loss(std::span<const double> logits, std::size_t label,
                             const ClassCounts& counts, double tau) {
  check_dims(logits, counts);
  check_label(label, counts.k());
  auto s = shifted_logits(logits, counts, tau);
  check_logits(s);
  return log_sum_exp(s) - s[label];
}

std::vector<double> balanced_softmax_grad(std::span<const double> logits,
                                          std::size_t label,
                                          const ClassCounts& counts, double tau) {
  check_label(label, counts.k());
  auto probs = balanced_softmax_probs(logits, counts, tau).probs;
  probs[label] -= 1.0;
  return probs;
}

double softmax_ce_loss(std::span<const double> logits, std::size_t label) {
  check_logits(logits);
  check_label(label, logits.size());
  return log_sum_exp(logits) - logits[label];
}

std::vector<double> softmax_ce_grad(std::span<const double> logits,
                                    std::size_t label) {
  check_label(label, logits.size());
  auto probs = softmax_probs(logits).probs;
  probs[label] -= 1.0;
  return probs;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double multi_binary_logistic_loss(std::span<const double> logits,
                                  std::size_t label) {
  check_logits(logits);
  check_label(label, logits.size());
  // -log sigma(eta_y) = softplus(-eta_y); -log(1 - sigma(eta_j)) = softplus(eta_j)
  double acc = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j)
    acc += (j == label) ? softplus(-logits[j]) : softplus(logits[j]);
  return acc;
}

std::vector<double> multi_binary_logistic_grad(std::span<const double> logits,
                                               std::size_t label) {
  check_logits(logits);
  check_label(label, logits.size());
  std::vector<double> g(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    g[j] = stable_sigmoid(logits[j]) - (j == label ? 1.0 : 0.0);
  return g;
}

std::vector<double> balanced_sigmoid_offsets(const ClassCounts& counts) {
  const double n = static_cast<double>(counts.n());
  const double k = static_cast<double>(counts.k());
  const double mean_count = n / k;
  std::vector<double> off(counts.k());
  for (std::size_t j = 0; j < counts.k(); ++j) {
    const double nj = static_cast<double>(counts.counts[j]);
    if (!(nj < n)) throw std::invalid_argument("degenerate counts");
    off[j] = std::log((mean_count / nj) * ((n - nj) / (n - mean_count)));
  }
  return off;
}

double balanced_sigmoid_loss(std::span<const double> logits, std::size_t label,
                             const ClassCounts& counts) {
  check_dims(logits, counts);
  auto off = balanced_sigmoid_offsets(counts);
  std::vector<double> s(logits.begin(), logits.end());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] -= off[j];
  return multi_binary_logistic_loss(s, label);
}

std::vector<double> balanced_sigmoid_grad(std::span<const double> logits,
                                          std::size_t label,
                                          const ClassCounts& counts) {
  check_dims(logits, counts);
  auto off = balanced_sigmoid_offsets(counts);
  std::vector<double> s(logits.begin(), logits.end());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] -= off[j];
  return multi_binary_logistic_grad(s, label);
}

PosteriorVector posterior_balanced_to_train(const PosteriorVector& phi,
                                            const ClassCounts& counts) {
  if (phi.k() != counts.k())
    throw std::invalid_argument("posterior/counts dimension mismatch");
  PosteriorVector out;
  out.probs.resize(phi.k());
  double denom = 0.0;
  for (std::size_t j = 0; j < phi.k(); ++j) {
    out.probs[j] = static_cast<double>(counts.counts[j]) * phi.probs[j];
    denom += out.probs[j];
  }
  if (!(denom > 0.0)) throw std::invalid_argument("zero-sum denominator");
  for (double& p : out.probs) p /= denom;
  return out;
}

PosteriorVector posterior_train_to_balanced(const PosteriorVector& phi_hat,
                                            const ClassCounts& counts) {
  if (phi_hat.k() != counts.k())
    throw std::invalid_argument("posterior/counts dimension mismatch");
  PosteriorVector out;
  out.probs.resize(phi_hat.k());
  double denom = 0.0;
  for (std::size_t j = 0; j < phi_hat.k(); ++j) {
    out.probs[j] = phi_hat.probs[j] / static_cast<double>(counts.counts[j]);
    denom += out.probs[j];
  }
  if (!(denom > 0.0)) throw std::invalid_argument("zero-sum denominator");
  for (double& p : out.probs) p /= denom;
  return out;
}

std::vector<double> cbw_weights(const ClassCounts& counts, CbwScheme scheme) {
  if (scheme != CbwScheme::inverse_frequency)
    throw std::invalid_argument("unknown CBW scheme");
  const double n = static_cast<double>(counts.n());
  const double k = static_cast<double>(counts.k());
  std::vector<double> w(counts.k());
  for (std::size_t j = 0; j < counts.k(); ++j)
    w[j] = n / (k * static_cast<double>(counts.counts[j]));
  return w;
}

std::size_t argmax_prediction(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  return best;
}

double loss_value(const LossSpec& spec, std::span<const double> logits,
                  std::size_t label, const ClassCounts& counts) {
  spec.validate(counts.k());
  switch (spec.kind) {
    case LossKind::softmax_ce:
      return softmax_ce_loss(logits, label);
    case LossKind::balanced_softmax:
      return balanced_softmax_loss(logits, label, counts, spec.tau);
    case LossKind::multi_binary_sigmoid:
      return multi_binary_logistic_loss(logits, label);
    case LossKind::balanced_sigmoid:
      return balanced_sigmoid_loss(logits, label, counts);
    case LossKind::cbw_softmax_ce:
      check_label(label, counts.k());
      return (*spec.class_weights)[label] * softmax_ce_loss(logits, label);
  }
  throw std::logic_error("unreachable loss kind");
}

std::vector<double> loss_grad(const LossSpec& spec, std::span<const double> logits,
                              std::size_t label, const ClassCounts& counts) {
  spec.validate(counts.k());
  switch (spec.kind) {
    case LossKind::softmax_ce:
      return softmax_ce_grad(logits, label);
    case LossKind::balanced_softmax:
      return balanced_softmax_grad(logits, label, counts, spec.tau);
    case LossKind::multi_binary_sigmoid:
      return multi_binary_logistic_grad(logits, label);
    case LossKind::balanced_sigmoid:
      return balanced_sigmoid_grad(logits, label, counts);
    case LossKind::cbw_softmax_ce: {
      check_label(label, counts.k());
      auto g = softmax_ce_grad(logits, label);
      for (double& v : g) v *= (*spec.class_weights)[label];
      return g;
    }
  }
  throw std::logic_error("unreachable loss kind");
}

}  // namespace ltlab
