#include "ltlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ltlab {

void ModelParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rows == 0 || l.weight.cols == 0)
      throw std::invalid_argument("empty layer weight");
    if (l.bias.size() != l.weight.rows)
      throw std::invalid_argument("bias length does not match layer rows");
    if (i > 0 && layers[i - 1].weight.rows != l.weight.cols)
      throw std::invalid_argument("layer shapes do not chain");
  }
  if (lws_scales) {
    if (lws_scales->size() != output_dim())
      throw std::invalid_argument("lws_scales length must equal class count");
    for (double s : *lws_scales)
      if (!(s > 0.0)) throw std::invalid_argument("lws_scales must be positive");
  }
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!a.layers[i].weight.same_shape(b.layers[i].weight)) return false;
    if (a.layers[i].weight.data != b.layers[i].weight.data) return false;
    if (a.layers[i].bias != b.layers[i].bias) return false;
  }
  return a.lws_scales == b.lws_scales;
}

double LrSchedule::multiplier_at(std::size_t epoch) const {
  if (kind == LrScheduleKind::constant) return 1.0;
  double m = 1.0;
  for (std::size_t milestone : milestones)
    if (epoch >= milestone) m *= factor;
  return m;
}

void TrainConfig::validate(bool allow_zero_epochs) const {
  if (!allow_zero_epochs && epochs < 1)
    throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0))
    throw std::invalid_argument("weight decay must be >= 0");
}

ModelParams init_params(std::size_t input_dim, std::size_t k,
                        std::optional<std::size_t> hidden_dim, Rng& rng) {
  if (input_dim == 0 || k < 2)
    throw std::invalid_argument("init_params needs input_dim >= 1 and k >= 2");
  auto make_layer = [&rng](std::size_t out, std::size_t in) {
    Layer l;
    l.weight = Matrix(out, in);
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight.data) w = rng.uniform(-a, a);
    l.bias.assign(out, 0.0);
    return l;
  };
  ModelParams params;
  if (hidden_dim) {
    if (*hidden_dim == 0) throw std::invalid_argument("hidden_dim must be >= 1");
    params.layers.push_back(make_layer(*hidden_dim, input_dim));
    params.layers.push_back(make_layer(k, *hidden_dim));
  } else {
    params.layers.push_back(make_layer(k, input_dim));
  }
  return params;
}

namespace {

Matrix affine(const Matrix& x, const Layer& layer) {
  Matrix z = matmul(x, transpose(layer.weight));
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += layer.bias[j];
  return z;
}

Matrix relu(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.data) v = std::max(0.0, v);
  return a;
}

struct ForwardCache {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // relu output per non-final layer
  Matrix logits;             // final output after optional scaling
};

ForwardCache forward_cached(const ModelParams& params, const Matrix& x) {
  ForwardCache cache;
  const Matrix* cur = &x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    cache.pre.push_back(affine(*cur, params.layers[i]));
    if (i + 1 < params.layers.size()) {
      cache.post.push_back(relu(cache.pre.back()));
      cur = &cache.post.back();
    }
  }
  cache.logits = cache.pre.back();
  if (params.lws_scales) {
    for (std::size_t i = 0; i < cache.logits.rows; ++i)
      for (std::size_t j = 0; j < cache.logits.cols; ++j)
        cache.logits.at(i, j) *= (*params.lws_scales)[j];
  }
  return cache;
}

ParamGrads zero_grads_like(const ModelParams& params) {
  ParamGrads g;
  g.layers.reserve(params.layers.size());
  for (const Layer& l : params.layers) {
    Layer zl;
    zl.weight = Matrix(l.weight.rows, l.weight.cols);
    zl.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(zl));
  }
  if (params.lws_scales) g.log_scale_grad.assign(params.lws_scales->size(), 0.0);
  return g;
}

// Mean loss and full analytic gradients for one batch. `first_trainable`
// limits which layers receive gradients (frozen layers keep zeros).
double backprop_batch(const ModelParams& params, const Matrix& x,
                      std::span<const std::size_t> labels, const LossSpec& spec,
                      const ClassCounts& counts, std::size_t first_trainable,
                      bool want_scale_grad, ParamGrads& grads) {
  const std::size_t batch = x.rows;
  const std::size_t k = params.output_dim();
  ForwardCache cache = forward_cached(params, x);

  double loss_sum = 0.0;
  Matrix delta(batch, k);  // d(mean loss)/d(final scaled logits)
  for (std::size_t i = 0; i < batch; ++i) {
    loss_sum += loss_value(spec, cache.logits.row(i), labels[i], counts);
    auto g = loss_grad(spec, cache.logits.row(i), labels[i], counts);
    for (std::size_t j = 0; j < k; ++j)
      delta.at(i, j) = g[j] / static_cast<double>(batch);
  }

  if (params.lws_scales) {
    // d/d log s_j = sum_i delta_ij * z_ij * s_j  (z = pre-scale logit)
    if (want_scale_grad) {
      const Matrix& pre = cache.pre.back();
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < batch; ++i)
          acc += delta.at(i, j) * pre.at(i, j);
        grads.log_scale_grad[j] = acc * (*params.lws_scales)[j];
      }
    }
    // chain through the scaling for upstream layers
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < k; ++j)
        delta.at(i, j) *= (*params.lws_scales)[j];
  }

  // walk layers backwards; stop once everything upstream is frozen
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Matrix& input = (li == 0) ? x : cache.post[li - 1];
    if (li >= first_trainable) {
      Layer& g = grads.layers[li];
      g.weight = matmul(transpose(delta), input);
      for (std::size_t j = 0; j < g.bias.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < batch; ++i) acc += delta.at(i, j);
        g.bias[j] = acc;
      }
    }
    if (li == 0 || li <= first_trainable) break;  // nothing trainable upstream
    // delta for the previous layer: (delta W) masked by relu'
    Matrix prev_delta = matmul(delta, params.layers[li].weight);
    const Matrix& pre_prev = cache.pre[li - 1];
    for (std::size_t i = 0; i < prev_delta.rows; ++i)
      for (std::size_t j = 0; j < prev_delta.cols; ++j)
        if (pre_prev.at(i, j) <= 0.0) prev_delta.at(i, j) = 0.0;
    delta = std::move(prev_delta);
  }

  return loss_sum / static_cast<double>(batch);
}

struct Velocity {
  std::vector<Layer> layers;
  std::vector<double> log_scales;
};

Velocity zero_velocity_like(const ModelParams& params) {
  Velocity v;
  for (const Layer& l : params.layers) {
    Layer zl;
    zl.weight = Matrix(l.weight.rows, l.weight.cols);
    zl.bias.assign(l.bias.size(), 0.0);
    v.layers.push_back(std::move(zl));
  }
  if (params.lws_scales) v.log_scales.assign(params.lws_scales->size(), 0.0);
  return v;
}

double balanced_accuracy_of(const ModelParams& params, const Dataset& data) {
  Matrix logits = forward_logits(params, data.features);
  std::vector<std::size_t> correct(data.k(), 0);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (argmax_prediction(logits.row(i)) == data.labels[i]) ++correct[data.labels[i]];
  double acc = 0.0;
  for (std::size_t j = 0; j < data.k(); ++j)
    acc += static_cast<double>(correct[j]) /
           static_cast<double>(data.counts.counts[j]);
  return acc / static_cast<double>(data.k());
}

// Core SGD loop shared by train / crt_retrain / lws_retrain.
TrainTrace sgd_loop(ModelParams& params, const Dataset& dataset,
                    const LossSpec& loss, const SamplerPlan& plan,
                    const TrainConfig& config, std::size_t first_trainable,
                    bool scales_only, std::uint64_t sampler_stream,
                    const Dataset* validation) {
  loss.validate(dataset.k());
  if (params.input_dim() != dataset.dim() || params.output_dim() != dataset.k())
    throw std::invalid_argument("model shape does not match the dataset");
  Rng sampler_rng = Rng(config.seed).split(sampler_stream);
  Velocity vel = zero_velocity_like(params);
  TrainTrace trace;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * config.lr_schedule.multiplier_at(epoch);
    auto order = epoch_indices(plan, dataset, sampler_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0, b = 0; start < order.size();
         start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t bs = end - start;
      Matrix bx(bs, dataset.dim());
      std::vector<std::size_t> by(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t src = order[start + i];
        by[i] = dataset.labels[src];
        for (std::size_t d = 0; d < dataset.dim(); ++d)
          bx.at(i, d) = dataset.features.at(src, d);
      }

      ParamGrads grads = zero_grads_like(params);
      const std::string where =
          "diverged at epoch " + std::to_string(epoch) + ", batch " +
          std::to_string(b);
      double mean_loss;
      // Saturated models can push weights or logits out of the finite
      // range before the loss itself does; both count as divergence.
      try {
        mean_loss =
            backprop_batch(params, bx, by, loss, dataset.counts,
                           scales_only ? params.layers.size() : first_trainable,
                           /*want_scale_grad=*/scales_only, grads);
      } catch (const std::exception& e) {
        throw DivergenceError(where + " (" + e.what() + ")", trace);
      }
      if (!std::isfinite(mean_loss)) throw DivergenceError(where, trace);
      epoch_loss += mean_loss * static_cast<double>(bs);
      seen += bs;

      if (!scales_only) {
        for (std::size_t li = first_trainable; li < params.layers.size(); ++li) {
          Layer& p = params.layers[li];
          Layer& g = grads.layers[li];
          Layer& v = vel.layers[li];
          for (std::size_t t = 0; t < p.weight.data.size(); ++t) {
            const double grad =
                g.weight.data[t] + config.weight_decay * p.weight.data[t];
            v.weight.data[t] = config.momentum * v.weight.data[t] + grad;
            p.weight.data[t] -= lr * v.weight.data[t];
          }
          for (std::size_t t = 0; t < p.bias.size(); ++t) {
            v.bias[t] = config.momentum * v.bias[t] + g.bias[t];
            p.bias[t] -= lr * v.bias[t];
          }
        }
      }
      if (scales_only && params.lws_scales) {
        auto& scales = *params.lws_scales;
        for (std::size_t j = 0; j < scales.size(); ++j) {
          vel.log_scales[j] =
              config.momentum * vel.log_scales[j] + grads.log_scale_grad[j];
          const double log_s = std::log(scales[j]) - lr * vel.log_scales[j];
          scales[j] = std::exp(log_s);
        }
      }
    }

    trace.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (validation)
      trace.epoch_balanced_accuracy.push_back(
          balanced_accuracy_of(params, *validation));
  }
  return trace;
}

}  // namespace

Matrix forward_logits(const ModelParams& params, const Matrix& features) {
  params.validate();
  if (features.cols != params.input_dim())
    throw std::invalid_argument("feature dimension does not match model");
  return forward_cached(params, features).logits;
}

double batch_loss(const ModelParams& params, const Matrix& features,
                  std::span<const std::size_t> labels, const LossSpec& spec,
                  const ClassCounts& counts) {
  Matrix logits = forward_logits(params, features);
  if (labels.size() != logits.rows)
    throw std::invalid_argument("label count does not match batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i)
    acc += loss_value(spec, logits.row(i), labels[i], counts);
  return acc / static_cast<double>(labels.size());
}

ParamGrads batch_gradients(const ModelParams& params, const Matrix& features,
                           std::span<const std::size_t> labels,
                           const LossSpec& spec, const ClassCounts& counts) {
  params.validate();
  ParamGrads grads = zero_grads_like(params);
  backprop_batch(params, features, labels, spec, counts, 0,
                 params.lws_scales.has_value(), grads);
  return grads;
}

TrainResult train(const Dataset& dataset, const LossSpec& loss,
                  const SamplerPlan& sampler, const TrainConfig& config,
                  const Dataset* validation) {
  config.validate();
  Rng base(config.seed);
  Rng init_rng = base.split(rng_stream::kModelInit);
  TrainResult result;
  result.params =
      init_params(dataset.dim(), dataset.k(), config.hidden_dim, init_rng);
  result.trace = sgd_loop(result.params, dataset, loss, sampler, config,
                          /*first_trainable=*/0, /*scales_only=*/false,
                          rng_stream::kEpochSampling, validation);
  return result;
}

ModelParams crt_retrain(const ModelParams& stage1, const Dataset& dataset,
                        const LossSpec& loss, const TrainConfig& config,
                        bool allow_linear) {
  stage1.validate();
  config.validate(/*allow_zero_epochs=*/true);
  if (stage1.layers.size() < 2 && !allow_linear)
    throw std::invalid_argument(
        "cRT needs a backbone to freeze; a linear model degenerates to plain "
        "retraining (pass allow_linear to override)");
  ModelParams params = stage1;
  auto plan = make_sampler_plan(SamplerKind::class_balanced, dataset);
  sgd_loop(params, dataset, loss, plan, config,
           /*first_trainable=*/params.layers.size() - 1, /*scales_only=*/false,
           rng_stream::kStage2Sampling, nullptr);
  return params;
}

ModelParams lws_retrain(const ModelParams& stage1, const Dataset& dataset,
                        const LossSpec& loss, const TrainConfig& config,
                        bool allow_linear) {
  stage1.validate();
  config.validate(/*allow_zero_epochs=*/true);
  if (stage1.layers.size() < 2 && !allow_linear)
    throw std::invalid_argument(
        "LWS needs a backbone to freeze; a linear model degenerates to plain "
        "retraining (pass allow_linear to override)");
  ModelParams params = stage1;
  params.lws_scales = std::vector<double>(params.output_dim(), 1.0);
  auto plan = make_sampler_plan(SamplerKind::class_balanced, dataset);
  sgd_loop(params, dataset, loss, plan, config,
           /*first_trainable=*/params.layers.size(), /*scales_only=*/true,
           rng_stream::kStage2Sampling, nullptr);
  return params;
}

void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path) {
  params.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ltlab-checkpoint v1\n";
  out << "layers " << params.layers.size() << "\n";
  char buf[48];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%a", v);
    out << buf;
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    out << "layer " << i << " " << l.weight.rows << " " << l.weight.cols << "\n";
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      for (std::size_t c = 0; c < l.weight.cols; ++c) {
        if (c) out << " ";
        put(l.weight.at(r, c));
      }
      out << "\n";
    }
    for (std::size_t t = 0; t < l.bias.size(); ++t) {
      if (t) out << " ";
      put(l.bias[t]);
    }
    out << "\n";
  }
  if (params.lws_scales) {
    out << "lws_scales " << params.lws_scales->size() << "\n";
    for (std::size_t t = 0; t < params.lws_scales->size(); ++t) {
      if (t) out << " ";
      put((*params.lws_scales)[t]);
    }
    out << "\n";
  } else {
    out << "lws_scales 0\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

double read_hex_double(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  if (!(in >> token))
    throw std::runtime_error("truncated checkpoint " + path.string());
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size())
    throw std::runtime_error("bad value '" + token + "' in " + path.string());
  return v;
}

}  // namespace

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "ltlab-checkpoint" || version != "v1")
    throw std::runtime_error("not a ltlab v1 checkpoint: " + path.string());
  std::string word;
  std::size_t n_layers = 0;
  in >> word >> n_layers;
  if (word != "layers" || n_layers == 0)
    throw std::runtime_error("corrupt checkpoint header in " + path.string());
  ModelParams params;
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::size_t idx = 0, rows = 0, cols = 0;
    in >> word >> idx >> rows >> cols;
    if (word != "layer" || idx != i || rows == 0 || cols == 0)
      throw std::runtime_error("corrupt layer header in " + path.string());
    Layer l;
    l.weight = Matrix(rows, cols);
    for (double& v : l.weight.data) v = read_hex_double(in, path);
    l.bias.resize(rows);
    for (double& v : l.bias) v = read_hex_double(in, path);
    params.layers.push_back(std::move(l));
  }
  std::size_t n_scales = 0;
  in >> word >> n_scales;
  if (word != "lws_scales")
    throw std::runtime_error("corrupt scales header in " + path.string());
  if (n_scales > 0) {
    std::vector<double> scales(n_scales);
    for (double& v : scales) v = read_hex_double(in, path);
    params.lws_scales = std::move(scales);
  }
  params.validate();
  return params;
}

}  // namespace ltlab
