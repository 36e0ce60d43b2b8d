#include "langdepth/l2d_model.hpp"

#include <algorithm>
#include <cmath>

#include "langdepth/binary_io.hpp"
#include "langdepth/errors.hpp"

namespace langdepth {

std::string to_string(L2DMode mode) {
  return mode == L2DMode::LogMean ? "logmean" : "class";
}

L2DMode parse_mode(const std::string& text) {
  if (text == "logmean" || text == "log-mean") return L2DMode::LogMean;
  if (text == "class" || text == "classification") return L2DMode::Classification;
  throw Error("unknown L2D mode '" + text + "' (expected logmean or class)");
}

L2DConfig L2DConfig::log_mean(std::size_t input_dim) {
  return {L2DMode::LogMean, input_dim, {100}, 256};
}

L2DConfig L2DConfig::classification(std::size_t input_dim, std::size_t bins) {
  return {L2DMode::Classification, input_dim, {100, kFeatureDim}, bins};
}

void L2DConfig::validate() const {
  if (input_dim == 0) throw Error("L2D input_dim must be positive");
  for (auto h : hidden_dims) {
    if (h == 0) throw Error("L2D hidden widths must be positive");
  }
  if (mode == L2DMode::Classification) {
    if (hidden_dims.empty() || hidden_dims.back() != kFeatureDim) {
      throw Error("classification L2D needs a last hidden layer of width 50");
    }
    if (bins == 0) throw Error("classification L2D needs at least one bin");
  }
}

L2DConfig MlpParameters::config() const {
  L2DConfig c;
  c.mode = mode;
  c.input_dim = input_dim();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) c.hidden_dims.push_back(layers[l].out_dim);
  if (mode == L2DMode::Classification && !layers.empty()) c.bins = layers.back().out_dim;
  return c;
}

MlpParameters MlpParameters::zeros_like() const {
  MlpParameters z{mode, layers};
  for (auto& layer : z.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return z;
}

void MlpParameters::validate() const {
  if (layers.empty()) throw Error("model has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weights.size() != layer.out_dim * layer.in_dim || layer.bias.size() != layer.out_dim) {
      throw Error("layer " + std::to_string(l) + " storage does not match its shape");
    }
    if (l > 0 && layer.in_dim != layers[l - 1].out_dim) {
      throw Error("layer " + std::to_string(l) + " input width does not match layer " +
                  std::to_string(l - 1) + " output");
    }
  }
  if (mode == L2DMode::LogMean && layers.back().out_dim != 1) {
    throw Error("log-mean model must have a single output");
  }
  config().validate();
}

MlpParameters init_model(const L2DConfig& config, RngSeed seed) {
  config.validate();
  Rng rng(seed);
  MlpParameters params;
  params.mode = config.mode;

  std::vector<std::size_t> widths{config.input_dim};
  widths.insert(widths.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  widths.push_back(config.output_dim());

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer{widths[l + 1], widths[l], {}, {}};
    // Glorot-uniform weights, zero biases.
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    layer.weights.resize(layer.out_dim * layer.in_dim);
    for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(layer.out_dim, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  const double log_norm = max_logit + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - log_norm;
  return out;
}

ForwardTrace forward(const MlpParameters& params, std::span<const double> input) {
  if (input.size() != params.input_dim()) {
    throw Error("input has dim " + std::to_string(input.size()) + ", model expects " +
                std::to_string(params.input_dim()));
  }
  ForwardTrace trace;
  trace.activations.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const auto& x = trace.activations.back();
    std::vector<double> z(layer.bias);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      const double* row = &layer.weights[r * layer.in_dim];
      double acc = 0.0;
      for (std::size_t c = 0; c < layer.in_dim; ++c) acc += row[c] * x[c];
      z[r] += acc;
    }
    std::vector<double> a;
    const bool is_output = l + 1 == params.layers.size();
    if (!is_output) {
      a.resize(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::max(0.0, z[i]);
    } else if (params.mode == L2DMode::Classification) {
      a = log_softmax(z);
    } else {
      a = z;
    }
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(a));
  }
  return trace;
}

LogMeanOutput forward_logmean(const MlpParameters& params, std::span<const double> input) {
  if (params.mode != L2DMode::LogMean) throw Error("forward_logmean on a classification model");
  LogMeanOutput out;
  out.trace = forward(params, input);
  out.log_depth = out.trace.activations.back().front();
  return out;
}

ClassificationOutput forward_classification(const MlpParameters& params,
                                            std::span<const double> input) {
  if (params.mode != L2DMode::Classification) {
    throw Error("forward_classification on a log-mean model");
  }
  ClassificationOutput out;
  out.trace = forward(params, input);
  const auto& acts = out.trace.activations;
  out.log_probs = acts.back();
  out.features = acts[acts.size() - 2];
  return out;
}

void accumulate_gradients(const MlpParameters& params, const ForwardTrace& trace,
                          std::span<const double> output_grad, MlpParameters& grads) {
  const std::size_t n_layers = params.layers.size();
  if (trace.activations.size() != n_layers + 1 || trace.pre_activations.size() != n_layers) {
    throw Error("forward trace does not match the model depth");
  }
  if (output_grad.size() != params.layers.back().out_dim) {
    throw Error("output gradient has size " + std::to_string(output_grad.size()) +
                ", model output is " + std::to_string(params.layers.back().out_dim));
  }
  if (grads.layers.size() != n_layers) throw Error("gradient buffer does not match the model");

  // delta = d(loss)/d(pre-activation) of the current layer.
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  if (params.mode == L2DMode::Classification) {
    const auto& log_probs = trace.activations.back();
    double g_sum = 0.0;
    for (double g : delta) g_sum += g;
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] -= std::exp(log_probs[k]) * g_sum;
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = grads.layers[l];
    const auto& x = trace.activations[l];
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      const double d = delta[r];
      g.bias[r] += d;
      if (d == 0.0) continue;
      double* row = &g.weights[r * layer.in_dim];
      for (std::size_t c = 0; c < layer.in_dim; ++c) row[c] += d * x[c];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in_dim, 0.0);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = &layer.weights[r * layer.in_dim];
      for (std::size_t c = 0; c < layer.in_dim; ++c) prev[c] += d * row[c];
    }
    const auto& z_prev = trace.pre_activations[l - 1];
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (z_prev[c] <= 0.0) prev[c] = 0.0;
    }
    delta = std::move(prev);
  }
}

MlpParameters backward(const MlpParameters& params, const ForwardTrace& trace,
                       std::span<const double> output_grad) {
  MlpParameters grads = params.zeros_like();
  accumulate_gradients(params, trace, output_grad, grads);
  return grads;
}

AdamState AdamState::for_params(const MlpParameters& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(MlpParameters& params, const MlpParameters& grads, AdamState& state,
               const AdamOptions& options) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.layers.size() != params.layers.size()) {
    throw Error("adam_step: gradient/state shapes do not match the model");
  }
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    const auto& p = params.layers[l];
    if (g.weights.size() != p.weights.size() || g.bias.size() != p.bias.size()) {
      throw Error("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    }
    for (double v : g.weights) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient in layer " + std::to_string(l) + " weights");
    }
    for (double v : g.bias) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient in layer " + std::to_string(l) + " biases");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);

  auto update = [&](std::vector<double>& theta, const std::vector<double>& grad,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    auto& m = state.first_moment.layers[l];
    auto& v = state.second_moment.layers[l];
    update(p.weights, grads.layers[l].weights, m.weights, v.weights);
    update(p.bias, grads.layers[l].bias, m.bias, v.bias);
  }
}

void round_to_f32(MlpParameters& params) {
  for (auto& layer : params.layers) {
    for (auto& w : layer.weights) w = static_cast<float>(w);
    for (auto& b : layer.bias) b = static_cast<float>(b);
  }
}

std::string encode_checkpoint(const MlpParameters& params) {
  params.validate();
  io::ByteWriter w;
  w.magic("DHL2");
  w.u8(static_cast<std::uint8_t>(params.mode));
  w.u32(static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    w.u32(static_cast<std::uint32_t>(layer.out_dim));
    w.u32(static_cast<std::uint32_t>(layer.in_dim));
  }
  for (const auto& layer : params.layers) {
    for (double v : layer.weights) w.f32(static_cast<float>(v));
    for (double v : layer.bias) w.f32(static_cast<float>(v));
  }
  return w.data();
}

MlpParameters decode_checkpoint(std::string_view bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("DHL2");
  MlpParameters params;
  const auto mode = r.u8();
  if (mode > 1) throw FormatError(what + ": unknown mode byte " + std::to_string(mode));
  params.mode = static_cast<L2DMode>(mode);
  const auto n_layers = r.u32();
  r.require(std::size_t{n_layers} * 8);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    DenseLayer layer;
    layer.out_dim = r.u32();
    layer.in_dim = r.u32();
    params.layers.push_back(std::move(layer));
  }
  for (auto& layer : params.layers) {
    if (layer.in_dim != 0 && layer.out_dim > r.remaining() / 4 / layer.in_dim) {
      throw FormatError(what + ": truncated payload (layer weights)");
    }
    r.require((layer.out_dim * layer.in_dim + layer.out_dim) * 4);
    layer.weights.resize(layer.out_dim * layer.in_dim);
    for (auto& v : layer.weights) v = r.f32();
    layer.bias.resize(layer.out_dim);
    for (auto& v : layer.bias) v = r.f32();
  }
  r.expect_end();
  try {
    params.validate();
  } catch (const Error& e) {
    throw FormatError(what + ": " + e.what());
  }
  return params;
}

void save_checkpoint(const MlpParameters& params, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(params));
}

MlpParameters load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace langdepth
