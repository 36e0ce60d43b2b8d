#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "langdepth/embedding_store.hpp"
#include "langdepth/rng.hpp"

namespace langdepth {

enum class L2DMode : std::uint8_t {
  LogMean = 0,         // regress natural-log mean depth of a label
  Classification = 1,  // predict a depth-bin distribution as log-probabilities
};

std::string to_string(L2DMode mode);
L2DMode parse_mode(const std::string& text);

inline constexpr std::size_t kFeatureDim = 50;

struct L2DConfig {
  L2DMode mode = L2DMode::LogMean;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t bins = 256;  // classification output width

  static L2DConfig log_mean(std::size_t input_dim);
  static L2DConfig classification(std::size_t input_dim, std::size_t bins = 256);

  std::size_t output_dim() const { return mode == L2DMode::LogMean ? 1 : bins; }
  std::size_t penultimate_dim() const { return hidden_dims.empty() ? input_dim : hidden_dims.back(); }
  void validate() const;

  friend bool operator==(const L2DConfig&, const L2DConfig&) = default;
};

/// Affine layer y = W x + b, W stored row-major (out_dim x in_dim).
struct DenseLayer {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t row, std::size_t col) { return weights[row * in_dim + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Parameters of an L2D network. Hidden layers use the rectifier; the last
/// layer is affine, followed by log-softmax in classification mode.
/// The same shape doubles as a gradient accumulator.
struct MlpParameters {
  L2DMode mode = L2DMode::LogMean;
  std::vector<DenseLayer> layers;

  L2DConfig config() const;
  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  MlpParameters zeros_like() const;
  void validate() const;

  friend bool operator==(const MlpParameters&, const MlpParameters&) = default;
};

struct ForwardTrace {
  // activations[0] is the input; activations[l + 1] is layer l's output
  // after its nonlinearity (log-softmax for a classification head).
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> pre_activations;
};

struct LogMeanOutput {
  double log_depth = 0.0;
  ForwardTrace trace;
};

struct ClassificationOutput {
  std::vector<double> features;   // post-rectifier penultimate activations
  std::vector<double> log_probs;
  ForwardTrace trace;
};

MlpParameters init_model(const L2DConfig& config, RngSeed seed);

ForwardTrace forward(const MlpParameters& params, std::span<const double> input);
LogMeanOutput forward_logmean(const MlpParameters& params, std::span<const double> input);
ClassificationOutput forward_classification(const MlpParameters& params,
                                            std::span<const double> input);

// Numerically stable: the max logit is subtracted before exponentiating.
std::vector<double> log_softmax(std::span<const double> logits);

/// Adds d(loss)/d(params) into `grads` given d(loss)/d(output), where output
/// is log_depth (LogMean) or the log-probabilities (Classification).
void accumulate_gradients(const MlpParameters& params, const ForwardTrace& trace,
                          std::span<const double> output_grad, MlpParameters& grads);
MlpParameters backward(const MlpParameters& params, const ForwardTrace& trace,
                       std::span<const double> output_grad);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MlpParameters first_moment;
  MlpParameters second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const MlpParameters& params);
};

void adam_step(MlpParameters& params, const MlpParameters& grads, AdamState& state,
               const AdamOptions& options);

// Rounds every parameter to float precision, the checkpoint's storage type.
void round_to_f32(MlpParameters& params);

// DHL2 binary checkpoint: magic, u8 mode, u32 layer count, per-layer
// (u32 out, u32 in), then per layer the f32 weights (row-major) and biases.
std::string encode_checkpoint(const MlpParameters& params);
MlpParameters decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint");
void save_checkpoint(const MlpParameters& params, const std::filesystem::path& path);
MlpParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace langdepth
