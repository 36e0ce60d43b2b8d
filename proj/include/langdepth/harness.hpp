#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "langdepth/depth_data.hpp"
#include "langdepth/embedding_store.hpp"
#include "langdepth/l2d_model.hpp"
#include "langdepth/losses.hpp"
#include "langdepth/lookup_table.hpp"
#include "langdepth/metrics.hpp"

namespace langdepth {

// Called with every mini-batch right before its gradient step.
using BatchHook =
    std::function<void(std::size_t epoch, std::span<const DepthRecord* const> batch)>;

struct TrainSpec {
  std::size_t epochs = 100;
  std::size_t batch_size = 1000;
  RngSeed init_seed{0};
  RngSeed shuffle_seed{0};
  AdamOptions adam;
  SilogForm silog_form = SilogForm::AsPrinted;
  KlDirection kl_direction = KlDirection::GtToPred;
  BatchHook on_batch;

  static TrainSpec inst_defaults() { return {}; }
  // Batch holds every class except the held-out one, capped at 100.
  static TrainSpec loo_defaults(std::size_t n_classes);

  void validate() const;
};

struct TrainResult {
  MlpParameters params;               // rounded to checkpoint (f32) precision
  std::vector<double> epoch_losses;   // mean mini-batch loss per epoch
  std::vector<double> step_losses;
  std::vector<std::string> fallback_labels;  // distinct labels routed to "background"
  std::size_t fallback_records = 0;
};

/// Mini-batch training of a fresh model. LogMean minimizes SILog between the
/// predicted and recorded mean depths; Classification minimizes the KL
/// divergence between record histograms and predicted log-probabilities.
TrainResult pretrain(const L2DConfig& config, const EmbeddingStore& store,
                     std::span<const DepthRecord> records, const TrainSpec& spec);

// Objective value of `params` over all records, evaluated as one batch.
double evaluate_loss(const MlpParameters& params, const EmbeddingStore& store,
                     std::span<const DepthRecord> records, const TrainSpec& spec);

/// Frozen prediction for one label. Classification entries derive mean_depth
/// from the predicted distribution via bin-centre interpolation.
LookupEntry predict_entry(const MlpParameters& params, const EmbeddingVector& input,
                          std::string label, const BinningSpec& binning = {});

struct LooRow {
  LookupEntry prediction;
  double ground_truth_depth = 0.0;
  bool fallback = false;
  std::vector<double> epoch_losses;
};

struct LooReport {
  L2DMode mode = L2DMode::LogMean;
  std::vector<LooRow> rows;  // class-record order
  EigenMetrics metrics;      // each class counts as one element
  std::size_t fallback_count = 0;
  std::vector<MlpParameters> models;  // filled when LooOptions::keep_models
};

using LooBatchHook = std::function<void(std::size_t held_out, std::size_t epoch,
                                        std::span<const DepthRecord* const> batch)>;

struct LooOptions {
  std::size_t workers = 1;
  BinningSpec binning;
  bool keep_models = false;
  LooBatchHook on_batch;  // must be thread-safe when workers > 1
};

/// Leave-one-out protocol: one fresh model per class, trained on every other
/// class, predicting the held-out class once training ends.
LooReport run_loo(const L2DConfig& config, const EmbeddingStore& store,
                  std::span<const ClassRecord> records, const TrainSpec& spec,
                  const LooOptions& options = {});

LookupTable export_lookup(const MlpParameters& params, const EmbeddingStore& store,
                          std::span<const std::string> vocabulary,
                          const BinningSpec& binning = {});
LookupTable export_lookup(const LooReport& report, std::span<const std::string> vocabulary);

struct SyntheticDataset {
  EmbeddingStore store;
  std::vector<ClassRecord> records;
};

/// Classes whose embeddings carry their log mean depth: the first
/// `signal_dims` components are an affine, injective encoding of it, the rest
/// uniform noise in [-noise_sigma, noise_sigma). Depths lie in (0.5, 9.5) m.
SyntheticDataset gen_synthetic(std::size_t n_classes, std::size_t dim, std::size_t signal_dims,
                               double noise_sigma, RngSeed seed, const BinningSpec& binning = {});

}  // namespace langdepth
