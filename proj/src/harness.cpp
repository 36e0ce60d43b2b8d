#include "langdepth/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_set>

#include "langdepth/errors.hpp"

namespace langdepth {

TrainSpec TrainSpec::loo_defaults(std::size_t n_classes) {
  TrainSpec spec;
  spec.batch_size = std::clamp<std::size_t>(n_classes > 0 ? n_classes - 1 : 1, 1, 100);
  return spec;
}

void TrainSpec::validate() const {
  if (epochs == 0) throw Error("epochs must be >= 1");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  if (!(adam.lr > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 &&
        adam.beta2 < 1.0 && adam.eps > 0.0)) {
    throw Error("invalid optimizer hyperparameters");
  }
}

namespace {

struct ResolvedInputs {
  std::vector<std::vector<double>> inputs;  // one per record
  std::vector<std::string> fallback_labels;
  std::size_t fallback_records = 0;
};

ResolvedInputs resolve_inputs(const L2DConfig& config, const EmbeddingStore& store,
                              std::span<const DepthRecord> records) {
  if (store.dim() != config.input_dim) {
    throw Error("embedding dim " + std::to_string(store.dim()) + " does not match model input " +
                std::to_string(config.input_dim));
  }
  ResolvedInputs out;
  std::set<std::string> fallback;
  out.inputs.reserve(records.size());
  for (const auto& r : records) {
    auto hit = store.lookup(r.label);
    if (hit.fallback) {
      ++out.fallback_records;
      fallback.insert(r.label);
    }
    out.inputs.push_back(hit.vector.to_double());
    if (config.mode == L2DMode::Classification && r.histogram.probs.size() != config.bins) {
      throw Error("record '" + r.label + "' has no " + std::to_string(config.bins) +
                  "-bin histogram, required for classification training");
    }
    if (!is_valid_depth(r.mean_depth)) {
      throw Error("record '" + r.label + "' has a non-positive mean depth");
    }
  }
  out.fallback_labels.assign(fallback.begin(), fallback.end());
  return out;
}

// Loss of one mini-batch; gradients are added into `grads` when non-null.
double batch_loss(const MlpParameters& params, std::span<const DepthRecord* const> batch,
                  std::span<const std::vector<double>* const> inputs, const TrainSpec& spec,
                  MlpParameters* grads) {
  const std::size_t n = batch.size();
  if (params.mode == L2DMode::LogMean) {
    std::vector<ForwardTrace> traces;
    traces.reserve(n);
    std::vector<double> log_pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto out = forward_logmean(params, *inputs[i]);
      log_pred[i] = out.log_depth;
      gt[i] = batch[i]->mean_depth;
      traces.push_back(std::move(out.trace));
    }
    for (double v : log_pred) {
      if (!std::isfinite(v)) throw NumericalError("non-finite prediction during training");
    }
    auto loss = silog_log(log_pred, gt, spec.silog_form);
    if (grads) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = loss.grad_log_pred[i];
        accumulate_gradients(params, traces[i], std::span<const double>(&g, 1), *grads);
      }
    }
    return loss.loss;
  }

  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto out = forward_classification(params, *inputs[i]);
    for (double v : out.log_probs) {
      if (std::isnan(v)) throw NumericalError("non-finite prediction during training");
    }
    auto kl = kldiv(batch[i]->histogram.probs, out.log_probs, spec.kl_direction);
    total += kl.loss;
    if (grads) {
      for (auto& g : kl.grad_log_probs) g *= inv_n;
      accumulate_gradients(params, out.trace, kl.grad_log_probs, *grads);
    }
  }
  return total * inv_n;
}

}  // namespace

TrainResult pretrain(const L2DConfig& config, const EmbeddingStore& store,
                     std::span<const DepthRecord> records, const TrainSpec& spec) {
  config.validate();
  spec.validate();
  if (records.empty()) throw Error("pretrain needs at least one record");

  auto resolved = resolve_inputs(config, store, records);
  TrainResult result;
  result.fallback_labels = std::move(resolved.fallback_labels);
  result.fallback_records = resolved.fallback_records;
  result.params = init_model(config, spec.init_seed);

  AdamState adam = AdamState::for_params(result.params);
  MlpParameters grads = result.params.zeros_like();
  Rng shuffler(spec.shuffle_seed);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<const DepthRecord*> batch;
  std::vector<const std::vector<double>*> batch_inputs;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t stop = std::min(order.size(), start + spec.batch_size);
      batch.clear();
      batch_inputs.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&records[order[i]]);
        batch_inputs.push_back(&resolved.inputs[order[i]]);
      }
      if (spec.on_batch) spec.on_batch(epoch, batch);

      grads = result.params.zeros_like();
      const double loss = batch_loss(result.params, batch, batch_inputs, spec, &grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_step(result.params, grads, adam, spec.adam);
      result.step_losses.push_back(loss);
      epoch_sum += loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_sum / static_cast<double>(batches));
  }
  round_to_f32(result.params);
  return result;
}

double evaluate_loss(const MlpParameters& params, const EmbeddingStore& store,
                     std::span<const DepthRecord> records, const TrainSpec& spec) {
  if (records.empty()) throw Error("evaluate_loss needs at least one record");
  auto resolved = resolve_inputs(params.config(), store, records);
  std::vector<const DepthRecord*> batch;
  std::vector<const std::vector<double>*> inputs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    batch.push_back(&records[i]);
    inputs.push_back(&resolved.inputs[i]);
  }
  return batch_loss(params, batch, inputs, spec, nullptr);
}

LookupEntry predict_entry(const MlpParameters& params, const EmbeddingVector& input,
                          std::string label, const BinningSpec& binning) {
  const auto x = input.to_double();
  LookupEntry entry;
  entry.label = std::move(label);
  if (params.mode == L2DMode::LogMean) {
    entry.mean_depth = std::exp(forward_logmean(params, x).log_depth);
  } else {
    auto out = forward_classification(params, x);
    DepthHistogram h;
    h.probs.resize(out.log_probs.size());
    std::transform(out.log_probs.begin(), out.log_probs.end(), h.probs.begin(),
                   [](double lp) { return std::exp(lp); });
    entry.mean_depth = expected_depth(h, binning);
    entry.features = std::move(out.features);
    entry.log_probs = std::move(out.log_probs);
  }
  if (!(std::isfinite(entry.mean_depth) && entry.mean_depth > 0.0)) {
    throw NumericalError("prediction for '" + entry.label + "' is not a positive finite depth");
  }
  return entry;
}

LooReport run_loo(const L2DConfig& config, const EmbeddingStore& store,
                  std::span<const ClassRecord> records, const TrainSpec& spec,
                  const LooOptions& options) {
  if (records.size() < 2) throw Error("leave-one-out needs at least two class records");
  config.validate();
  spec.validate();

  LooReport report;
  report.mode = config.mode;
  report.rows.resize(records.size());
  if (options.keep_models) report.models.resize(records.size());

  auto run_one = [&](std::size_t held_out) {
    std::vector<DepthRecord> training;
    training.reserve(records.size() - 1);
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (i != held_out) training.push_back(records[i]);
    }
    TrainSpec run_spec = spec;
    if (options.on_batch) {
      run_spec.on_batch = [&, held_out](std::size_t epoch, std::span<const DepthRecord* const> b) {
        options.on_batch(held_out, epoch, b);
      };
    }
    auto trained = pretrain(config, store, training, run_spec);

    const auto& target = records[held_out];
    auto hit = store.lookup(target.label);
    LooRow row;
    row.prediction = predict_entry(trained.params, hit.vector, target.label, options.binning);
    row.ground_truth_depth = target.mean_depth;
    row.fallback = hit.fallback;
    row.epoch_losses = std::move(trained.epoch_losses);
    report.rows[held_out] = std::move(row);
    if (options.keep_models) report.models[held_out] = std::move(trained.params);
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, records.size());
  if (workers == 1) {
    for (std::size_t c = 0; c < records.size(); ++c) run_one(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t c = next++; c < records.size(); c = next++) {
            try {
              run_one(c);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
              next = records.size();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<double> pred, gt;
  for (const auto& row : report.rows) {
    pred.push_back(row.prediction.mean_depth);
    gt.push_back(row.ground_truth_depth);
    if (row.fallback) ++report.fallback_count;
  }
  report.metrics = eigen_metrics(pred, gt);
  return report;
}

LookupTable export_lookup(const MlpParameters& params, const EmbeddingStore& store,
                          std::span<const std::string> vocabulary, const BinningSpec& binning) {
  LookupTable table;
  std::unordered_set<std::string> seen;
  for (const auto& label : vocabulary) {
    if (!seen.insert(label).second) continue;
    table.insert(predict_entry(params, store.lookup(label).vector, label, binning));
  }
  return table;
}

LookupTable export_lookup(const LooReport& report, std::span<const std::string> vocabulary) {
  LookupTable by_label;
  for (const auto& row : report.rows) by_label.insert(row.prediction);

  LookupTable table;
  std::unordered_set<std::string> seen;
  for (const auto& label : vocabulary) {
    if (!seen.insert(label).second) continue;
    LookupEntry entry = by_label.lookup(label).entry;
    entry.label = label;
    table.insert(std::move(entry));
  }
  return table;
}

SyntheticDataset gen_synthetic(std::size_t n_classes, std::size_t dim, std::size_t signal_dims,
                               double noise_sigma, RngSeed seed, const BinningSpec& binning) {
  if (n_classes < 2) throw Error("gen_synthetic needs at least two classes");
  if (signal_dims < 1 || signal_dims > dim) throw Error("gen_synthetic needs 1 <= signal <= dim");
  if (!(noise_sigma >= 0.0 && std::isfinite(noise_sigma))) {
    throw Error("gen_synthetic needs a finite, non-negative noise scale");
  }
  binning.validate();

  Rng rng(seed);
  const double log_lo = std::log(0.5);
  const double log_hi = std::log(9.5);

  // Affine code: component j = offset_j + slope_j * u, u in (0, 1) the
  // normalized log depth. Every slope is nonzero, so the code is injective.
  std::vector<double> slope(signal_dims), offset(signal_dims);
  for (std::size_t j = 0; j < signal_dims; ++j) {
    const double magnitude = rng.uniform(0.5, 1.0);
    slope[j] = rng.below(2) == 0 ? magnitude : -magnitude;
    offset[j] = rng.uniform(0.0, 0.5);
  }

  auto encode = [&](double u) {
    std::vector<float> v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      v[j] = j < signal_dims ? static_cast<float>(offset[j] + slope[j] * u)
                             : static_cast<float>(noise_sigma * rng.uniform(-1.0, 1.0));
    }
    return EmbeddingVector(std::move(v));
  };

  SyntheticDataset data{EmbeddingStore(dim), {}};
  const double sigma = 2.0 * binning.bin_width();
  for (std::size_t c = 0; c < n_classes; ++c) {
    // Keep u strictly inside (0, 1) so depths stay strictly inside (0.5, 9.5).
    const double u = 0.005 + 0.99 * rng.uniform01();
    const double depth = std::exp(log_lo + u * (log_hi - log_lo));
    char label[32];
    std::snprintf(label, sizeof(label), "class_%03zu", c);
    data.store.insert(label, encode(u));

    ClassRecord r;
    r.label = label;
    r.pixel_count = 500 + rng.below(4500);
    r.mean_depth = depth;
    r.histogram.probs.resize(binning.bin_count);
    double total = 0.0;
    for (std::size_t k = 0; k < binning.bin_count; ++k) {
      const double z = (binning.bin_center(k) - depth) / sigma;
      r.histogram.probs[k] = std::exp(-0.5 * z * z);
      total += r.histogram.probs[k];
    }
    for (auto& p : r.histogram.probs) p /= total;
    data.records.push_back(std::move(r));
  }
  data.store.insert(std::string(kBackgroundLabel), encode(0.5));
  return data;
}

}  // namespace langdepth
