#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace langdepth {

/// Uniform partition of [min_depth, max_depth] meters into bin_count bins.
struct BinningSpec {
  double min_depth = 0.0;
  double max_depth = 10.0;
  std::size_t bin_count = 256;

  double bin_width() const { return (max_depth - min_depth) / static_cast<double>(bin_count); }
  double bin_center(std::size_t k) const {
    return min_depth + (static_cast<double>(k) + 0.5) * bin_width();
  }
  // Depths at or beyond max_depth land in the last bin. Requires a valid depth.
  std::size_t bin_of(double depth) const;
  void validate() const;
};

// A pixel carries a usable depth iff it is finite and strictly positive.
bool is_valid_depth(double depth);

struct DepthFrame {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> depth;                  // meters, row-major
  std::vector<std::uint16_t> instance_ids;   // row-major
  std::map<std::uint16_t, std::string> instance_table;

  std::size_t pixel_count() const { return std::size_t{height} * width; }
  const std::string& label_at(std::size_t pixel) const;
  void validate() const;

  friend bool operator==(const DepthFrame&, const DepthFrame&) = default;
};

struct DepthHistogram {
  std::vector<double> probs;

  bool empty() const { return probs.empty(); }
  friend bool operator==(const DepthHistogram&, const DepthHistogram&) = default;
};

/// One pretraining data point: a label with its depth statistics. Used both
/// per instance and per class (pooled over every instance of the label).
struct DepthRecord {
  std::string label;
  std::uint64_t pixel_count = 0;
  double mean_depth = 0.0;
  DepthHistogram histogram;  // empty when the source carried none

  friend bool operator==(const DepthRecord&, const DepthRecord&) = default;
};
using InstanceRecord = DepthRecord;
using ClassRecord = DepthRecord;

std::vector<std::uint64_t> bin_counts(std::span<const float> depths, const BinningSpec& spec);
DepthHistogram histogram(std::span<const float> depths, const BinningSpec& spec);
double mean_depth(std::span<const float> depths);
double expected_depth(const DepthHistogram& hist, const BinningSpec& spec);

struct ExtractionReport {
  std::size_t frames = 0;
  std::size_t dropped_instances = 0;  // instances without a single valid depth
};

/// One record per instance id (ascending id order) with >= 1 valid pixel.
std::vector<InstanceRecord> extract_instances(const DepthFrame& frame, const BinningSpec& spec,
                                              ExtractionReport* report = nullptr);

std::vector<InstanceRecord> build_inst_dataset(std::span<const std::filesystem::path> manifest,
                                               const BinningSpec& spec,
                                               ExtractionReport* report = nullptr);

enum class ClassPooling {
  PixelWeighted,  // pool raw pixels: weights are instance pixel counts
  InstanceMean,   // unweighted mean over instances
};

struct AggregationReport {
  std::vector<std::string> missing_labels;  // vocabulary labels with no instance
};

/// Per-class records in vocabulary order.
std::vector<ClassRecord> aggregate_loo(std::span<const InstanceRecord> records,
                                       std::span<const std::string> vocabulary,
                                       const BinningSpec& spec,
                                       ClassPooling pooling = ClassPooling::PixelWeighted,
                                       AggregationReport* report = nullptr);

// DHF1 binary frame format.
std::string encode_frame(const DepthFrame& frame);
DepthFrame decode_frame(std::string_view bytes, const std::string& what = "frame");
void save_frame(const DepthFrame& frame, const std::filesystem::path& path);
DepthFrame load_frame(const std::filesystem::path& path);

// JSON-lines dataset: {"label", "pixel_count", "mean_depth", "histogram"?}.
void save_records(std::span<const DepthRecord> records, const std::filesystem::path& path);
std::vector<DepthRecord> load_records(const std::filesystem::path& path);

// One path per line; relative entries resolve against the manifest's directory.
std::vector<std::filesystem::path> load_manifest(const std::filesystem::path& path);
// One label per line, blank lines ignored.
std::vector<std::string> load_vocabulary(const std::filesystem::path& path);

}  // namespace langdepth
