#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <json.hpp>

namespace langdepth {

struct EigenMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rms = 0.0;
  double rmsl = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t count = 0;

  friend bool operator==(const EigenMetrics&, const EigenMetrics&) = default;
};

/// Standard depth-evaluation suite over paired positive depths.
/// Sq Rel uses the squared difference, (d - d*)^2 / d*.
EigenMetrics eigen_metrics(std::span<const double> pred, std::span<const double> gt);

void to_json(nlohmann::ordered_json& j, const EigenMetrics& m);

// Fixed-width table: Abs Rel, Sq Rel, RMS, RMSL, d1, d2, d3.
std::string format_metrics_table(const EigenMetrics& m);

}  // namespace langdepth
