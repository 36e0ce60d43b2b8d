#include "langdepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "langdepth/errors.hpp"

namespace langdepth {

EigenMetrics eigen_metrics(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) {
    throw Error("eigen_metrics: " + std::to_string(pred.size()) + " predictions vs " +
                std::to_string(gt.size()) + " ground-truth values");
  }
  if (pred.empty()) throw Error("eigen_metrics: no values");

  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t hit1 = 0, hit2 = 0, hit3 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i];
    const double t = gt[i];
    if (!(std::isfinite(d) && d > 0.0 && std::isfinite(t) && t > 0.0)) {
      throw Error("eigen_metrics: value " + std::to_string(i) + " is not positive and finite");
    }
    const double diff = d - t;
    abs_rel += std::abs(diff) / t;
    sq_rel += diff * diff / t;
    sq += diff * diff;
    const double log_diff = std::log(d) - std::log(t);
    sq_log += log_diff * log_diff;
    const double ratio = std::max(d / t, t / d);
    if (ratio < 1.25) ++hit1;
    if (ratio < 1.25 * 1.25) ++hit2;
    if (ratio < 1.25 * 1.25 * 1.25) ++hit3;
  }
  const double n = static_cast<double>(pred.size());
  EigenMetrics m;
  m.abs_rel = abs_rel / n;
  m.sq_rel = sq_rel / n;
  m.rms = std::sqrt(sq / n);
  m.rmsl = std::sqrt(sq_log / n);
  m.delta1 = static_cast<double>(hit1) / n;
  m.delta2 = static_cast<double>(hit2) / n;
  m.delta3 = static_cast<double>(hit3) / n;
  m.count = pred.size();
  return m;
}

void to_json(nlohmann::ordered_json& j, const EigenMetrics& m) {
  j = nlohmann::ordered_json{{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"rms", m.rms},
                             {"rmsl", m.rmsl},       {"delta1", m.delta1}, {"delta2", m.delta2},
                             {"delta3", m.delta3},   {"n", m.count}};
}

std::string format_metrics_table(const EigenMetrics& m) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%10s %10s %10s %10s %10s %10s %10s\n", "Abs Rel", "Sq Rel",
                "RMS", "RMSL", "d1", "d2", "d3");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%10.3f %10.3f %10.3f %10.3f %10.3f %10.3f %10.3f\n", m.abs_rel,
                m.sq_rel, m.rms, m.rmsl, m.delta1, m.delta2, m.delta3);
  out += buf;
  return out;
}

}  // namespace langdepth
