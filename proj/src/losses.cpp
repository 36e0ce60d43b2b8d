#include "langdepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "langdepth/errors.hpp"

namespace langdepth {

namespace {

void check_depths(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw Error(std::string("silog: non-positive or non-finite ") + what + " depth");
    }
  }
}

}  // namespace

SilogResult silog_log(std::span<const double> log_pred, std::span<const double> gt,
                      SilogForm form) {
  if (log_pred.empty() || log_pred.size() != gt.size()) {
    throw Error("silog: prediction and ground truth must be non-empty and equal length");
  }
  check_depths(gt, "ground-truth");
  for (double v : log_pred) {
    if (!std::isfinite(v)) throw Error("silog: non-finite log prediction");
  }

  const double n = static_cast<double>(gt.size());
  const double coeff = form == SilogForm::AsPrinted ? 0.15 : -kSilogVarianceLambda;

  std::vector<double> g(gt.size());
  double sum_sq = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = log_pred[i] - std::log(gt[i]);
    sum_sq += g[i] * g[i];
    sum += g[i];
  }
  // Clamp guards the variance form against tiny negative rounding.
  const double inner = std::max(0.0, sum_sq / n + coeff / (n * n) * sum * sum);
  SilogResult out;
  out.loss = 10.0 * std::sqrt(inner);
  out.grad_log_pred.assign(g.size(), 0.0);
  if (inner > 0.0) {
    const double scale = 10.0 / std::sqrt(inner);
    for (std::size_t i = 0; i < g.size(); ++i) {
      out.grad_log_pred[i] = scale * (g[i] / n + coeff * sum / (n * n));
    }
  }
  return out;
}

SilogResult silog(std::span<const double> pred, std::span<const double> gt, SilogForm form) {
  check_depths(pred, "predicted");
  std::vector<double> log_pred(pred.size());
  std::transform(pred.begin(), pred.end(), log_pred.begin(), [](double d) { return std::log(d); });
  return silog_log(log_pred, gt, form);
}

double logsumexp(std::span<const double> values) {
  const double m = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

KlResult kldiv(std::span<const double> target, std::span<const double> pred_log_probs,
               KlDirection direction) {
  if (target.empty() || target.size() != pred_log_probs.size()) {
    throw Error("kldiv: target and prediction must be non-empty and equal length");
  }
  double mass = 0.0;
  for (double t : target) {
    if (!(std::isfinite(t) && t >= 0.0)) throw Error("kldiv: target has a negative or non-finite entry");
    mass += t;
  }
  if (std::abs(mass - 1.0) > 1e-6) throw Error("kldiv: target does not sum to 1");
  for (double lp : pred_log_probs) {
    if (std::isnan(lp) || lp == INFINITY) {
      throw Error("kldiv: prediction is not a vector of log-probabilities");
    }
  }
  if (std::abs(logsumexp(pred_log_probs)) > 1e-6) {
    throw Error("kldiv: predicted log-probabilities are not normalized");
  }

  KlResult out;
  out.grad_log_probs.assign(target.size(), 0.0);
  if (direction == KlDirection::GtToPred) {
    for (std::size_t k = 0; k < target.size(); ++k) {
      if (target[k] == 0.0) continue;
      out.loss += target[k] * (std::log(target[k]) - pred_log_probs[k]);
      out.grad_log_probs[k] = -target[k];
    }
  } else {
    for (std::size_t k = 0; k < target.size(); ++k) {
      const double p = std::exp(pred_log_probs[k]);
      if (p == 0.0) continue;
      if (target[k] == 0.0) {
        throw Error("kldiv: target has zero mass at bin " + std::to_string(k) +
                    " where the prediction does not (divergence is infinite)");
      }
      const double log_ratio = pred_log_probs[k] - std::log(target[k]);
      out.loss += p * log_ratio;
      out.grad_log_probs[k] = p * (log_ratio + 1.0);
    }
  }
  return out;
}

}  // namespace langdepth
