#pragma once

#include <span>
#include <vector>

namespace langdepth {

// Variance-style coefficient used when SilogForm::Variance is selected.
inline constexpr double kSilogVarianceLambda = 0.85;

enum class SilogForm {
  // 10 * sqrt(mean(g^2) + 0.15 / N^2 * (sum g)^2)
  AsPrinted,
  // 10 * sqrt(mean(g^2) - 0.85 / N^2 * (sum g)^2)
  Variance,
};

struct SilogResult {
  double loss = 0.0;
  std::vector<double> grad_log_pred;  // d loss / d log(pred_i)
};

/// SILog over a batch of positive depths, with g_i = log(pred_i) - log(gt_i).
/// The gradient at a zero loss is defined as zero.
SilogResult silog(std::span<const double> pred, std::span<const double> gt,
                  SilogForm form = SilogForm::AsPrinted);
// Same loss, taking log(pred) directly and gt in meters.
SilogResult silog_log(std::span<const double> log_pred, std::span<const double> gt,
                      SilogForm form = SilogForm::AsPrinted);

enum class KlDirection {
  GtToPred,   // sum_k D*(k) (log D*(k) - log D(k))
  AsWritten,  // sum_k D(k) (log D(k) - log D*(k))
};

struct KlResult {
  double loss = 0.0;
  std::vector<double> grad_log_probs;  // d loss / d log D(k)
};

/// KL divergence between a target histogram D* and predicted log-probabilities
/// log D. Zero-probability terms contribute 0 (0 log 0 := 0).
KlResult kldiv(std::span<const double> target, std::span<const double> pred_log_probs,
               KlDirection direction = KlDirection::GtToPred);

double logsumexp(std::span<const double> values);

}  // namespace langdepth
