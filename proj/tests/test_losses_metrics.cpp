#include <gtest/gtest.h>

#include <cmath>

#include "langdepth/errors.hpp"
#include "langdepth/losses.hpp"
#include "langdepth/metrics.hpp"
#include "test_support.hpp"

using namespace langdepth;

TEST(Silog, PerfectPredictionIsZero) {
  std::vector<double> d{0.5, 2.0, 7.0};
  auto r = silog(d, d);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad_log_pred) EXPECT_EQ(g, 0.0);
}

TEST(Silog, HandEvaluatedUnitValue) {
  std::vector<double> pred{std::exp(1.0), std::exp(1.0)};
  std::vector<double> gt{1.0, 1.0};
  EXPECT_NEAR(silog(pred, gt).loss, 10.723805294763608, 1e-6);
}

TEST(Silog, VarianceFormIsOptional) {
  std::vector<double> pred{std::exp(1.0), std::exp(1.0)};
  std::vector<double> gt{1.0, 1.0};
  // Uniform offset: mean(g^2) - 0.85 * mean(g)^2 = 0.15
  EXPECT_NEAR(silog(pred, gt, SilogForm::Variance).loss, 10.0 * std::sqrt(0.15), 1e-12);
}

TEST(Silog, NotScaleInvariantAsPrinted) {
  Rng rng({31});
  std::vector<double> gt(9);
  for (auto& v : gt) v = rng.uniform(0.5, 9.0);
  for (double s : {1.1, 2.0, 5.0}) {
    std::vector<double> pred = gt;
    for (auto& p : pred) p *= s;
    const double ls = std::log(s);
    EXPECT_NEAR(silog(pred, gt).loss, 10.0 * std::sqrt(ls * ls + 0.15 * ls * ls), 1e-12);
  }
}

TEST(Silog, PermutationInvariant) {
  std::vector<double> pred{1.0, 2.0, 3.0, 4.0}, gt{1.5, 1.5, 2.5, 5.0};
  std::vector<double> pred_p{4.0, 1.0, 3.0, 2.0}, gt_p{5.0, 1.5, 2.5, 1.5};
  EXPECT_DOUBLE_EQ(silog(pred, gt).loss, silog(pred_p, gt_p).loss);
}

TEST(Silog, GradientMatchesFiniteDifferences) {
  Rng rng({5});
  for (auto form : {SilogForm::AsPrinted, SilogForm::Variance}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> lp(8), gt(8);
      for (std::size_t i = 0; i < 8; ++i) {
        gt[i] = rng.uniform(0.5, 9.5);
        lp[i] = std::log(gt[i]) + rng.uniform(-1.0, 1.0);
      }
      auto r = silog_log(lp, gt, form);
      const double eps = 1e-6;
      for (std::size_t i = 0; i < 8; ++i) {
        auto up = lp, down = lp;
        up[i] += eps;
        down[i] -= eps;
        const double numeric = (silog_log(up, gt, form).loss - silog_log(down, gt, form).loss) / (2 * eps);
        EXPECT_LT(std::abs(numeric - r.grad_log_pred[i]) / std::max(std::abs(numeric), 1e-3), 1e-5);
      }
    }
  }
}

TEST(Silog, RejectsBadDepths) {
  std::vector<double> ok{1.0}, zero{0.0}, neg{-1.0};
  EXPECT_THROW(silog(zero, ok), Error);
  EXPECT_THROW(silog(ok, neg), Error);
  EXPECT_THROW(silog(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(silog(std::vector<double>{1.0, 2.0}, ok), Error);
}

TEST(KlDiv, IdenticalDistributionsGiveZero) {
  Rng rng({6});
  std::vector<double> logits(256);
  for (auto& z : logits) z = rng.uniform(-2, 2);
  const double lse = logsumexp(logits);
  std::vector<double> lp(256), target(256);
  for (std::size_t k = 0; k < 256; ++k) {
    lp[k] = logits[k] - lse;
    target[k] = std::exp(lp[k]);
  }
  EXPECT_NEAR(kldiv(target, lp).loss, 0.0, 1e-12);
  EXPECT_NEAR(kldiv(target, lp, KlDirection::AsWritten).loss, 0.0, 1e-12);
}

TEST(KlDiv, PointMassAgainstUniform) {
  std::vector<double> target(256, 0.0);
  target[0] = 1.0;
  std::vector<double> uniform(256, -std::log(256.0));
  EXPECT_NEAR(kldiv(target, uniform).loss, 5.545177444479562, 1e-6);
}

TEST(KlDiv, AsWrittenRejectsZeroTargetSupport) {
  std::vector<double> target(256, 0.0);
  target[0] = 1.0;
  std::vector<double> uniform(256, -std::log(256.0));
  EXPECT_THROW(kldiv(target, uniform, KlDirection::AsWritten), Error);
}

TEST(KlDiv, MatchesSummationOracleAndGibbs) {
  Rng rng({7});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> target(256), logits(256);
    double total = 0.0;
    for (auto& t : target) {
      t = rng.uniform01() < 0.3 ? 0.0 : rng.uniform01();
      total += t;
    }
    target[rng.below(256)] += 0.1;
    total += 0.1;
    for (auto& t : target) t /= total;
    for (auto& z : logits) z = rng.uniform(-3, 3);
    const double lse = logsumexp(logits);
    std::vector<double> lp(256);
    for (std::size_t k = 0; k < 256; ++k) lp[k] = logits[k] - lse;

    double oracle = 0.0;
    for (std::size_t k = 0; k < 256; ++k) {
      if (target[k] > 0) oracle += target[k] * std::log(target[k] / std::exp(lp[k]));
    }
    const double got = kldiv(target, lp).loss;
    EXPECT_NEAR(got, oracle, 1e-7);
    EXPECT_GE(got, 0.0);
  }
}

TEST(KlDiv, RejectsInvalidInputs) {
  std::vector<double> uniform(4, -std::log(4.0));
  EXPECT_THROW(kldiv(std::vector<double>{0.5, 0.5, 0.5, 0.5}, uniform), Error);
  EXPECT_THROW(kldiv(std::vector<double>{1.0, 0, 0, 0}, std::vector<double>(4, 0.0)), Error);
  EXPECT_THROW(kldiv(std::vector<double>{1.0}, uniform), Error);
}

TEST(EigenMetrics, PerfectPrediction) {
  std::vector<double> d{0.5, 1.0, 3.0};
  auto m = eigen_metrics(d, d);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.sq_rel, 0.0);
  EXPECT_EQ(m.rms, 0.0);
  EXPECT_EQ(m.rmsl, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
  EXPECT_EQ(m.count, 3u);
}

TEST(EigenMetrics, HandEvaluatedSinglePairs) {
  auto m = eigen_metrics(std::vector<double>{2.0}, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(m.abs_rel, 1.0);
  EXPECT_DOUBLE_EQ(m.sq_rel, 1.0);
  EXPECT_DOUBLE_EQ(m.rms, 1.0);
  EXPECT_NEAR(m.rmsl, 0.6931471805599453, 1e-15);
  EXPECT_EQ(m.delta1, 0.0);
  EXPECT_EQ(m.delta2, 0.0);
  EXPECT_EQ(m.delta3, 0.0);

  auto t = eigen_metrics(std::vector<double>{1.3}, std::vector<double>{1.0});
  EXPECT_EQ(t.delta1, 0.0);
  EXPECT_EQ(t.delta2, 1.0);
  EXPECT_EQ(t.delta3, 1.0);
}

TEST(EigenMetrics, SqRelIsSquared) {
  auto m = eigen_metrics(std::vector<double>{4.0}, std::vector<double>{2.0});
  EXPECT_DOUBLE_EQ(m.abs_rel, 1.0);
  EXPECT_DOUBLE_EQ(m.sq_rel, 2.0);
}

TEST(EigenMetrics, DeltaMonotone) {
  Rng rng({8});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng.below(30)), g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.uniform(0.1, 10.0);
      g[i] = rng.uniform(0.1, 10.0);
    }
    auto m = eigen_metrics(p, g);
    EXPECT_LE(m.delta1, m.delta2);
    EXPECT_LE(m.delta2, m.delta3);
  }
}

TEST(EigenMetrics, RejectsBadInput) {
  EXPECT_THROW(eigen_metrics(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), Error);
  EXPECT_THROW(eigen_metrics(std::vector<double>{0.0}, std::vector<double>{1.0}), Error);
  EXPECT_THROW(eigen_metrics(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(EigenMetrics, ReportFormats) {
  auto m = eigen_metrics(std::vector<double>{2.0, 1.0}, std::vector<double>{1.0, 1.0});
  nlohmann::ordered_json j = m;
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"abs_rel", "sq_rel", "rms", "rmsl", "delta1", "delta2",
                                            "delta3", "n"}));
  const auto table = format_metrics_table(m);
  EXPECT_LT(table.find("Abs Rel"), table.find("Sq Rel"));
  EXPECT_LT(table.find("RMS "), table.find("RMSL"));
  EXPECT_NE(table.find("0.500"), std::string::npos);
}
