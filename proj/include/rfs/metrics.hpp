#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfs/survcore.hpp"

namespace rfs::metrics {

using survcore::SurvivalOutcome;

/// Harrell's C for expected-survival predictions: a pair with t_i < t_j is
/// comparable when patient i had the event, concordant when pred_i < pred_j,
/// prediction ties count one half. Throws UndefinedMetric when no pair is
/// comparable.
double concordance_index(std::span<const double> predictions,
                         std::span<const SurvivalOutcome> outcomes);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  int max_redraws = 100;  // per resample
};

/// Percentile bootstrap over patients.
ConfidenceInterval bootstrap_ci(std::span<const double> predictions,
                                std::span<const SurvivalOutcome> outcomes,
                                const BootstrapOptions& options);

/// Resample indices shared by the bootstrap helpers; resamples without a
/// comparable pair are redrawn.
std::vector<std::vector<int>> bootstrap_resamples(std::span<const SurvivalOutcome> outcomes,
                                                  const BootstrapOptions& options);

/// C-index on each resample; resamples come from bootstrap_resamples.
std::vector<double> bootstrap_statistics(std::span<const double> predictions,
                                         std::span<const SurvivalOutcome> outcomes,
                                         std::span<const std::vector<int>> resamples);

/// Percentile interval of a bootstrap distribution.
ConfidenceInterval percentile_interval(std::vector<double> stats, double level);

/// Sample quantile with linear interpolation; `sorted` ascending.
double quantile(std::span<const double> sorted, double q);
double median(std::vector<double> values);

struct HorizonAssessment {
  double horizon = 0.0;
  std::vector<std::string> included_ids;
  std::vector<int> included_rows;  // indices into the caller's arrays
  std::vector<bool> labels;        // recurrence by the horizon
  std::vector<double> scores;      // expected RFS
  double cutoff = 0.0;
  int positives() const;
};

/// Excludes patients censored before the horizon; labels events at or before
/// the horizon positive. Throws UndefinedMetric when no patient is included
/// or only one class remains.
HorizonAssessment horizon_assessment(std::span<const double> predictions,
                                     std::span<const SurvivalOutcome> outcomes, double horizon);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Risk score = -expected RFS, threshold sweep over distinct scores,
/// trapezoidal area.
RocCurve roc_auc(const HorizonAssessment& assessment);
RocCurve roc_curve(const std::vector<bool>& labels, std::span<const double> risk_scores);

struct ConfusionMetrics {
  int tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> accuracy;
};

/// Predicted positive when expected RFS <= cutoff.
ConfusionMetrics confusion_metrics(const HorizonAssessment& assessment);

struct DeLongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double covariance = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double variance_of_difference() const { return var_a + var_b - 2.0 * covariance; }
};

/// DeLong comparison of two correlated AUCs on the same labels; scores are
/// risk scores (higher = more likely positive).
DeLongResult delong_test(const std::vector<bool>& labels, std::span<const double> risk_a,
                         std::span<const double> risk_b);
/// Same patients required; uses -expected RFS as the risk score.
DeLongResult delong_test(const HorizonAssessment& a, const HorizonAssessment& b);

struct Stratification {
  std::vector<int> high_risk;  // expected RFS <= median
  std::vector<int> low_risk;
  double median = 0.0;
  bool degenerate = false;  // every patient landed in one group
};

Stratification stratify_by_median(std::span<const double> predictions);

}  // namespace rfs::metrics
