#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfs/feature_table.hpp"

namespace rfs::survcore {

struct SurvivalOutcome {
  std::string patient_id;
  double time = 0.0;  // months, > 0
  bool event = false;
};

/// Checks time > 0 and finite for every outcome; throws DataError.
void validate_outcomes(std::span<const SurvivalOutcome> outcomes);

enum class TieMethod { Efron, Breslow };

struct CoxOptions {
  TieMethod ties = TieMethod::Efron;
  bool standardize = true;
  int max_iterations = 100;
  double gradient_tolerance = 1e-7;
  double loglik_tolerance = 1e-9;
};

struct BaselinePoint {
  double time = 0.0;
  double log_cum_hazard = 0.0;  // log H0(time); H0 kept in log space
};

/// Fitted proportional-hazards model. beta acts on standardized covariates
/// (x - mean) / sd; with standardization disabled mean = 0 and sd = 1.
struct CoxModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd beta;
  Eigen::VectorXd means;
  Eigen::VectorXd sds;
  std::vector<BaselinePoint> baseline;  // distinct event times, ascending
  double max_time = 0.0;                // last training event-or-censor time
  TieMethod ties = TieMethod::Efron;
  int iterations = 0;
  double log_likelihood = 0.0;

  /// Coefficients on the raw covariate scale.
  Eigen::VectorXd raw_beta() const { return beta.cwiseQuotient(sds); }
  double linear_predictor(std::span<const double> x) const;
  /// Baseline cumulative hazard H0(t); 0 before the first event time.
  double cum_hazard(double t) const;
};

struct IterationRecord {
  int iteration = 0;
  double log_likelihood = 0.0;
  double max_abs_gradient = 0.0;
  int halvings = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<IterationRecord> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<IterationRecord>& trace() const { return trace_; }

 private:
  std::vector<IterationRecord> trace_;
};

/// Cox model that cannot be fit to the given data (constant covariate,
/// too few events).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PartialLikelihood {
  double log_likelihood = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Log partial likelihood with its gradient and Hessian in beta for the
/// covariates as given (no standardization).
PartialLikelihood partial_likelihood(const Eigen::MatrixXd& x,
                                     std::span<const SurvivalOutcome> outcomes,
                                     const Eigen::VectorXd& beta, TieMethod ties);

/// Newton-Raphson with step-halving. Zero covariate columns are allowed and
/// yield the null model (Nelson-Aalen baseline).
CoxModel fit_cox(const Eigen::MatrixXd& x, std::span<const SurvivalOutcome> outcomes,
                 std::vector<std::string> feature_names, const CoxOptions& options = {});

/// Integral of S(t | x) from 0 to the model's max_time; x is aligned with
/// feature_names.
double predict_expected_rfs(const CoxModel& model, std::span<const double> x);
/// Looks covariates up by name; throws DataError naming a missing feature.
double predict_expected_rfs(const CoxModel& model, const FeatureTable& table, int row);

struct KmPoint {
  double time = 0.0;
  double survival = 1.0;
  int at_risk = 0;
};

struct KmCurve {
  std::vector<KmPoint> points;  // starts at (0, 1, n)
  double survival_at(double t) const;
};

/// Product-limit estimate with one point per distinct observed time.
KmCurve km_estimate(std::span<const SurvivalOutcome> outcomes);

struct LogRankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
  double observed_a = 0.0;
  double expected_a = 0.0;
  double variance = 0.0;
};

LogRankResult logrank_test(std::span<const SurvivalOutcome> group_a,
                           std::span<const SurvivalOutcome> group_b);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square_1df_sf(double x);

}  // namespace rfs::survcore
