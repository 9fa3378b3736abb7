#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfs/error.hpp"
#include "rfs/feature_table.hpp"
#include "rfs/metrics.hpp"
#include "rfs/select.hpp"
#include "rfs/survcore.hpp"

namespace rfs::pipeline {

using survcore::SurvivalOutcome;

enum class CombineMode { AveragePredictions, ConcatAllFeatures, ConcatPreselected };
enum class ModelKind { Radiomics = 0, Clinical = 1, Combined = 2 };
inline constexpr std::array<ModelKind, 3> kModelKinds = {ModelKind::Radiomics, ModelKind::Clinical,
                                                         ModelKind::Combined};

std::string to_string(CombineMode m);
CombineMode combine_mode_from_string(const std::string& s);
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

/// Deterministic 64-bit seed derived from a master seed and a path of
/// integers (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

struct CvPlan {
  int n_folds = 5;
  int n_repeats = 5;
  std::uint64_t master_seed = 0;
  std::vector<std::string> patient_ids;
  std::vector<std::vector<int>> assignments;  // [repeat][patient] -> outer fold

  std::vector<int> fold_rows(int repeat, int fold) const;
  std::vector<int> training_rows(int repeat, int fold) const;
};

/// Per repeat: shuffle with a repeat-derived seed and deal into folds. With
/// `stratify_events`, events and non-events are dealt separately.
CvPlan make_cv_plan(std::span<const std::string> patient_ids, std::uint64_t master_seed,
                    int n_folds = 5, int n_repeats = 5,
                    const std::vector<bool>* stratify_events = nullptr);

struct PipelineConfig {
  select::ScreenConfig screen;
  int inner_folds = 5;
  CombineMode mode = CombineMode::AveragePredictions;
  int threads = 1;
};

/// Expected RFS per (model kind, repeat, patient).
class PredictionTable {
 public:
  PredictionTable() = default;
  PredictionTable(std::vector<std::string> patient_ids, int n_repeats);

  const std::vector<std::string>& patient_ids() const { return ids_; }
  int n_repeats() const { return n_repeats_; }
  double& at(ModelKind k, int repeat, int patient) {
    return values_[static_cast<int>(k)][repeat][patient];
  }
  double at(ModelKind k, int repeat, int patient) const {
    return values_[static_cast<int>(k)][repeat][patient];
  }
  /// Cross-repeat mean per patient.
  std::vector<double> mean(ModelKind k) const;

  /// patient_id,repeat,model_kind,expected_rfs_months; per-repeat rows
  /// (repeat 1..R) then a repeat=mean row for every patient and kind.
  std::string to_csv() const;
  /// Reads the mean rows (computing them from per-repeat rows when absent).
  static std::map<ModelKind, std::vector<double>> read_means(const std::filesystem::path& path,
                                                             std::span<const std::string> ids);

 private:
  std::vector<std::string> ids_;
  int n_repeats_ = 0;
  std::array<std::vector<std::vector<double>>, 3> values_;
};

struct FoldTrace {
  int repeat = 0;
  int fold = 0;
  ModelKind kind = ModelKind::Radiomics;
  select::SelectionTrace trace;
};

struct NestedCvResult {
  PredictionTable predictions;
  std::vector<FoldTrace> traces;  // ordered by (repeat, fold, kind)
};

class PipelineError : public DataError {
 public:
  using DataError::DataError;
};

/// Outer repeated CV with feature selection inside each outer training set.
/// Tables and outcomes must share row order.
NestedCvResult run_nested_cv(const FeatureTable& radiomics, const FeatureTable& clinical,
                             std::span<const SurvivalOutcome> outcomes, const CvPlan& plan,
                             const PipelineConfig& cfg);

using OccurrenceReport = std::map<ModelKind, std::map<std::string, int>>;
OccurrenceReport feature_occurrence_report(std::span<const FoldTrace> traces);
nlohmann::json to_json(const OccurrenceReport& report);
nlohmann::json traces_to_json(std::span<const FoldTrace> traces);

struct HorizonReport {
  double horizon = 0.0;
  std::optional<std::string> undefined_reason;
  double auc = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> accuracy;
  int n_included = 0;
  int n_events = 0;
  double cutoff = 0.0;
  metrics::RocCurve roc;
};

struct ModelReport {
  ModelKind kind = ModelKind::Combined;
  std::optional<double> c_index;
  std::optional<metrics::ConfidenceInterval> ci;
  std::vector<HorizonReport> horizons;
  metrics::Stratification strata;
  std::optional<survcore::LogRankResult> logrank;
  survcore::KmCurve km_high;
  survcore::KmCurve km_low;
};

struct DeLongReport {
  double horizon = 0.0;
  std::optional<metrics::DeLongResult> result;
  std::optional<std::string> undefined_reason;
};

struct CiComparison {
  bool available = false;
  bool intervals_overlap = false;
  /// Fraction of shared bootstrap resamples where the clinical C-index is at
  /// least the combined one.
  double fraction_clinical_ge_combined = 0.0;
};

struct MetricsReport {
  std::vector<ModelReport> models;
  std::vector<DeLongReport> delong_combined_vs_clinical;
  CiComparison ci_comparison;
  survcore::KmCurve cohort_km;

  nlohmann::json to_json() const;
  std::string km_curves_csv() const;
  std::string roc_points_csv() const;
};

struct EvaluateOptions {
  std::vector<double> horizons = {12.0, 24.0, 36.0};
  metrics::BootstrapOptions bootstrap;
};

MetricsReport evaluate_full(const std::map<ModelKind, std::vector<double>>& mean_predictions,
                            std::span<const SurvivalOutcome> outcomes,
                            const EvaluateOptions& options);

/// Plot-data CSVs from a metrics.json document.
std::string km_curves_csv_from_json(const nlohmann::json& metrics);
std::string roc_points_csv_from_json(const nlohmann::json& metrics);

}  // namespace rfs::pipeline
