#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfs/feature_table.hpp"
#include "rfs/survcore.hpp"

namespace rfs::select {

using survcore::SurvivalOutcome;

struct ScreenConfig {
  double c_index_floor = 0.5;
  double spearman_cutoff = 0.8;
  int max_features = 10;
};

/// Row indices into a FeatureTable (and the outcomes aligned with it).
struct Split {
  std::vector<int> train;
  std::vector<int> validation;
};

/// Shuffles rows with `seed` and deals them into `folds` validation folds;
/// each split trains on the remaining folds.
std::vector<Split> make_inner_splits(std::span<const int> rows, int folds, std::uint64_t seed);

struct ScreenRecord {
  std::string feature;
  double train_c = 0.0;
  double val_c = 0.0;
  std::string note;  // set when the univariate fit failed
};

struct PrunedPair {
  std::string kept;
  std::string dropped;
  double rho = 0.0;
};

struct ForwardStep {
  std::string added;
  double train_c = 0.0;
  double val_c = 0.0;
};

struct SelectionTrace {
  std::vector<ScreenRecord> screened_out;
  std::vector<PrunedPair> pruned_pairs;
  std::vector<ForwardStep> forward_path;
  std::vector<std::string> chosen_set;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

/// Mean train / validation C-index of a Cox model on `columns` across the
/// splits. Splits whose fit or C-index fails are skipped; nullopt when all
/// fail.
struct SplitScore {
  double train_c = 0.0;
  double val_c = 0.0;
  int folds_used = 0;
};
std::optional<SplitScore> score_feature_set(const FeatureTable& table,
                                            std::span<const std::string> columns,
                                            std::span<const SurvivalOutcome> outcomes,
                                            std::span<const Split> splits);

struct ScreenResult {
  std::vector<std::string> surviving;          // candidate order preserved
  std::map<std::string, double> train_scores;  // mean train C of surviving features
  std::vector<ScreenRecord> screened_out;
};

/// Drops features whose single-covariate model reaches a mean C-index below
/// the floor on either the training or the validation portions.
ScreenResult univariate_screen(const FeatureTable& table, std::span<const std::string> candidates,
                               std::span<const SurvivalOutcome> outcomes,
                               std::span<const Split> splits, const ScreenConfig& cfg);

/// Average ranks for ties, then Pearson correlation of the ranks. Zero rank
/// variance yields 0.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct PruneResult {
  std::vector<std::string> kept;
  std::vector<PrunedPair> pruned;
};

/// Greedy removal over pairs in descending |rho| order: when both members of
/// a pair with |rho| > cutoff are alive, the one with the lower score goes.
PruneResult redundancy_prune(const FeatureTable& table, std::span<const std::string> names,
                             const std::map<std::string, double>& scores, std::span<const int> rows,
                             const ScreenConfig& cfg);

struct ForwardResult {
  std::vector<std::string> chosen;
  std::vector<ForwardStep> path;
};

/// Greedy forward selection maximizing the mean validation C-index over the
/// inner splits, up to cfg.max_features; returns the best-scoring prefix.
/// Throws DataError("no fittable features") when nothing fits at step one.
ForwardResult step_forward(const FeatureTable& table, std::span<const std::string> candidates,
                           std::span<const SurvivalOutcome> outcomes,
                           std::span<const Split> splits, const ScreenConfig& cfg);

struct SelectionResult {
  std::vector<std::string> chosen;
  SelectionTrace trace;
};

/// Screen and prune only; used on its own for pre-selected concatenation.
struct PreselectResult {
  std::vector<std::string> kept;
  std::map<std::string, double> train_scores;
  SelectionTrace trace;
};
PreselectResult preselect(const FeatureTable& table, std::span<const SurvivalOutcome> outcomes,
                          std::span<const int> rows, std::span<const Split> splits,
                          const ScreenConfig& cfg);

/// Screen, prune and step-forward over `rows` with the given inner splits.
/// Never throws for an empty pool; the chosen set is then empty.
SelectionResult select_features(const FeatureTable& table,
                                 std::span<const SurvivalOutcome> outcomes,
                                 std::span<const int> rows, std::span<const Split> splits,
                                 const ScreenConfig& cfg);

}  // namespace rfs::select
