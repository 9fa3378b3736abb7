#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfs/imgvol.hpp"
#include "rfs/metrics.hpp"
#include "rfs/pipeline.hpp"

namespace rfs {

struct RunPaths {
  std::string features;  // precomputed radiomics table
  std::string manifest;  // or volume/mask pairs
  std::string clinical;
  std::string outcomes;
  std::string output_dir;
  friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

struct RunConfig {
  std::uint64_t master_seed = 20240101;
  int folds = 5;
  int repeats = 5;
  int inner_folds = 5;
  bool gas_exclusion = true;
  double hu_cutoff = -150.0;
  double bin_width = 25.0;
  double c_index_floor = 0.5;
  double spearman_cutoff = 0.8;
  int max_features = 10;
  std::vector<double> horizons = {12.0, 24.0, 36.0};
  pipeline::CombineMode combine_mode = pipeline::CombineMode::AveragePredictions;
  int bootstrap_resamples = 1000;
  double ci_level = 0.95;
  bool stratified_folds = false;
  int threads = 1;
  // Optional reordering of categorical clinical levels.
  std::map<std::string, std::vector<std::string>> clinical_levels;
  RunPaths paths;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  // Throws DataError naming the first out-of-range key.
  void validate() const;

  imgvol::PreprocessConfig preprocess() const;
  pipeline::PipelineConfig pipeline_config() const;
  pipeline::EvaluateOptions evaluate_options() const;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; absent keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace rfs
