#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfs/feature_table.hpp"
#include "rfs/imgvol.hpp"
#include "rfs/io.hpp"
#include "rfs/survcore.hpp"

namespace rfs::synthgen {

// Volume mode: latent "size" drives the ellipsoid semi-axes, latent
// "heterogeneity" mixes a checkerboard into a smooth interior.
struct VolumeArchetypes {
  double size_beta = 1.0;
  double heterogeneity_beta = 0.5;
  double base_radius_mm = 9.0;
  double radius_sd_mm = 2.0;
  double gas_pocket_probability = 0.3;
  imgvol::Spacing spacing{1.0, 1.0, 2.0};
};

struct SynthSpec {
  int n_patients = 200;
  // Feature mode: rad_00..rad_{n-1}, standard normal.
  int n_radiomics = 30;
  std::map<std::string, double> radiomics_beta = {{"rad_00", 1.0}, {"rad_01", 1.0}};
  // Per population SD of the T-stage code.
  double t_stage_beta = 1.0;
  double censoring_rate = 0.3;
  // Exponential baseline hazard per month.
  double baseline_hazard_scale = 1.0 / 24.0;
  std::uint64_t seed = 1;
  bool emit_volumes = false;
  VolumeArchetypes archetypes;
  // Fraction of clinical cells blanked after generation.
  double clinical_missing_rate = 0.0;
  int threads = 1;

  void validate() const;
};

struct PatientVolume {
  imgvol::VoxelVolume volume;
  imgvol::RoiMask mask;
};

struct SynthCohort {
  std::vector<std::string> patient_ids;
  std::optional<FeatureTable> radiomics;  // feature mode
  std::vector<PatientVolume> volumes;     // volume mode
  std::vector<double> latent_size;        // volume mode
  std::vector<double> latent_heterogeneity;
  io::CsvTable clinical;  // raw labels as a user would supply them
  std::vector<survcore::SurvivalOutcome> outcomes;
  std::vector<double> linear_predictor;
  std::vector<double> true_risk;  // exp(linear_predictor)
  double censoring_horizon = 0.0;  // Uniform(0, c) follow-up bound
  double achieved_censoring = 0.0;

  nlohmann::json truth(const SynthSpec& spec) const;
};

// Population moments of the T-stage code under the cohort proportions.
double t_stage_mean();
double t_stage_sd();

SynthCohort gen_cohort(const SynthSpec& spec);

// Feature mode: features.csv; volume mode: volumes/ plus manifest.csv.
// Always clinical.csv, outcomes.csv and truth.json.
void write_cohort(const std::filesystem::path& dir, const SynthCohort& cohort,
                  const SynthSpec& spec);

}  // namespace rfs::synthgen
