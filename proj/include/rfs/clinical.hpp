#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfs/feature_table.hpp"
#include "rfs/io.hpp"
#include "rfs/survcore.hpp"

namespace rfs::clinical {

struct Level {
  int code = 0;
  std::vector<std::string> labels;  // matched case-insensitively
};

struct FieldSpec {
  std::string name;
  bool categorical = false;
  std::vector<Level> levels;  // in documented order; ties in mode imputation go to the earlier one
};

// Ordinal integer codes:
//   gender male=0 female=1; hiv_status no=0 yes=1; smoking_status never=0
//   former=1 current=2; t_stage T1..T4=1..4; n_stage N0..N3=0..3; nodal
//   sites (inguinal, mesorectal, external iliac, internal iliac) no=0 yes=1.
//   age_years and cd4_count are numeric.
std::vector<FieldSpec> default_registry();

// Replaces the label order of one categorical field; codes restart at the
// field's first code.
void override_levels(std::vector<FieldSpec>& registry, const std::string& field,
                     const std::vector<std::string>& labels_in_order);

struct Imputation {
  std::string patient_id;
  std::string field;
  double value = 0.0;
};

struct EncodedClinical {
  FeatureTable table;
  std::vector<Imputation> imputations;
  nlohmann::json report;  // codes per field plus every imputation
};

// Missing markers: empty, NA, N/A, NaN, missing, ? (case-insensitive).
// Categorical cells accept a registered label or its integer code.
// Numeric missing -> column median; categorical missing -> column mode.
EncodedClinical ingest_clinical(const io::CsvTable& csv, const std::vector<FieldSpec>& registry,
                                const std::string& context = "clinical");
EncodedClinical ingest_clinical(const std::filesystem::path& path,
                                const std::vector<FieldSpec>& registry = default_registry());

std::string outcomes_to_csv(const std::vector<survcore::SurvivalOutcome>& outcomes);
// patient_id,time_months,event with event in {0,1}.
std::vector<survcore::SurvivalOutcome> read_outcomes(const std::filesystem::path& path);

}  // namespace rfs::clinical
