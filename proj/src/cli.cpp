#include "rfs/cli.hpp"

#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "rfs/clinical.hpp"
#include "rfs/config.hpp"
#include "rfs/error.hpp"
#include "rfs/io.hpp"
#include "rfs/parallel.hpp"
#include "rfs/pipeline.hpp"
#include "rfs/radfeat.hpp"
#include "rfs/synthgen.hpp"

namespace rfs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::string> features, manifest, clinical, outcomes, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> combine_mode;
  std::optional<double> spearman_cutoff;
  std::optional<int> repeats, folds, threads;
  bool no_gas = false;
};

RunConfig resolve_config(const std::string& config_path, const Overrides& o) {
  RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
  if (o.features) c.paths.features = *o.features;
  if (o.manifest) c.paths.manifest = *o.manifest;
  if (o.clinical) c.paths.clinical = *o.clinical;
  if (o.outcomes) c.paths.outcomes = *o.outcomes;
  if (o.out) c.paths.output_dir = *o.out;
  if (o.seed) c.master_seed = *o.seed;
  if (o.combine_mode) c.combine_mode = pipeline::combine_mode_from_string(*o.combine_mode);
  if (o.spearman_cutoff) c.spearman_cutoff = *o.spearman_cutoff;
  if (o.repeats) c.repeats = *o.repeats;
  if (o.folds) c.folds = *o.folds;
  if (o.threads) c.threads = *o.threads;
  if (o.no_gas) c.gas_exclusion = false;
  c.validate();
  return c;
}

FeatureTable extract_manifest(const fs::path& manifest, const imgvol::PreprocessConfig& pre,
                              int threads) {
  const auto csv = io::read_csv(manifest);
  const auto ctx = manifest.string();
  const int c_id = csv.require_column("patient_id", ctx);
  const int c_vol = csv.require_column("volume_sidecar", ctx);
  const int c_mask = csv.require_column("mask_sidecar", ctx);
  if (csv.rows.empty()) throw DataError(ctx + ": empty file");
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? base / p : fs::path(p); };

  const int n = static_cast<int>(csv.rows.size());
  std::vector<radfeat::FeatureVector> rows(n);
  parallel_for(n, threads, [&](int i) {
    const auto& row = csv.rows[i];
    try {
      const auto vol = imgvol::load_volume(resolve(row[c_vol]));
      const auto mask = imgvol::load_mask(resolve(row[c_mask]));
      rows[i] = radfeat::extract_all(vol, mask, pre);
    } catch (const std::exception& e) {
      throw DataError(fmt::format("patient '{}': {}", row[c_id], e.what()));
    }
  });
  const auto names = radfeat::feature_registry();
  std::vector<std::string> ids;
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(names.size()));
  for (int i = 0; i < n; ++i) {
    ids.push_back(csv.rows[i][c_id]);
    for (std::size_t j = 0; j < names.size(); ++j) x(i, j) = rows[i].at(names[j]);
  }
  spdlog::info("extracted {} features for {} patients", names.size(), n);
  return FeatureTable(std::move(ids), names, std::move(x), Provenance::Radiomics);
}

std::vector<clinical::FieldSpec> registry_for(const RunConfig& c) {
  auto reg = clinical::default_registry();
  for (const auto& [field, labels] : c.clinical_levels) clinical::override_levels(reg, field, labels);
  return reg;
}

void write_metrics(const fs::path& dir, const pipeline::MetricsReport& report) {
  const auto j = report.to_json();
  io::write_file_atomic(dir / "metrics.json", j.dump(2) + "\n");
  io::write_file_atomic(dir / "km_curves.csv", pipeline::km_curves_csv_from_json(j));
  io::write_file_atomic(dir / "roc_points.csv", pipeline::roc_points_csv_from_json(j));
}

void log_summary(const pipeline::MetricsReport& report) {
  for (const auto& m : report.models) {
    if (m.c_index)
      spdlog::info("{}: C-index {:.4f}", pipeline::to_string(m.kind), *m.c_index);
    else
      spdlog::info("{}: C-index undefined", pipeline::to_string(m.kind));
  }
}

int cmd_extract(const std::string& config_path, const Overrides& o) {
  auto c = resolve_config(config_path, o);
  if (c.paths.manifest.empty()) throw CLI::RequiredError("--manifest");
  const fs::path out = c.paths.features.empty() ? fs::path("features.csv") : fs::path(c.paths.features);
  const auto table = extract_manifest(c.paths.manifest, c.preprocess(), c.threads);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_file_atomic(out, table.to_csv());
  return 0;
}

int cmd_run(const std::string& config_path, const Overrides& o) {
  auto c = resolve_config(config_path, o);
  if (c.paths.features.empty() == c.paths.manifest.empty())
    throw CLI::ValidationError("run", "exactly one of --features or --manifest is required");
  if (c.paths.clinical.empty()) throw CLI::RequiredError("--clinical");
  if (c.paths.outcomes.empty()) throw CLI::RequiredError("--outcomes");
  if (c.paths.output_dir.empty()) throw CLI::RequiredError("--out");
  const fs::path dir = c.paths.output_dir;

  auto outcomes = clinical::read_outcomes(c.paths.outcomes);
  std::vector<std::string> ids;
  for (const auto& oc : outcomes) ids.push_back(oc.patient_id);

  std::optional<FeatureTable> rad_raw;
  if (!c.paths.manifest.empty())
    rad_raw = extract_manifest(c.paths.manifest, c.preprocess(), c.threads);
  else
    rad_raw = FeatureTable::from_csv(c.paths.features, Provenance::Radiomics);
  const auto rad = rad_raw->align_rows(ids);
  const auto enc = clinical::ingest_clinical(io::read_csv(c.paths.clinical), registry_for(c),
                                             c.paths.clinical);
  const auto clin = enc.table.align_rows(ids);
  if (rad.rows() != ids.size() || clin.rows() != ids.size())
    throw DataError("feature tables contain patients without outcomes");

  std::vector<bool> events;
  for (const auto& oc : outcomes) events.push_back(oc.event);
  const auto plan = pipeline::make_cv_plan(ids, c.master_seed, c.folds, c.repeats,
                                           c.stratified_folds ? &events : nullptr);
  spdlog::info("running {}x{} nested CV on {} patients ({} radiomics, {} clinical features)",
               c.repeats, c.folds, ids.size(), rad.cols(), clin.cols());
  const auto result = pipeline::run_nested_cv(rad, clin, outcomes, plan, c.pipeline_config());

  std::map<pipeline::ModelKind, std::vector<double>> means;
  for (auto k : pipeline::kModelKinds) means[k] = result.predictions.mean(k);
  const auto report = pipeline::evaluate_full(means, outcomes, c.evaluate_options());

  fs::create_directories(dir);
  if (rad_raw && !c.paths.manifest.empty()) io::write_file_atomic(dir / "features.csv", rad.to_csv());
  io::write_file_atomic(dir / "clinical_encoded.csv", clin.to_csv());
  io::write_file_atomic(dir / "clinical_encoding.json", enc.report.dump(2) + "\n");
  io::write_file_atomic(dir / "predictions.csv", result.predictions.to_csv());
  io::write_file_atomic(dir / "selection_trace.json",
                        pipeline::traces_to_json(result.traces).dump(2) + "\n");
  io::write_file_atomic(
      dir / "occurrence_report.json",
      pipeline::to_json(pipeline::feature_occurrence_report(result.traces)).dump(2) + "\n");
  write_metrics(dir, report);
  auto cfg_out = c.to_json();
  cfg_out.erase("threads");
  io::write_file_atomic(dir / "run_config.json", cfg_out.dump(2) + "\n");
  log_summary(report);
  return 0;
}

int cmd_evaluate(const std::string& config_path, const Overrides& o, const std::string& predictions) {
  auto c = resolve_config(config_path, o);
  if (c.paths.outcomes.empty()) throw CLI::RequiredError("--outcomes");
  if (c.paths.output_dir.empty()) throw CLI::RequiredError("--out");
  const auto outcomes = clinical::read_outcomes(c.paths.outcomes);
  std::vector<std::string> ids;
  for (const auto& oc : outcomes) ids.push_back(oc.patient_id);
  const auto means = pipeline::PredictionTable::read_means(predictions, ids);
  const auto report = pipeline::evaluate_full(means, outcomes, c.evaluate_options());
  fs::create_directories(c.paths.output_dir);
  write_metrics(c.paths.output_dir, report);
  log_summary(report);
  return 0;
}

int cmd_report(const std::string& metrics_path, const std::string& out) {
  json j;
  try {
    j = json::parse(io::read_file(metrics_path));
    const fs::path dir = out;
    fs::create_directories(dir);
    io::write_file_atomic(dir / "km_curves.csv", pipeline::km_curves_csv_from_json(j));
    io::write_file_atomic(dir / "roc_points.csv", pipeline::roc_points_csv_from_json(j));
  } catch (const json::exception& e) {
    throw DataError(metrics_path + ": " + e.what());
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  auto logger = spdlog::get("rfs");
  if (!logger) logger = spdlog::stderr_logger_mt("rfs");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  CLI::App app{"Radiomics-clinical recurrence-free survival pipeline"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::string config_path;
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--threads", o.threads, "Worker threads");
  };
  auto add_preprocess = [&](CLI::App* sub) {
    sub->add_flag("--no-gas-exclusion", o.no_gas, "Keep voxels below the HU cutoff");
  };

  auto* extract = app.add_subcommand("extract", "Radiomics features from a volume/mask manifest");
  add_common(extract);
  add_preprocess(extract);
  extract->add_option("-m,--manifest", o.manifest, "CSV: patient_id,volume_sidecar,mask_sidecar");
  extract->add_option("-o,--out", o.features, "Output features.csv");

  auto* run = app.add_subcommand("run", "Nested cross-validation and full report");
  add_common(run);
  add_preprocess(run);
  run->add_option("--features", o.features, "Precomputed radiomics features.csv");
  run->add_option("--manifest", o.manifest, "Volume/mask manifest (extracts features)");
  run->add_option("--clinical", o.clinical, "Clinical CSV");
  run->add_option("--outcomes", o.outcomes, "Outcome CSV: patient_id,time_months,event");
  run->add_option("-o,--out", o.out, "Output directory");
  run->add_option("--seed", o.seed, "Master seed");
  run->add_option("--combine-mode", o.combine_mode,
                  "average_predictions | concat_all_features | concat_preselected");
  run->add_option("--spearman-cutoff", o.spearman_cutoff, "Redundancy cutoff");
  run->add_option("--repeats", o.repeats, "Outer CV repeats");
  run->add_option("--folds", o.folds, "Outer CV folds");

  std::string predictions;
  auto* evaluate = app.add_subcommand("evaluate", "Metrics from an existing predictions.csv");
  add_common(evaluate);
  evaluate->add_option("-p,--predictions", predictions, "predictions.csv")->required();
  evaluate->add_option("--outcomes", o.outcomes, "Outcome CSV");
  evaluate->add_option("-o,--out", o.out, "Output directory");

  synthgen::SynthSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("-n,--patients", spec.n_patients, "Number of patients")->capture_default_str();
  synth->add_option("--radiomics", spec.n_radiomics, "Radiomics features (feature mode)")
      ->capture_default_str();
  synth->add_option("--censoring", spec.censoring_rate, "Target censoring fraction")
      ->capture_default_str();
  synth->add_option("--hazard-scale", spec.baseline_hazard_scale, "Baseline hazard per month")
      ->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->add_flag("--volumes", spec.emit_volumes, "Emit voxel volumes and a manifest");
  synth->add_option("--missing-rate", spec.clinical_missing_rate, "Blank clinical cells")
      ->capture_default_str();
  synth->add_option("--threads", spec.threads, "Worker threads");

  std::string metrics_path, report_out;
  auto* report = app.add_subcommand("report", "KM and ROC plot data from metrics.json");
  report->add_option("-m,--metrics", metrics_path, "metrics.json")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cerr << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cerr << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  spdlog::set_level(verbose ? spdlog::level::debug
                            : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*extract) return cmd_extract(config_path, o);
    if (*run) return cmd_run(config_path, o);
    if (*evaluate) return cmd_evaluate(config_path, o, predictions);
    if (*synth) {
      const auto cohort = synthgen::gen_cohort(spec);
      synthgen::write_cohort(synth_out, cohort, spec);
      return 0;
    }
    if (*report) return cmd_report(metrics_path, report_out);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}

}  // namespace rfs
