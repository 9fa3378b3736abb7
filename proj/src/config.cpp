#include "rfs/config.hpp"

#include <cmath>
#include <set>

#include "rfs/error.hpp"
#include "rfs/io.hpp"

namespace rfs {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& key, const std::string& range) {
  if (!ok) throw DataError("config: '" + key + "' must be " + range);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("config: '") + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  require(folds >= 2 && folds <= 50, "folds", "in [2, 50]");
  require(repeats >= 1 && repeats <= 100, "repeats", "in [1, 100]");
  require(inner_folds >= 2 && inner_folds <= 50, "inner_folds", "in [2, 50]");
  require(std::isfinite(hu_cutoff), "hu_cutoff", "finite");
  require(bin_width > 0 && std::isfinite(bin_width), "bin_width", "positive");
  require(c_index_floor >= 0 && c_index_floor <= 1, "c_index_floor", "in [0, 1]");
  require(spearman_cutoff > 0 && spearman_cutoff <= 1, "spearman_cutoff", "in (0, 1]");
  require(max_features >= 1 && max_features <= 1000, "max_features", "in [1, 1000]");
  require(!horizons.empty(), "horizons", "non-empty");
  for (double h : horizons) require(h > 0 && std::isfinite(h), "horizons", "positive");
  require(bootstrap_resamples >= 0 && bootstrap_resamples <= 1000000, "bootstrap_resamples",
          "in [0, 1000000]");
  require(ci_level > 0 && ci_level < 1, "ci_level", "in (0, 1)");
  require(threads >= 1 && threads <= 256, "threads", "in [1, 256]");
}

imgvol::PreprocessConfig RunConfig::preprocess() const {
  return {gas_exclusion, hu_cutoff, bin_width};
}

pipeline::PipelineConfig RunConfig::pipeline_config() const {
  pipeline::PipelineConfig p;
  p.screen.c_index_floor = c_index_floor;
  p.screen.spearman_cutoff = spearman_cutoff;
  p.screen.max_features = max_features;
  p.inner_folds = inner_folds;
  p.mode = combine_mode;
  p.threads = threads;
  return p;
}

pipeline::EvaluateOptions RunConfig::evaluate_options() const {
  pipeline::EvaluateOptions e;
  e.horizons = horizons;
  e.bootstrap.resamples = bootstrap_resamples;
  e.bootstrap.level = ci_level;
  e.bootstrap.seed = pipeline::derive_seed(master_seed, {7});
  return e;
}

json RunConfig::to_json() const {
  return {{"master_seed", master_seed},
          {"folds", folds},
          {"repeats", repeats},
          {"inner_folds", inner_folds},
          {"gas_exclusion", gas_exclusion},
          {"hu_cutoff", hu_cutoff},
          {"bin_width", bin_width},
          {"c_index_floor", c_index_floor},
          {"spearman_cutoff", spearman_cutoff},
          {"max_features", max_features},
          {"horizons", horizons},
          {"combine_mode", pipeline::to_string(combine_mode)},
          {"bootstrap_resamples", bootstrap_resamples},
          {"ci_level", ci_level},
          {"stratified_folds", stratified_folds},
          {"threads", threads},
          {"clinical_levels", clinical_levels},
          {"paths",
           {{"features", paths.features},
            {"manifest", paths.manifest},
            {"clinical", paths.clinical},
            {"outcomes", paths.outcomes},
            {"output_dir", paths.output_dir}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw DataError("config: top level must be an object");
  static const std::set<std::string> known = {
      "master_seed",     "folds",           "repeats",          "inner_folds",
      "gas_exclusion",   "hu_cutoff",       "bin_width",        "c_index_floor",
      "spearman_cutoff", "max_features",    "horizons",         "combine_mode",
      "bootstrap_resamples", "ci_level",    "stratified_folds", "threads",
      "clinical_levels", "paths"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw DataError("config: unknown key '" + it.key() + "'");
  RunConfig c;
  read(j, "master_seed", c.master_seed);
  read(j, "folds", c.folds);
  read(j, "repeats", c.repeats);
  read(j, "inner_folds", c.inner_folds);
  read(j, "gas_exclusion", c.gas_exclusion);
  read(j, "hu_cutoff", c.hu_cutoff);
  read(j, "bin_width", c.bin_width);
  read(j, "c_index_floor", c.c_index_floor);
  read(j, "spearman_cutoff", c.spearman_cutoff);
  read(j, "max_features", c.max_features);
  read(j, "horizons", c.horizons);
  if (j.contains("combine_mode")) {
    std::string m;
    read(j, "combine_mode", m);
    c.combine_mode = pipeline::combine_mode_from_string(m);
  }
  read(j, "bootstrap_resamples", c.bootstrap_resamples);
  read(j, "ci_level", c.ci_level);
  read(j, "stratified_folds", c.stratified_folds);
  read(j, "threads", c.threads);
  read(j, "clinical_levels", c.clinical_levels);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    if (!p.is_object()) throw DataError("config: 'paths' must be an object");
    static const std::set<std::string> path_keys = {"features", "manifest", "clinical",
                                                    "outcomes", "output_dir"};
    for (auto it = p.begin(); it != p.end(); ++it)
      if (!path_keys.count(it.key())) throw DataError("config: unknown key 'paths." + it.key() + "'");
    read(p, "features", c.paths.features);
    read(p, "manifest", c.paths.manifest);
    read(p, "clinical", c.paths.clinical);
    read(p, "outcomes", c.paths.outcomes);
    read(p, "output_dir", c.paths.output_dir);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  auto c = from_json(j);
  // Relative input/output paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&c.paths.features, &c.paths.manifest, &c.paths.clinical, &c.paths.outcomes,
                  &c.paths.output_dir}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  }
  return c;
}

}  // namespace rfs
