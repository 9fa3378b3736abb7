#include "rfs/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rfs/clinical.hpp"
#include "rfs/error.hpp"
#include "rfs/parallel.hpp"
#include "rfs/pipeline.hpp"

namespace rfs::synthgen {

using nlohmann::json;

namespace {

// Cohort proportions (n = 96); n_stage drops the one unavailable record.
constexpr std::array<double, 2> kGender = {62, 34};          // male, female
constexpr std::array<double, 3> kSmoking = {30, 30, 36};     // never, former, current
constexpr std::array<double, 4> kTStage = {15, 34, 32, 15};  // T1..T4
constexpr std::array<double, 4> kNStage = {36, 34, 2, 23};   // N0..N3
constexpr double kAgeMean = 54.5, kAgeSd = 12.1;
constexpr double kCd4Mean = 1000.0, kCd4Sd = 388.56;

template <std::size_t N>
int draw(std::mt19937_64& rng, const std::array<double, N>& weights) {
  std::discrete_distribution<int> d(weights.begin(), weights.end());
  return d(rng);
}

std::string patient_id(int i, int n) {
  const int width = std::max(3, static_cast<int>(std::to_string(n).size()));
  return fmt::format("P{:0{}d}", i + 1, width);
}

PatientVolume make_volume(double size_z, double het_z, const VolumeArchetypes& a,
                          std::mt19937_64& rng) {
  const double r = std::clamp(a.base_radius_mm + a.radius_sd_mm * size_z, 3.0, 16.0);
  const std::array<double, 3> semi = {1.3 * r, 1.1 * r, r};
  const std::array<double, 3> sp = {a.spacing.x, a.spacing.y, a.spacing.z};
  std::array<int, 3> n{};
  for (int k = 0; k < 3; ++k) n[k] = static_cast<int>(std::ceil(2.0 * semi[k] / sp[k])) + 5;
  imgvol::Dims dims{n[0], n[1], n[2]};
  std::array<double, 3> centre{};
  for (int k = 0; k < 3; ++k) centre[k] = (n[k] - 1) * sp[k] / 2.0;

  std::normal_distribution<double> noise(0.0, 8.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = 1.0 / (1.0 + std::exp(-1.5 * het_z));
  const bool gas = unit(rng) < a.gas_pocket_probability;
  const double gas_r = 0.3 * r;
  const std::array<double, 3> gas_c = {centre[0] + 0.3 * semi[0], centre[1], centre[2]};

  std::vector<double> hu(dims.count());
  std::vector<std::uint8_t> mask(dims.count(), 0);
  for (int z = 0; z < n[2]; ++z) {
    for (int y = 0; y < n[1]; ++y) {
      for (int x = 0; x < n[0]; ++x) {
        const std::array<double, 3> p = {x * sp[0], y * sp[1], z * sp[2]};
        double q = 0.0;
        for (int k = 0; k < 3; ++k) q += std::pow((p[k] - centre[k]) / semi[k], 2);
        const auto idx = dims.index(x, y, z);
        double v;
        if (q <= 1.0) {
          mask[idx] = 1;
          const double checker = ((x + y + z) % 2 == 0) ? 1.0 : -1.0;
          const double smooth = 20.0 * std::sin(x / 4.0) * std::cos(y / 5.0);
          v = 40.0 + w * 60.0 * checker + (1.0 - w) * smooth + noise(rng);
          if (gas) {
            double d2 = 0.0;
            for (int k = 0; k < 3; ++k) d2 += std::pow(p[k] - gas_c[k], 2);
            if (d2 <= gas_r * gas_r) v = -700.0 + 2.5 * noise(rng);
          }
        } else {
          v = -80.0 + 1.25 * noise(rng);
        }
        hu[idx] = std::round(v);
      }
    }
  }
  return {imgvol::VoxelVolume(dims, a.spacing, std::move(hu)), imgvol::RoiMask(dims, std::move(mask))};
}

}  // namespace

void SynthSpec::validate() const {
  if (n_patients < 20) throw DataError("n_patients must be >= 20");
  if (!(censoring_rate >= 0.0 && censoring_rate < 1.0))
    throw DataError("censoring_rate must lie in [0, 1)");
  if (!(baseline_hazard_scale > 0.0)) throw DataError("baseline_hazard_scale must be positive");
  if (!emit_volumes) {
    if (n_radiomics < 1 || n_radiomics > 1000) throw DataError("n_radiomics must lie in [1, 1000]");
    for (const auto& [name, beta] : radiomics_beta) {
      bool known = false;
      for (int j = 0; j < n_radiomics; ++j) known |= name == fmt::format("rad_{:02d}", j);
      if (!known) throw DataError("coefficient for unknown radiomics feature '" + name + "'");
      if (!std::isfinite(beta)) throw DataError("non-finite coefficient for '" + name + "'");
    }
  }
  if (!(clinical_missing_rate >= 0.0 && clinical_missing_rate < 1.0))
    throw DataError("clinical_missing_rate must lie in [0, 1)");
  if (archetypes.spacing.x <= 0 || archetypes.spacing.y <= 0 || archetypes.spacing.z <= 0)
    throw DataError("nonpositive spacing");
}

double t_stage_mean() {
  double s = 0, m = 0;
  for (std::size_t k = 0; k < kTStage.size(); ++k) {
    s += kTStage[k];
    m += kTStage[k] * static_cast<double>(k + 1);
  }
  return m / s;
}

double t_stage_sd() {
  const double mean = t_stage_mean();
  double s = 0, v = 0;
  for (std::size_t k = 0; k < kTStage.size(); ++k) {
    s += kTStage[k];
    v += kTStage[k] * std::pow(static_cast<double>(k + 1) - mean, 2);
  }
  return std::sqrt(v / s);
}

SynthCohort gen_cohort(const SynthSpec& spec) {
  spec.validate();
  const int n = spec.n_patients;
  SynthCohort c;
  for (int i = 0; i < n; ++i) c.patient_ids.push_back(patient_id(i, n));

  // Clinical rows and the T-stage contribution.
  c.clinical.header = {"patient_id", "gender",         "age_years", "cd4_count",
                       "smoking_status", "t_stage", "n_stage"};
  const std::array<const char*, 3> smoking = {"never", "former", "current"};
  std::vector<double> eta(n, 0.0);
  const double tm = t_stage_mean(), tsd = t_stage_sd();
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(pipeline::derive_seed(spec.seed, {1, static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> z(0.0, 1.0);
    const int gender = draw(rng, kGender);
    const double age = std::clamp(std::round(kAgeMean + kAgeSd * z(rng)), 18.0, 95.0);
    const double cd4 = std::max(50.0, std::round(kCd4Mean + kCd4Sd * z(rng)));
    const int smoke = draw(rng, kSmoking);
    const int t = draw(rng, kTStage) + 1;
    const int nst = draw(rng, kNStage);
    eta[i] += spec.t_stage_beta * (t - tm) / tsd;
    std::vector<std::string> row = {c.patient_ids[i], gender == 0 ? "male" : "female",
                                    io::format_double(age), io::format_double(cd4),
                                    smoking[smoke], fmt::format("T{}", t), fmt::format("N{}", nst)};
    if (spec.clinical_missing_rate > 0.0) {
      std::mt19937_64 mrng(pipeline::derive_seed(spec.seed, {3, static_cast<std::uint64_t>(i)}));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t k = 1; k < row.size(); ++k)
        if (u(mrng) < spec.clinical_missing_rate) row[k] = "";
    }
    c.clinical.rows.push_back(std::move(row));
  }

  if (spec.emit_volumes) {
    c.volumes.resize(n);
    c.latent_size.resize(n);
    c.latent_heterogeneity.resize(n);
    parallel_for(n, spec.threads, [&](int i) {
      std::mt19937_64 rng(pipeline::derive_seed(spec.seed, {2, static_cast<std::uint64_t>(i)}));
      std::normal_distribution<double> z(0.0, 1.0);
      c.latent_size[i] = z(rng);
      c.latent_heterogeneity[i] = z(rng);
      c.volumes[i] = make_volume(c.latent_size[i], c.latent_heterogeneity[i], spec.archetypes, rng);
    });
    for (int i = 0; i < n; ++i)
      eta[i] += spec.archetypes.size_beta * c.latent_size[i] +
                spec.archetypes.heterogeneity_beta * c.latent_heterogeneity[i];
  } else {
    Eigen::MatrixXd x(n, spec.n_radiomics);
    std::vector<std::string> names;
    for (int j = 0; j < spec.n_radiomics; ++j) names.push_back(fmt::format("rad_{:02d}", j));
    for (int i = 0; i < n; ++i) {
      std::mt19937_64 rng(pipeline::derive_seed(spec.seed, {2, static_cast<std::uint64_t>(i)}));
      std::normal_distribution<double> z(0.0, 1.0);
      for (int j = 0; j < spec.n_radiomics; ++j) x(i, j) = z(rng);
    }
    for (const auto& [name, beta] : spec.radiomics_beta) {
      const auto j = std::find(names.begin(), names.end(), name) - names.begin();
      for (int i = 0; i < n; ++i) eta[i] += beta * x(i, j);
    }
    c.radiomics = FeatureTable(c.patient_ids, names, std::move(x), Provenance::Radiomics);
  }

  // Exponential event times, then uniform follow-up scaled to the target rate.
  std::vector<double> t_event(n), u_follow(n);
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(pipeline::derive_seed(spec.seed, {4, static_cast<std::uint64_t>(i)}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double ue = 1.0 - u(rng);  // (0, 1]
    t_event[i] = -std::log(ue) / (spec.baseline_hazard_scale * std::exp(eta[i]));
    if (t_event[i] <= 0.0) t_event[i] = std::numeric_limits<double>::min();
    u_follow[i] = 1.0 - u(rng);
  }
  // Patient i is censored iff u_i * c < T_i, i.e. c < T_i / u_i.
  std::vector<double> thresholds(n);
  for (int i = 0; i < n; ++i) thresholds[i] = t_event[i] / u_follow[i];
  std::sort(thresholds.begin(), thresholds.end());
  const int k = static_cast<int>(std::lround(spec.censoring_rate * n));
  if (k == 0) {
    c.censoring_horizon = std::numeric_limits<double>::infinity();
  } else if (k >= n) {
    c.censoring_horizon = thresholds.front() / 2.0;
  } else {
    c.censoring_horizon = (thresholds[n - k - 1] + thresholds[n - k]) / 2.0;
  }
  int censored = 0;
  for (int i = 0; i < n; ++i) {
    const double follow = u_follow[i] * c.censoring_horizon;
    const bool event = !(follow < t_event[i]);
    censored += event ? 0 : 1;
    c.outcomes.push_back({c.patient_ids[i], event ? t_event[i] : follow, event});
  }
  c.achieved_censoring = static_cast<double>(censored) / n;
  if (std::abs(c.achieved_censoring - spec.censoring_rate) > 0.05)
    throw DataError(fmt::format("censoring rate {} unreachable: achieved {}", spec.censoring_rate,
                                c.achieved_censoring));
  c.linear_predictor = eta;
  for (double e : eta) c.true_risk.push_back(std::exp(e));
  return c;
}

json SynthCohort::truth(const SynthSpec& spec) const {
  json j;
  j["seed"] = spec.seed;
  j["n_patients"] = spec.n_patients;
  j["mode"] = spec.emit_volumes ? "volumes" : "features";
  j["baseline_hazard_scale"] = spec.baseline_hazard_scale;
  j["censoring_rate_target"] = spec.censoring_rate;
  j["censoring_rate_achieved"] = achieved_censoring;
  j["censoring_horizon"] =
      std::isfinite(censoring_horizon) ? json(censoring_horizon) : json(nullptr);
  json beta = json::object();
  json informative_rad = json::array();
  if (spec.emit_volumes) {
    beta["latent_size"] = spec.archetypes.size_beta;
    beta["latent_heterogeneity"] = spec.archetypes.heterogeneity_beta;
  } else {
    for (const auto& [name, b] : spec.radiomics_beta) {
      beta[name] = b;
      if (b != 0.0) informative_rad.push_back(name);
    }
  }
  beta["t_stage_per_sd"] = spec.t_stage_beta;
  beta["t_stage_per_code"] = spec.t_stage_beta / t_stage_sd();
  j["beta"] = beta;
  j["t_stage_population"] = {{"mean", t_stage_mean()}, {"sd", t_stage_sd()}};
  j["informative_radiomics"] = informative_rad;
  j["informative_clinical"] =
      spec.t_stage_beta != 0.0 ? json::array({"t_stage"}) : json::array();
  json patients = json::array();
  for (std::size_t i = 0; i < patient_ids.size(); ++i) {
    json p = {{"patient_id", patient_ids[i]},
              {"linear_predictor", linear_predictor[i]},
              {"true_risk", true_risk[i]}};
    if (!latent_size.empty()) {
      p["latent_size"] = latent_size[i];
      p["latent_heterogeneity"] = latent_heterogeneity[i];
    }
    patients.push_back(p);
  }
  j["patients"] = patients;
  return j;
}

void write_cohort(const std::filesystem::path& dir, const SynthCohort& cohort,
                  const SynthSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  if (cohort.radiomics) io::write_file_atomic(dir / "features.csv", cohort.radiomics->to_csv());
  if (!cohort.volumes.empty()) {
    fs::create_directories(dir / "volumes");
    std::string manifest = "patient_id,volume_sidecar,mask_sidecar\n";
    for (std::size_t i = 0; i < cohort.volumes.size(); ++i) {
      const auto& id = cohort.patient_ids[i];
      const auto vol = fs::path("volumes") / (id + "_image.json");
      const auto msk = fs::path("volumes") / (id + "_mask.json");
      imgvol::write_volume(dir / vol, cohort.volumes[i].volume);
      imgvol::write_mask(dir / msk, cohort.volumes[i].mask, cohort.volumes[i].volume.spacing());
      manifest += fmt::format("{},{},{}\n", id, vol.generic_string(), msk.generic_string());
    }
    io::write_file_atomic(dir / "manifest.csv", manifest);
  }
  std::string clin;
  for (std::size_t k = 0; k < cohort.clinical.header.size(); ++k)
    clin += (k ? "," : "") + cohort.clinical.header[k];
  clin += "\n";
  for (const auto& row : cohort.clinical.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) clin += (k ? "," : "") + io::csv_escape(row[k]);
    clin += "\n";
  }
  io::write_file_atomic(dir / "clinical.csv", clin);
  io::write_file_atomic(dir / "outcomes.csv", clinical::outcomes_to_csv(cohort.outcomes));
  io::write_file_atomic(dir / "truth.json", cohort.truth(spec).dump(2) + "\n");
  spdlog::info("wrote {} synthetic patients to {}", cohort.patient_ids.size(), dir.string());
}

}  // namespace rfs::synthgen
