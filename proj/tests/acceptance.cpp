// Acceptance criteria 1-11. One PASS/FAIL line per criterion; exit status is
// nonzero when any criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "rfs/clinical.hpp"
#include "rfs/io.hpp"
#include "rfs/metrics.hpp"
#include "rfs/pipeline.hpp"
#include "rfs/radfeat.hpp"
#include "rfs/select.hpp"
#include "rfs/survcore.hpp"
#include "rfs/synthgen.hpp"

using namespace rfs;
using survcore::SurvivalOutcome;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects failures; only the first few messages are kept.
struct Check {
  int failures = 0;
  int checks = 0;
  std::vector<std::string> messages;
  std::vector<std::string> notes;

  void operator()(bool ok, const std::string& what) {
    ++checks;
    if (ok) return;
    ++failures;
    if (messages.size() < 5) messages.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

struct Outcome {
  int id;
  std::string title;
  bool pass;
  double seconds;
};

std::vector<Outcome> results;

template <class Fn>
void criterion(int id, const std::string& title, Fn&& fn) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(c);
  } catch (const std::exception& e) {
    c(false, fmt::format("exception: {}", e.what()));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = c.failures == 0;
  std::cout << fmt::format("{} criterion {:>2}: {} ({} checks, {:.2f} s)\n", pass ? "PASS" : "FAIL", id,
                           title, c.checks, secs);
  for (const auto& n : c.notes) std::cout << "    " << n << "\n";
  for (const auto& m : c.messages) std::cout << "    failed: " << m << "\n";
  std::cout.flush();
  results.push_back({id, title, pass, secs});
}

const radfeat::TextureMatrix& by_direction(const std::vector<radfeat::TextureMatrix>& ms,
                                           radfeat::Offset d) {
  for (const auto& m : ms)
    if (m.direction && oracle::same_axis(*m.direction, d)) return m;
  throw std::runtime_error("direction not found");
}

std::vector<double> column(const Eigen::MatrixXd& x, int k) {
  return {x.col(k).data(), x.col(k).data() + x.rows()};
}

struct SurvCohort {
  Eigen::MatrixXd x;
  std::vector<SurvivalOutcome> o;
};

SurvCohort single_covariate(std::mt19937_64& rng, int n, bool distinct) {
  std::normal_distribution<double> z(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  SurvCohort c;
  c.x.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    c.x(i, 0) = z(rng);
    double t = -std::log(1 - u(rng)) / std::exp(0.8 * c.x(i, 0));
    if (!distinct) t = std::ceil(t * 3) / 3;
    const double cens = 3.0 * u(rng);
    c.o.push_back({"p" + std::to_string(i), std::min(t, cens), t <= cens});
  }
  return c;
}

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = fmt::format("\"{}\" {} 2>\"{}\" >/dev/null", RFS_CLI_PATH, args, err.string());
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::vector<std::string> keys(const json& j) {
  std::vector<std::string> k;
  if (j.is_object())
    for (auto it = j.begin(); it != j.end(); ++it) k.push_back(it.key());
  return k;
}

// Rows of predictions.csv for one model kind, keyed by (patient, repeat).
std::map<std::pair<std::string, std::string>, std::string> prediction_rows(const fs::path& path,
                                                                           const std::string& kind) {
  const auto csv = io::read_csv(path);
  std::map<std::pair<std::string, std::string>, std::string> out;
  for (const auto& r : csv.rows)
    if (r[2] == kind) out[{r[0], r[1]}] = r[3];
  return out;
}

struct PlantedRun {
  synthgen::SynthCohort cohort;
  FeatureTable rad, clin;
  pipeline::CvPlan plan;
  pipeline::NestedCvResult result;
};

std::optional<PlantedRun> planted;

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);

  criterion(1, "texture matrices equal brute-force enumeration (100 ROIs <= 6^3, Ng <= 5, < 10 s)",
            [](Check& c) {
              const auto t0 = std::chrono::steady_clock::now();
              std::mt19937_64 rng(1001);
              for (int trial = 0; trial < 100; ++trial) {
                const auto r = oracle::random_roi(rng, 6, 5);
                c(r.roi.num_levels <= 5, "Ng above 5");
                const auto glcm = radfeat::build_glcm(r.roi);
                const auto glrlm = radfeat::build_glrlm(r.roi);
                for (const auto& d : oracle::half_neighborhood()) {
                  c(oracle::sparse(by_direction(glcm, d)) == oracle::glcm(r.roi, d),
                    fmt::format("GLCM roi {} direction ({},{},{})", trial, d[0], d[1], d[2]));
                  c(oracle::sparse(by_direction(glrlm, d)) == oracle::glrlm(r.roi, d),
                    fmt::format("GLRLM roi {} direction ({},{},{})", trial, d[0], d[1], d[2]));
                }
                c(oracle::sparse(radfeat::build_glszm(r.roi)) == oracle::glszm(r.roi),
                  fmt::format("GLSZM roi {}", trial));
                c(oracle::sparse(radfeat::build_gldm(r.roi)) == oracle::gldm(r.roi),
                  fmt::format("GLDM roi {}", trial));
              }
              const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
              c(s < 10.0, fmt::format("runtime {:.2f} s", s));
            });

  criterion(2, "mass conservation of GLRLM, GLSZM and GLDM", [](Check& c) {
    std::mt19937_64 rng(1002);
    for (int trial = 0; trial < 100; ++trial) {
      const auto r = oracle::random_roi(rng, 6, 5);
      const auto n = static_cast<std::int64_t>(r.roi.voxel_count());
      for (const auto& m : radfeat::build_glrlm(r.roi)) {
        std::int64_t mass = 0;
        for (int i = 1; i <= m.rows; ++i)
          for (int j = 1; j <= m.cols; ++j) mass += j * m.at(i, j);
        c(mass == n, fmt::format("GLRLM mass {} != {}", mass, n));
      }
      const auto z = radfeat::build_glszm(r.roi);
      std::int64_t zmass = 0;
      for (int i = 1; i <= z.rows; ++i)
        for (int j = 1; j <= z.cols; ++j) zmass += j * z.at(i, j);
      c(zmass == n, fmt::format("GLSZM mass {} != {}", zmass, n));
      c(radfeat::build_gldm(r.roi).total() == n, "GLDM total");
    }
  });

  criterion(3, "Cox fit: grid oracle, gradient, equivariance, Efron = Breslow (< 30 s)", [](Check& c) {
    using namespace survcore;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1003);
    std::normal_distribution<double> z(0, 1);
    CoxOptions raw;
    raw.standardize = false;
    double worst_grid = 0, worst_grad = 0, worst_fd = 0, worst_eq = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = single_covariate(rng, 20, trial % 2 == 0);
      const auto xs = column(s.x, 0);
      for (bool efron : {true, false}) {
        raw.ties = efron ? TieMethod::Efron : TieMethod::Breslow;
        const auto m = fit_cox(s.x, s.o, {"x"}, raw);
        const double grid =
            oracle::grid_argmax([&](double b) { return oracle::loglik_1d(xs, s.o, b, efron); }, 10);
        worst_grid = std::max(worst_grid, std::abs(m.beta[0] - grid));
        const auto at = partial_likelihood(s.x, s.o, m.beta, raw.ties);
        worst_grad = std::max(worst_grad, std::abs(at.gradient[0]));

        Eigen::VectorXd b(1);
        b << 0.5 * z(rng);
        const double h = 1e-5;
        Eigen::VectorXd up = b, dn = b;
        up[0] += h;
        dn[0] -= h;
        const double fd = (partial_likelihood(s.x, s.o, up, raw.ties).log_likelihood -
                           partial_likelihood(s.x, s.o, dn, raw.ties).log_likelihood) /
                          (2 * h);
        worst_fd = std::max(worst_fd, std::abs(fd - partial_likelihood(s.x, s.o, b, raw.ties).gradient[0]));

        const auto neg = fit_cox(-s.x, s.o, {"x"}, raw);
        worst_eq = std::max(worst_eq, std::abs(neg.beta[0] + m.beta[0]));
        for (double scale : {0.1, 3.0, 250.0}) {
          const auto sc = fit_cox(scale * s.x, s.o, {"x"}, raw);
          worst_eq = std::max(worst_eq, std::abs(sc.beta[0] - m.beta[0] / scale));
        }
      }
      if (trial % 2 == 0) {
        Eigen::VectorXd b(1);
        b << z(rng);
        const auto e = partial_likelihood(s.x, s.o, b, TieMethod::Efron);
        const auto br = partial_likelihood(s.x, s.o, b, TieMethod::Breslow);
        c(e.log_likelihood == br.log_likelihood && e.gradient == br.gradient && e.hessian == br.hessian,
          fmt::format("Efron != Breslow on distinct times (cohort {})", trial));
      }
    }
    c(worst_grid < 1e-3, fmt::format("grid deviation {:g}", worst_grid));
    c(worst_grad < 1e-6, fmt::format("gradient at estimate {:g}", worst_grad));
    c(worst_fd < 1e-4, fmt::format("finite-difference mismatch {:g}", worst_fd));
    c(worst_eq < 1e-8, fmt::format("equivariance error {:g}", worst_eq));
    c.note(fmt::format("max |beta - grid| {:.2e}, max |grad| {:.2e}, max FD error {:.2e}, max equivariance error {:.2e}",
                       worst_grid, worst_grad, worst_fd, worst_eq));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c(secs < 30.0, fmt::format("runtime {:.2f} s", secs));
  });

  criterion(4, "C-index equals pairwise oracle; invariant under increasing transforms", [](Check& c) {
    std::mt19937_64 rng(1004);
    std::uniform_int_distribution<int> size(10, 200);
    std::normal_distribution<double> z(0, 12);
    int cohorts = 0;
    while (cohorts < 50) {
      const auto o = oracle::random_outcomes(rng, size(rng), 0.35, cohorts % 3 == 0);
      std::vector<double> p;
      for (const auto& x : o) {
        double v = x.time + z(rng);
        if (cohorts % 2 == 0) v = std::round(v / 5.0);
        p.push_back(v);
      }
      const double ref = oracle::c_index(p, o);
      if (std::isnan(ref)) continue;
      ++cohorts;
      const double got = metrics::concordance_index(p, o);
      c(got == ref, fmt::format("cohort {}: {} vs oracle {}", cohorts, got, ref));
      std::vector<double> t;
      for (double v : p) t.push_back(std::exp(v / 20.0) * 3.0 + 1.0);
      c(metrics::concordance_index(t, o) == got, fmt::format("cohort {}: transform changed C", cohorts));
    }
  });

  criterion(5, "Kaplan-Meier worked cases; log-rank O/E/V", [](Check& c) {
    using namespace survcore;
    const std::vector<SurvivalOutcome> all = {{"a", 1, true}, {"b", 2, true}, {"c", 3, true}};
    auto km = km_estimate(all);
    c(km.survival_at(1) == 2.0 / 3.0 && km.survival_at(2) == 1.0 / 3.0 && km.survival_at(3) == 0.0,
      "all events case");
    const std::vector<SurvivalOutcome> mid = {{"a", 1, true}, {"b", 2, false}, {"c", 3, true}};
    km = km_estimate(mid);
    c(km.survival_at(1) == 2.0 / 3.0 && km.survival_at(3) == 0.0, "censored middle case");
    const std::vector<SurvivalOutcome> none = {{"a", 1, false}, {"b", 2, false}, {"c", 3, false}};
    for (const auto& p : km_estimate(none).points) c(p.survival == 1.0, "no events case");

    std::mt19937_64 rng(1005);
    for (int trial = 0; trial < 50; ++trial) {
      auto a = oracle::random_outcomes(rng, 10, 0.3, trial % 2 == 0);
      auto b = oracle::random_outcomes(rng, 10, 0.3, trial % 2 == 0);
      for (auto& o : b) o.time *= 1.4;
      const auto same = logrank_test(a, a);
      c(std::abs(same.chi_square) < 1e-12 && std::abs(same.p_value - 1.0) < 1e-12,
        fmt::format("duplicated groups chi2 {}", same.chi_square));
      const auto r = logrank_test(a, b);
      const auto ref = oracle::logrank(a, b);
      const double chi = std::pow(ref.observed - ref.expected, 2) / ref.variance;
      c(std::abs(r.observed_a - ref.observed) < 1e-10 && std::abs(r.expected_a - ref.expected) < 1e-10 &&
            std::abs(r.variance - ref.variance) < 1e-10 && std::abs(r.chi_square - chi) < 1e-10,
        fmt::format("O/E/V mismatch trial {}", trial));
    }
  });

  criterion(6, "AUC equals Mann-Whitney; confusion metrics equal recount", [](Check& c) {
    std::mt19937_64 rng(1006);
    std::normal_distribution<double> z(0, 10);
    int done = 0;
    while (done < 100) {
      auto o = oracle::random_outcomes(rng, 40 + done, 0.3, false);
      if (done % 2 == 0)
        for (auto& x : o) x.time = std::ceil(x.time);
      std::vector<double> p;
      for (const auto& x : o) p.push_back(done % 3 == 0 ? std::round(x.time + z(rng)) : x.time + z(rng));
      metrics::HorizonAssessment h;
      try {
        h = metrics::horizon_assessment(p, o, 12.0 + done % 25);
      } catch (const UndefinedMetric&) {
        continue;
      }
      ++done;
      std::vector<double> risk;
      for (double s : h.scores) risk.push_back(-s);
      const auto roc = metrics::roc_curve(h.labels, risk);
      const double mw = oracle::mann_whitney(h.labels, risk);
      c(std::abs(roc.auc - mw) < 1e-12, fmt::format("assessment {}: AUC {} vs {}", done, roc.auc, mw));

      int tp = 0, fp = 0, tn = 0, fn = 0;
      for (std::size_t i = 0; i < h.scores.size(); ++i) {
        const bool call = h.scores[i] <= h.cutoff;
        tp += call && h.labels[i];
        fp += call && !h.labels[i];
        tn += !call && !h.labels[i];
        fn += !call && h.labels[i];
      }
      const auto m = metrics::confusion_metrics(h);
      c(m.tp == tp && m.fp == fp && m.tn == tn && m.fn == fn, fmt::format("assessment {}: counts", done));
      if (tp + fn > 0) c(*m.sensitivity == double(tp) / (tp + fn), "sensitivity");
      if (tn + fp > 0) c(*m.specificity == double(tn) / (tn + fp), "specificity");
      c(*m.accuracy == double(tp + tn) / (tp + tn + fp + fn), "accuracy");
    }
  });

  criterion(7, "selection: <= 10 chosen, no pruned pair above cutoff, planted predictor first", [](Check& c) {
    std::mt19937_64 rng(1007);
    std::normal_distribution<double> z(0, 1);
    std::uniform_real_distribution<double> u(1, 60);
    int max_chosen = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 80, k = 24;
      std::vector<SurvivalOutcome> o;
      std::vector<std::string> ids;
      for (int i = 0; i < n; ++i) {
        ids.push_back(fmt::format("P{:03}", i));
        o.push_back({ids.back(), u(rng), z(rng) > -0.5});
      }
      o[0].event = true;
      Eigen::MatrixXd x(n, k + 1);
      std::vector<std::string> names;
      for (int j = 0; j < k; ++j) {
        names.push_back(fmt::format("f{:02}", j));
        for (int i = 0; i < n; ++i) {
          // Blocks of three correlated columns, half carrying weak signal.
          const double base = j % 3 == 0 ? z(rng) : x(i, j - j % 3);
          x(i, j) = j % 3 == 0 ? base - (j % 2 ? 0.0 : 0.03 * o[i].time) : base + 0.3 * z(rng);
        }
      }
      names.push_back("planted");
      for (int i = 0; i < n; ++i) x(i, k) = o[i].time;
      const FeatureTable t(ids, names, x, Provenance::Radiomics);
      std::vector<int> rows(n);
      std::iota(rows.begin(), rows.end(), 0);
      const auto splits = select::make_inner_splits(rows, 5, 77 + trial);
      select::ScreenConfig cfg;
      const auto pre = select::preselect(t, o, rows, splits, cfg);
      for (std::size_t a = 0; a < pre.kept.size(); ++a)
        for (std::size_t b = a + 1; b < pre.kept.size(); ++b) {
          const double rho = oracle::spearman(column(x, t.index_of(pre.kept[a])), column(x, t.index_of(pre.kept[b])));
          c(std::abs(rho) <= cfg.spearman_cutoff,
            fmt::format("trial {}: {} and {} survive with rho {}", trial, pre.kept[a], pre.kept[b], rho));
        }
      const auto sel = select::select_features(t, o, rows, splits, cfg);
      c(sel.chosen.size() <= 10, fmt::format("trial {}: {} chosen", trial, sel.chosen.size()));
      max_chosen = std::max<int>(max_chosen, static_cast<int>(sel.chosen.size()));
      c(!sel.chosen.empty() && sel.chosen.front() == "planted",
        fmt::format("trial {}: first chosen '{}'", trial, sel.chosen.empty() ? "" : sel.chosen.front()));
      // The forward path itself never exceeds the ceiling.
      c(sel.trace.forward_path.size() <= 10, "forward path length");
    }
    // Many independent weak signals push the forward path to the ceiling.
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 150, k = 16;
      std::vector<SurvivalOutcome> o;
      std::vector<std::string> ids;
      Eigen::MatrixXd x(n, k);
      std::vector<std::string> names;
      for (int j = 0; j < k; ++j) names.push_back(fmt::format("w{:02}", j));
      for (int i = 0; i < n; ++i) {
        double lp = 0;
        for (int j = 0; j < k; ++j) {
          x(i, j) = z(rng);
          lp += 0.35 * x(i, j);
        }
        ids.push_back(fmt::format("P{:03}", i));
        const double t = -std::log(std::uniform_real_distribution<double>(0, 1)(rng)) * 24.0 / std::exp(lp);
        o.push_back({ids.back(), std::max(t, 1e-3), true});
      }
      const FeatureTable t(ids, names, x, Provenance::Radiomics);
      std::vector<int> rows(n);
      std::iota(rows.begin(), rows.end(), 0);
      const auto splits = select::make_inner_splits(rows, 5, 500 + trial);
      const auto fwd = select::step_forward(t, names, o, splits, {});
      c(fwd.path.size() == 10, fmt::format("weak-signal trial {}: path length {}", trial, fwd.path.size()));
      c(fwd.chosen.size() <= 10, "weak-signal chosen set above 10");
      const auto sel = select::select_features(t, o, rows, splits, {});
      c(sel.chosen.size() <= 10, "weak-signal selection above 10");
      max_chosen = std::max<int>(max_chosen, static_cast<int>(std::max(fwd.chosen.size(), sel.chosen.size())));
    }
    c.note(fmt::format("largest chosen set {}", max_chosen));
  });

  criterion(8, "synthetic recovery: combined C >= 0.65, informative features in >= 60% of 25 fits (< 5 min)",
            [](Check& c) {
              const auto t0 = std::chrono::steady_clock::now();
              synthgen::SynthSpec spec;  // 200 patients, 30 radiomics, 2 informative, 30% censoring
              spec.seed = 2024;
              PlantedRun run;
              run.cohort = synthgen::gen_cohort(spec);
              run.rad = *run.cohort.radiomics;
              run.clin = clinical::ingest_clinical(run.cohort.clinical, clinical::default_registry()).table;
              c(run.clin.cols() == 6, fmt::format("{} clinical features", run.clin.cols()));
              c(std::abs(run.cohort.achieved_censoring - 0.3) <= 0.05, "censoring off target");
              run.plan = pipeline::make_cv_plan(run.cohort.patient_ids, 20240101);
              run.result = pipeline::run_nested_cv(run.rad, run.clin, run.cohort.outcomes, run.plan, {});
              std::string cs;
              for (auto k : pipeline::kModelKinds)
                cs += fmt::format(" {} {:.4f}", pipeline::to_string(k),
                                  metrics::concordance_index(run.result.predictions.mean(k), run.cohort.outcomes));
              const double comb = metrics::concordance_index(
                  run.result.predictions.mean(pipeline::ModelKind::Combined), run.cohort.outcomes);
              c(comb >= 0.65, fmt::format("combined C-index {:.4f}", comb));
              const auto occ = pipeline::feature_occurrence_report(run.result.traces);
              auto count = [&](pipeline::ModelKind k, const std::string& f) {
                const auto it = occ.find(k);
                if (it == occ.end()) return 0;
                const auto jt = it->second.find(f);
                return jt == it->second.end() ? 0 : jt->second;
              };
              const int r0 = count(pipeline::ModelKind::Radiomics, "rad_00");
              const int r1 = count(pipeline::ModelKind::Radiomics, "rad_01");
              const int ts = count(pipeline::ModelKind::Clinical, "t_stage");
              c(r0 >= 15, fmt::format("rad_00 selected {}/25", r0));
              c(r1 >= 15, fmt::format("rad_01 selected {}/25", r1));
              c(ts >= 15, fmt::format("t_stage selected {}/25", ts));
              c.note("held-out C-index:" + cs);
              c.note(fmt::format("occurrences: rad_00 {}/25, rad_01 {}/25, t_stage {}/25", r0, r1, ts));
              const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
              c(secs < 300.0, fmt::format("runtime {:.1f} s", secs));
              planted = std::move(run);
            });

  criterion(9, "average mode is the per-patient mean (1e-12); all three modes complete", [](Check& c) {
    if (!planted) {
      c(false, "criterion 8 cohort unavailable");
      return;
    }
    const auto& p = planted->result.predictions;
    double worst = 0;
    for (int r = 0; r < p.n_repeats(); ++r)
      for (std::size_t i = 0; i < p.patient_ids().size(); ++i) {
        const int ii = static_cast<int>(i);
        const double mean =
            (p.at(pipeline::ModelKind::Radiomics, r, ii) + p.at(pipeline::ModelKind::Clinical, r, ii)) / 2;
        worst = std::max(worst, std::abs(p.at(pipeline::ModelKind::Combined, r, ii) - mean));
      }
    c(worst <= 1e-12, fmt::format("max deviation {:g}", worst));
    const auto& o = planted->cohort.outcomes;
    std::string cs = fmt::format("average_predictions {:.4f}",
                                 metrics::concordance_index(p.mean(pipeline::ModelKind::Combined), o));
    for (auto mode : {pipeline::CombineMode::ConcatAllFeatures, pipeline::CombineMode::ConcatPreselected}) {
      pipeline::PipelineConfig cfg;
      cfg.mode = mode;
      const auto res = pipeline::run_nested_cv(planted->rad, planted->clin, o, planted->plan, cfg);
      bool finite = true;
      for (auto k : pipeline::kModelKinds)
        for (double v : res.predictions.mean(k)) finite &= std::isfinite(v);
      c(finite, pipeline::to_string(mode) + " produced non-finite predictions");
      cs += fmt::format(", {} {:.4f}", pipeline::to_string(mode),
                        metrics::concordance_index(res.predictions.mean(pipeline::ModelKind::Combined), o));
    }
    c.note("combined C-index by mode: " + cs);
  });

  testutil::TempDir work("acceptance");

  criterion(10, "two identical CLI runs give byte-identical predictions.csv and metrics.json", [&](Check& c) {
    const auto cohort = work / "cohort";
    const auto err = work / "stderr10.txt";
    c(run_cli(fmt::format("synth -o {} -n 120 --seed 10", q(cohort)), err) == 0, "synth failed");
    for (const char* name : {"run_a", "run_b"}) {
      const int code = run_cli(fmt::format("run --features {} --clinical {} --outcomes {} -o {}",
                                           q(cohort / "features.csv"), q(cohort / "clinical.csv"),
                                           q(cohort / "outcomes.csv"), q(work / name)),
                               err);
      c(code == 0, fmt::format("{} exited {}: {}", name, code, testutil::read_text(err)));
    }
    for (const char* f : {"predictions.csv", "metrics.json"}) {
      const auto a = testutil::read_text(work / "run_a" / f);
      const auto b = testutil::read_text(work / "run_b" / f);
      c(!a.empty() && a == b, fmt::format("{} differs", f));
    }
    const auto t1 = testutil::read_text(work / "run_a" / "metrics.json");
    // Thread count must not leak into the outputs either.
    const int code = run_cli(fmt::format("run --features {} --clinical {} --outcomes {} -o {} --threads 3",
                                         q(cohort / "features.csv"), q(cohort / "clinical.csv"),
                                         q(cohort / "outcomes.csv"), q(work / "run_c")),
                             err);
    c(code == 0, "threaded run failed");
    c(testutil::read_text(work / "run_c" / "predictions.csv") ==
          testutil::read_text(work / "run_a" / "predictions.csv"),
      "threaded predictions differ");
    c(testutil::read_text(work / "run_c" / "metrics.json") == t1, "threaded metrics differ");
  });

  criterion(11, "gas-exclusion toggle leaves clinical model bit-identical; cutoff 0.9 run comparable",
            [&](Check& c) {
              const auto cohort = work / "volumes";
              const auto err = work / "stderr11.txt";
              c(run_cli(fmt::format("synth -o {} -n 60 --volumes --seed 11", q(cohort)), err) == 0,
                "synth --volumes failed");
              const std::string common = fmt::format("run --manifest {} --clinical {} --outcomes {}",
                                                     q(cohort / "manifest.csv"), q(cohort / "clinical.csv"),
                                                     q(cohort / "outcomes.csv"));
              const auto on = work / "gas_on", off = work / "gas_off", cut = work / "cutoff_09";
              c(run_cli(fmt::format("{} -o {}", common, q(on)), err) == 0, "gas-on run failed");
              c(run_cli(fmt::format("{} -o {} --no-gas-exclusion", common, q(off)), err) == 0,
                "gas-off run failed: " + testutil::read_text(err));
              c(run_cli(fmt::format("{} -o {} --spearman-cutoff 0.9", common, q(cut)), err) == 0,
                "cutoff 0.9 run failed: " + testutil::read_text(err));

              c(prediction_rows(on / "predictions.csv", "clinical") ==
                    prediction_rows(off / "predictions.csv", "clinical"),
                "clinical predictions differ between gas settings");
              c(testutil::read_text(on / "clinical_encoded.csv") == testutil::read_text(off / "clinical_encoded.csv"),
                "clinical encoding differs");
              c(testutil::read_text(on / "features.csv") != testutil::read_text(off / "features.csv"),
                "gas toggle did not change any mask-dependent feature");
              c(prediction_rows(on / "predictions.csv", "radiomics") !=
                    prediction_rows(off / "predictions.csv", "radiomics"),
                "gas toggle did not change radiomics predictions");

              const auto m8 = json::parse(testutil::read_text(on / "metrics.json"));
              const auto m9 = json::parse(testutil::read_text(cut / "metrics.json"));
              c(keys(m8) == keys(m9), "top-level metrics keys differ");
              for (const char* kind : {"radiomics", "clinical", "combined"}) {
                c(m9["models"].contains(kind), std::string("cutoff 0.9 report lacks ") + kind);
                c(keys(m8["models"][kind]) == keys(m9["models"][kind]), std::string("model keys differ: ") + kind);
                c(keys(m8["models"][kind]["horizons"]) == keys(m9["models"][kind]["horizons"]),
                  std::string("horizon keys differ: ") + kind);
              }
              const auto cfg = json::parse(testutil::read_text(cut / "run_config.json"));
              c(cfg["spearman_cutoff"] == 0.9, "cutoff not recorded");
              c(fs::exists(cut / "occurrence_report.json"), "occurrence report missing");
              c.note(fmt::format("radiomics C-index: gas on {:.4f}, gas off {:.4f}, cutoff 0.9 {:.4f}",
                                 m8["models"]["radiomics"]["c_index"].get<double>(),
                                 json::parse(testutil::read_text(off / "metrics.json"))["models"]["radiomics"]["c_index"]
                                     .get<double>(),
                                 m9["models"]["radiomics"]["c_index"].get<double>()));
            });

  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::cout << fmt::format("{} of {} criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
