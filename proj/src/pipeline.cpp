#include "rfs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "rfs/io.hpp"
#include "rfs/parallel.hpp"

namespace rfs::pipeline {

using nlohmann::json;

std::string to_string(CombineMode m) {
  switch (m) {
    case CombineMode::AveragePredictions: return "average_predictions";
    case CombineMode::ConcatAllFeatures: return "concat_all_features";
    case CombineMode::ConcatPreselected: return "concat_preselected";
  }
  return "unknown";
}

CombineMode combine_mode_from_string(const std::string& s) {
  if (s == "average_predictions") return CombineMode::AveragePredictions;
  if (s == "concat_all_features") return CombineMode::ConcatAllFeatures;
  if (s == "concat_preselected") return CombineMode::ConcatPreselected;
  throw DataError("unknown combine_mode '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Radiomics: return "radiomics";
    case ModelKind::Clinical: return "clinical";
    case ModelKind::Combined: return "combined";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "radiomics") return ModelKind::Radiomics;
  if (s == "clinical") return ModelKind::Clinical;
  if (s == "combined") return ModelKind::Combined;
  throw DataError("unknown model_kind '" + s + "'");
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(master);
  for (auto p : path) s = mix(s ^ mix(p + 0x632be59bd9b4e019ULL));
  return s;
}

// ---------------------------------------------------------------------------
// CV plan

std::vector<int> CvPlan::fold_rows(int repeat, int fold) const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < patient_ids.size(); ++i)
    if (assignments[repeat][i] == fold) rows.push_back(static_cast<int>(i));
  return rows;
}

std::vector<int> CvPlan::training_rows(int repeat, int fold) const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < patient_ids.size(); ++i)
    if (assignments[repeat][i] != fold) rows.push_back(static_cast<int>(i));
  return rows;
}

CvPlan make_cv_plan(std::span<const std::string> patient_ids, std::uint64_t master_seed,
                    int n_folds, int n_repeats, const std::vector<bool>* stratify_events) {
  if (patient_ids.size() < 10) throw DataError("too few patients for cross-validation (need >= 10)");
  if (n_folds < 2 || n_repeats < 1) throw DataError("invalid fold/repeat counts");
  if (stratify_events && stratify_events->size() != patient_ids.size())
    throw DataError("event flags do not match patients");
  CvPlan plan;
  plan.n_folds = n_folds;
  plan.n_repeats = n_repeats;
  plan.master_seed = master_seed;
  plan.patient_ids.assign(patient_ids.begin(), patient_ids.end());
  const int n = static_cast<int>(patient_ids.size());
  for (int r = 0; r < n_repeats; ++r) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(master_seed, {0, static_cast<std::uint64_t>(r)}));
    std::shuffle(order.begin(), order.end(), rng);
    if (stratify_events) {
      std::stable_partition(order.begin(), order.end(),
                            [&](int i) { return static_cast<bool>((*stratify_events)[i]); });
    }
    std::vector<int> assign(n);
    for (int k = 0; k < n; ++k) assign[order[k]] = k % n_folds;
    plan.assignments.push_back(std::move(assign));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Prediction table

PredictionTable::PredictionTable(std::vector<std::string> patient_ids, int n_repeats)
    : ids_(std::move(patient_ids)), n_repeats_(n_repeats) {
  for (auto& v : values_)
    v.assign(n_repeats, std::vector<double>(ids_.size(), std::nan("")));
}

std::vector<double> PredictionTable::mean(ModelKind k) const {
  std::vector<double> m(ids_.size(), 0.0);
  for (std::size_t p = 0; p < ids_.size(); ++p) {
    double s = 0;
    for (int r = 0; r < n_repeats_; ++r) s += at(k, r, static_cast<int>(p));
    m[p] = s / n_repeats_;
  }
  return m;
}

std::string PredictionTable::to_csv() const {
  std::string out = "patient_id,repeat,model_kind,expected_rfs_months\n";
  std::array<std::vector<double>, 3> means;
  for (auto k : kModelKinds) means[static_cast<int>(k)] = mean(k);
  for (std::size_t p = 0; p < ids_.size(); ++p) {
    for (auto k : kModelKinds) {
      for (int r = 0; r < n_repeats_; ++r) {
        out += fmt::format("{},{},{},{}\n", io::csv_escape(ids_[p]), r + 1, to_string(k),
                           io::format_double(at(k, r, static_cast<int>(p))));
      }
      out += fmt::format("{},mean,{},{}\n", io::csv_escape(ids_[p]), to_string(k),
                         io::format_double(means[static_cast<int>(k)][p]));
    }
  }
  return out;
}

std::map<ModelKind, std::vector<double>> PredictionTable::read_means(
    const std::filesystem::path& path, std::span<const std::string> ids) {
  auto csv = io::read_csv(path);
  const int c_id = csv.require_column("patient_id", path.string());
  const int c_rep = csv.require_column("repeat", path.string());
  const int c_kind = csv.require_column("model_kind", path.string());
  const int c_val = csv.require_column("expected_rfs_months", path.string());
  std::map<std::string, int> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = static_cast<int>(i);

  std::map<ModelKind, std::vector<double>> mean_rows, sums;
  std::map<ModelKind, std::vector<int>> counts;
  for (const auto& row : csv.rows) {
    auto it = row_of.find(row[c_id]);
    if (it == row_of.end()) throw DataError(path.string() + ": unknown patient '" + row[c_id] + "'");
    const ModelKind k = model_kind_from_string(row[c_kind]);
    const double v = io::parse_double(row[c_val], path.string());
    if (row[c_rep] == "mean") {
      auto& m = mean_rows[k];
      if (m.empty()) m.assign(ids.size(), std::nan(""));
      m[it->second] = v;
    } else {
      io::parse_int(row[c_rep], path.string() + " repeat");
      auto& s = sums[k];
      auto& c = counts[k];
      if (s.empty()) {
        s.assign(ids.size(), 0.0);
        c.assign(ids.size(), 0);
      }
      s[it->second] += v;
      c[it->second] += 1;
    }
  }
  std::map<ModelKind, std::vector<double>> out;
  for (auto k : kModelKinds) {
    std::vector<double> v;
    if (mean_rows.count(k)) {
      v = mean_rows[k];
    } else if (sums.count(k)) {
      v = sums[k];
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = counts[k][i] > 0 ? v[i] / counts[k][i] : std::nan("");
    } else {
      continue;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::isnan(v[i]))
        throw DataError(path.string() + ": no " + to_string(k) + " prediction for '" + ids[i] + "'");
    }
    out[k] = std::move(v);
  }
  if (out.empty()) throw DataError(path.string() + ": no predictions");
  return out;
}

// ---------------------------------------------------------------------------
// Nested cross-validation

namespace {

std::vector<SurvivalOutcome> take(std::span<const SurvivalOutcome> outcomes,
                                  std::span<const int> rows) {
  std::vector<SurvivalOutcome> out;
  for (int r : rows) out.push_back(outcomes[r]);
  return out;
}

select::SelectionResult finish_selection(const FeatureTable& table,
                                         std::span<const SurvivalOutcome> outcomes,
                                         select::PreselectResult pre,
                                         std::span<const select::Split> splits,
                                         const select::ScreenConfig& cfg) {
  select::SelectionResult out;
  out.trace = std::move(pre.trace);
  if (!pre.kept.empty()) {
    try {
      auto fwd = select::step_forward(table, pre.kept, outcomes, splits, cfg);
      out.trace.forward_path = std::move(fwd.path);
      out.chosen = std::move(fwd.chosen);
    } catch (const DataError& e) {
      out.trace.notes.push_back(e.what());
    }
  }
  if (out.chosen.empty()) out.trace.notes.push_back("empty selection: baseline-only model");
  out.trace.chosen_set = out.chosen;
  return out;
}

std::vector<double> fit_and_predict(const FeatureTable& table,
                                    std::span<const SurvivalOutcome> outcomes,
                                    std::span<const int> train, std::span<const int> test,
                                    const std::vector<std::string>& chosen) {
  const auto model = survcore::fit_cox(table.gather(train, chosen), take(outcomes, train), chosen);
  std::vector<double> out;
  for (int r : test) out.push_back(survcore::predict_expected_rfs(model, table, r));
  return out;
}

struct FoldOutput {
  std::vector<int> test_rows;
  std::array<std::vector<double>, 3> predictions;
  std::vector<FoldTrace> traces;
};

FoldOutput run_fold(const FeatureTable& rad, const FeatureTable& clin,
                    std::span<const SurvivalOutcome> outcomes, const CvPlan& plan,
                    const PipelineConfig& cfg, int repeat, int fold) {
  FoldOutput out;
  out.test_rows = plan.fold_rows(repeat, fold);
  const auto train = plan.training_rows(repeat, fold);
  const auto splits = select::make_inner_splits(
      train, cfg.inner_folds,
      derive_seed(plan.master_seed,
                  {1, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(fold)}));
  const auto& sc = cfg.screen;

  auto pre_rad = select::preselect(rad, outcomes, train, splits, sc);
  auto pre_clin = select::preselect(clin, outcomes, train, splits, sc);

  std::optional<FeatureTable> union_table;
  select::PreselectResult pre_union;
  if (cfg.mode == CombineMode::ConcatPreselected) {
    union_table = rad.concat(clin);
    pre_union.kept = pre_rad.kept;
    pre_union.kept.insert(pre_union.kept.end(), pre_clin.kept.begin(), pre_clin.kept.end());
    pre_union.trace.screened_out = pre_rad.trace.screened_out;
    pre_union.trace.screened_out.insert(pre_union.trace.screened_out.end(),
                                        pre_clin.trace.screened_out.begin(),
                                        pre_clin.trace.screened_out.end());
    pre_union.trace.pruned_pairs = pre_rad.trace.pruned_pairs;
    pre_union.trace.pruned_pairs.insert(pre_union.trace.pruned_pairs.end(),
                                        pre_clin.trace.pruned_pairs.begin(),
                                        pre_clin.trace.pruned_pairs.end());
  } else if (cfg.mode == CombineMode::ConcatAllFeatures) {
    union_table = rad.concat(clin);
    pre_union = select::preselect(*union_table, outcomes, train, splits, sc);
  }

  auto sel_rad = finish_selection(rad, outcomes, std::move(pre_rad), splits, sc);
  auto sel_clin = finish_selection(clin, outcomes, std::move(pre_clin), splits, sc);

  auto& p_rad = out.predictions[static_cast<int>(ModelKind::Radiomics)];
  auto& p_clin = out.predictions[static_cast<int>(ModelKind::Clinical)];
  auto& p_comb = out.predictions[static_cast<int>(ModelKind::Combined)];
  p_rad = fit_and_predict(rad, outcomes, train, out.test_rows, sel_rad.chosen);
  p_clin = fit_and_predict(clin, outcomes, train, out.test_rows, sel_clin.chosen);
  out.traces.push_back({repeat, fold, ModelKind::Radiomics, std::move(sel_rad.trace)});
  out.traces.push_back({repeat, fold, ModelKind::Clinical, std::move(sel_clin.trace)});

  if (cfg.mode == CombineMode::AveragePredictions) {
    p_comb.resize(p_rad.size());
    for (std::size_t i = 0; i < p_rad.size(); ++i) p_comb[i] = (p_rad[i] + p_clin[i]) / 2.0;
  } else {
    auto sel = finish_selection(*union_table, outcomes, std::move(pre_union), splits, sc);
    p_comb = fit_and_predict(*union_table, outcomes, train, out.test_rows, sel.chosen);
    out.traces.push_back({repeat, fold, ModelKind::Combined, std::move(sel.trace)});
  }
  return out;
}

}  // namespace

NestedCvResult run_nested_cv(const FeatureTable& radiomics, const FeatureTable& clinical,
                             std::span<const SurvivalOutcome> outcomes, const CvPlan& plan,
                             const PipelineConfig& cfg) {
  const auto n = plan.patient_ids.size();
  if (radiomics.rows() != n || clinical.rows() != n || outcomes.size() != n)
    throw DataError("feature tables, outcomes and CV plan differ in patient count");
  for (std::size_t i = 0; i < n; ++i) {
    if (radiomics.patient_ids()[i] != plan.patient_ids[i] ||
        clinical.patient_ids()[i] != plan.patient_ids[i] ||
        outcomes[i].patient_id != plan.patient_ids[i])
      throw DataError("feature tables, outcomes and CV plan are not aligned on patient_id");
  }
  survcore::validate_outcomes(outcomes);

  const int tasks = plan.n_repeats * plan.n_folds;
  std::vector<FoldOutput> results(tasks);
  parallel_for(tasks, cfg.threads, [&](int t) {
    const int r = t / plan.n_folds, f = t % plan.n_folds;
    try {
      results[t] = run_fold(radiomics, clinical, outcomes, plan, cfg, r, f);
    } catch (const std::exception& e) {
      throw PipelineError(fmt::format("repeat {} fold {}: {}", r + 1, f + 1, e.what()));
    }
  });

  NestedCvResult out;
  out.predictions = PredictionTable(plan.patient_ids, plan.n_repeats);
  for (int t = 0; t < tasks; ++t) {
    const int r = t / plan.n_folds;
    auto& res = results[t];
    for (auto k : kModelKinds) {
      const auto& preds = res.predictions[static_cast<int>(k)];
      for (std::size_t i = 0; i < res.test_rows.size(); ++i)
        out.predictions.at(k, r, res.test_rows[i]) = preds[i];
    }
    for (auto& tr : res.traces) out.traces.push_back(std::move(tr));
  }
  return out;
}

OccurrenceReport feature_occurrence_report(std::span<const FoldTrace> traces) {
  OccurrenceReport report;
  for (const auto& t : traces) {
    auto& counts = report[t.kind];
    for (const auto& f : t.trace.chosen_set) ++counts[f];
  }
  return report;
}

json to_json(const OccurrenceReport& report) {
  json j = json::object();
  for (const auto& [kind, counts] : report) {
    json k = json::object();
    for (const auto& [f, c] : counts) k[f] = c;
    j[to_string(kind)] = k;
  }
  return j;
}

json traces_to_json(std::span<const FoldTrace> traces) {
  json arr = json::array();
  for (const auto& t : traces) {
    json j = t.trace.to_json();
    j["repeat"] = t.repeat + 1;
    j["fold"] = t.fold + 1;
    j["model_kind"] = to_string(t.kind);
    arr.push_back(j);
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Evaluation

MetricsReport evaluate_full(const std::map<ModelKind, std::vector<double>>& mean_predictions,
                            std::span<const SurvivalOutcome> outcomes,
                            const EvaluateOptions& options) {
  MetricsReport report;
  report.cohort_km = survcore::km_estimate(outcomes);
  std::vector<std::vector<int>> resamples;
  try {
    resamples = metrics::bootstrap_resamples(outcomes, options.bootstrap);
  } catch (const UndefinedMetric&) {
  }
  std::map<ModelKind, std::vector<double>> boot;

  for (const auto& [kind, preds] : mean_predictions) {
    if (preds.size() != outcomes.size())
      throw DataError("predictions for " + to_string(kind) + " do not match the cohort size");
    ModelReport m;
    m.kind = kind;
    try {
      m.c_index = metrics::concordance_index(preds, outcomes);
      if (!resamples.empty()) {
        boot[kind] = metrics::bootstrap_statistics(preds, outcomes, resamples);
        m.ci = metrics::percentile_interval(boot[kind], options.bootstrap.level);
      }
    } catch (const UndefinedMetric&) {
    }
    for (double h : options.horizons) {
      HorizonReport hr;
      hr.horizon = h;
      try {
        auto a = metrics::horizon_assessment(preds, outcomes, h);
        hr.roc = metrics::roc_auc(a);
        hr.auc = hr.roc.auc;
        auto cm = metrics::confusion_metrics(a);
        hr.sensitivity = cm.sensitivity;
        hr.specificity = cm.specificity;
        hr.accuracy = cm.accuracy;
        hr.n_included = static_cast<int>(a.labels.size());
        hr.n_events = a.positives();
        hr.cutoff = a.cutoff;
      } catch (const UndefinedMetric& e) {
        hr.undefined_reason = e.what();
      }
      m.horizons.push_back(std::move(hr));
    }
    m.strata = metrics::stratify_by_median(preds);
    auto group = [&](const std::vector<int>& rows) {
      std::vector<SurvivalOutcome> g;
      for (int r : rows) g.push_back(outcomes[r]);
      return g;
    };
    const auto high = group(m.strata.high_risk), low = group(m.strata.low_risk);
    if (!high.empty()) m.km_high = survcore::km_estimate(high);
    if (!low.empty()) m.km_low = survcore::km_estimate(low);
    if (!m.strata.degenerate) m.logrank = survcore::logrank_test(high, low);
    report.models.push_back(std::move(m));
  }

  const auto comb = mean_predictions.find(ModelKind::Combined);
  const auto clin = mean_predictions.find(ModelKind::Clinical);
  if (comb != mean_predictions.end() && clin != mean_predictions.end()) {
    for (double h : options.horizons) {
      DeLongReport d;
      d.horizon = h;
      try {
        auto a = metrics::horizon_assessment(comb->second, outcomes, h);
        auto b = metrics::horizon_assessment(clin->second, outcomes, h);
        d.result = metrics::delong_test(a, b);
      } catch (const UndefinedMetric& e) {
        d.undefined_reason = e.what();
      }
      report.delong_combined_vs_clinical.push_back(std::move(d));
    }
    if (boot.count(ModelKind::Combined) && boot.count(ModelKind::Clinical)) {
      const auto& bc = boot[ModelKind::Combined];
      const auto& bk = boot[ModelKind::Clinical];
      auto& cmp = report.ci_comparison;
      cmp.available = true;
      int ge = 0;
      for (std::size_t i = 0; i < bc.size(); ++i) ge += bk[i] >= bc[i] ? 1 : 0;
      cmp.fraction_clinical_ge_combined = static_cast<double>(ge) / static_cast<double>(bc.size());
      const auto ci_c = metrics::percentile_interval(bc, options.bootstrap.level);
      const auto ci_k = metrics::percentile_interval(bk, options.bootstrap.level);
      cmp.intervals_overlap = ci_c.low <= ci_k.high && ci_k.low <= ci_c.high;
    }
  }
  return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json km_json(const survcore::KmCurve& c) {
  json arr = json::array();
  for (const auto& p : c.points)
    arr.push_back({{"time", p.time}, {"survival", p.survival}, {"at_risk", p.at_risk}});
  return arr;
}

}  // namespace

json MetricsReport::to_json() const {
  json j;
  json models_j = json::object();
  json km = json::object();
  km["cohort"] = km_json(cohort_km);
  json roc = json::array();
  for (const auto& m : models) {
    json mj;
    mj["c_index"] = opt(m.c_index);
    mj["ci_low"] = m.ci ? json(m.ci->low) : json(nullptr);
    mj["ci_high"] = m.ci ? json(m.ci->high) : json(nullptr);
    json hz = json::object();
    for (const auto& h : m.horizons) {
      json hj;
      if (h.undefined_reason) {
        hj["undefined"] = *h.undefined_reason;
        hj["auc"] = nullptr;
      } else {
        hj["auc"] = h.auc;
        hj["sensitivity"] = opt(h.sensitivity);
        hj["specificity"] = opt(h.specificity);
        hj["accuracy"] = opt(h.accuracy);
        hj["n_included"] = h.n_included;
        hj["n_events"] = h.n_events;
        hj["cutoff"] = h.cutoff;
        for (const auto& p : h.roc.points)
          roc.push_back({{"model", to_string(m.kind)}, {"horizon", h.horizon}, {"fpr", p.fpr},
                         {"tpr", p.tpr}});
      }
      hz[io::format_double(h.horizon)] = hj;
    }
    mj["horizons"] = hz;
    json st;
    st["median"] = m.strata.median;
    st["n_high_risk"] = m.strata.high_risk.size();
    st["n_low_risk"] = m.strata.low_risk.size();
    st["degenerate"] = m.strata.degenerate;
    st["logrank_chi_square"] = m.logrank ? json(m.logrank->chi_square) : json(nullptr);
    st["logrank_p"] = m.logrank ? json(m.logrank->p_value) : json(nullptr);
    mj["stratification"] = st;
    models_j[to_string(m.kind)] = mj;
    if (!m.km_high.points.empty()) km[to_string(m.kind) + ":high"] = km_json(m.km_high);
    if (!m.km_low.points.empty()) km[to_string(m.kind) + ":low"] = km_json(m.km_low);
  }
  j["models"] = models_j;
  json dl = json::object();
  for (const auto& d : delong_combined_vs_clinical) {
    json dj;
    if (d.result) {
      dj["auc_combined"] = d.result->auc_a;
      dj["auc_clinical"] = d.result->auc_b;
      dj["z"] = d.result->z;
      dj["p_value"] = d.result->p_value;
    } else {
      dj["undefined"] = d.undefined_reason.value_or("");
      dj["p_value"] = nullptr;
    }
    dl[io::format_double(d.horizon)] = dj;
  }
  j["delong_combined_vs_clinical"] = dl;
  if (ci_comparison.available) {
    j["ci_comparison_combined_vs_clinical"] = {
        {"intervals_overlap", ci_comparison.intervals_overlap},
        {"fraction_clinical_ge_combined", ci_comparison.fraction_clinical_ge_combined}};
  }
  j["km_curves"] = km;
  j["roc_points"] = roc;
  return j;
}

std::string km_curves_csv_from_json(const json& metrics) {
  std::string out = "group,time,survival,at_risk\n";
  const auto& km = metrics.at("km_curves");
  for (auto it = km.begin(); it != km.end(); ++it) {
    for (const auto& p : it.value()) {
      out += fmt::format("{},{},{},{}\n", io::csv_escape(it.key()),
                         io::format_double(p.at("time").get<double>()),
                         io::format_double(p.at("survival").get<double>()),
                         p.at("at_risk").get<int>());
    }
  }
  return out;
}

std::string roc_points_csv_from_json(const json& metrics) {
  std::string out = "model,horizon,fpr,tpr\n";
  for (const auto& p : metrics.at("roc_points")) {
    out += fmt::format("{},{},{},{}\n", p.at("model").get<std::string>(),
                       io::format_double(p.at("horizon").get<double>()),
                       io::format_double(p.at("fpr").get<double>()),
                       io::format_double(p.at("tpr").get<double>()));
  }
  return out;
}

std::string MetricsReport::km_curves_csv() const { return km_curves_csv_from_json(to_json()); }
std::string MetricsReport::roc_points_csv() const { return roc_points_csv_from_json(to_json()); }

}  // namespace rfs::pipeline
