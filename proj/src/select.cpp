#include "rfs/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "rfs/error.hpp"
#include "rfs/metrics.hpp"

namespace rfs::select {

using nlohmann::json;

std::vector<Split> make_inner_splits(std::span<const int> rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least 2 folds");
  if (rows.size() < static_cast<std::size_t>(folds)) throw DataError("fewer rows than folds");
  std::vector<int> shuffled(rows.begin(), rows.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<Split> splits(folds);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    const auto f = i % folds;
    for (int k = 0; k < folds; ++k) {
      (static_cast<std::size_t>(k) == f ? splits[k].validation : splits[k].train)
          .push_back(shuffled[i]);
    }
  }
  return splits;
}

json SelectionTrace::to_json() const {
  json j;
  j["screened_out"] = json::array();
  for (const auto& r : screened_out) {
    json e = {{"feature", r.feature}, {"train_c", r.train_c}, {"val_c", r.val_c}};
    if (!r.note.empty()) e["note"] = r.note;
    j["screened_out"].push_back(e);
  }
  j["pruned_pairs"] = json::array();
  for (const auto& p : pruned_pairs)
    j["pruned_pairs"].push_back({{"kept", p.kept}, {"dropped", p.dropped}, {"rho", p.rho}});
  j["forward_path"] = json::array();
  for (const auto& s : forward_path)
    j["forward_path"].push_back({{"added", s.added}, {"train_c", s.train_c}, {"val_c", s.val_c}});
  j["chosen_set"] = chosen_set;
  if (!notes.empty()) j["notes"] = notes;
  return j;
}

namespace {

std::vector<SurvivalOutcome> take(std::span<const SurvivalOutcome> outcomes,
                                  std::span<const int> rows) {
  std::vector<SurvivalOutcome> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(outcomes[r]);
  return out;
}

}  // namespace

std::optional<SplitScore> score_feature_set(const FeatureTable& table,
                                            std::span<const std::string> columns,
                                            std::span<const SurvivalOutcome> outcomes,
                                            std::span<const Split> splits) {
  SplitScore acc;
  const std::vector<std::string> names(columns.begin(), columns.end());
  for (const auto& split : splits) {
    try {
      const Eigen::MatrixXd xt = table.gather(split.train, columns);
      const auto ot = take(outcomes, split.train);
      const auto model = survcore::fit_cox(xt, ot, names);
      std::vector<double> pt(split.train.size());
      for (std::size_t i = 0; i < pt.size(); ++i) {
        const Eigen::VectorXd row = xt.row(static_cast<Eigen::Index>(i)).transpose();
        pt[i] = survcore::predict_expected_rfs(model, std::span<const double>(row.data(), row.size()));
      }
      const Eigen::MatrixXd xv = table.gather(split.validation, columns);
      std::vector<double> pv(split.validation.size());
      for (std::size_t i = 0; i < pv.size(); ++i) {
        const Eigen::VectorXd row = xv.row(static_cast<Eigen::Index>(i)).transpose();
        pv[i] = survcore::predict_expected_rfs(model, std::span<const double>(row.data(), row.size()));
      }
      const double ct = metrics::concordance_index(pt, ot);
      const double cv = metrics::concordance_index(pv, take(outcomes, split.validation));
      acc.train_c += ct;
      acc.val_c += cv;
      ++acc.folds_used;
    } catch (const survcore::FitError&) {
    } catch (const survcore::ConvergenceError&) {
    } catch (const UndefinedMetric&) {
    }
  }
  if (acc.folds_used == 0) return std::nullopt;
  acc.train_c /= acc.folds_used;
  acc.val_c /= acc.folds_used;
  return acc;
}

ScreenResult univariate_screen(const FeatureTable& table, std::span<const std::string> candidates,
                               std::span<const SurvivalOutcome> outcomes,
                               std::span<const Split> splits, const ScreenConfig& cfg) {
  ScreenResult out;
  for (const auto& name : candidates) {
    const std::string one[] = {name};
    auto score = score_feature_set(table, one, outcomes, splits);
    if (!score) {
      out.screened_out.push_back({name, 0.0, 0.0, "univariate fit failed"});
      continue;
    }
    if (score->train_c < cfg.c_index_floor || score->val_c < cfg.c_index_floor) {
      out.screened_out.push_back({name, score->train_c, score->val_c, {}});
      continue;
    }
    out.surviving.push_back(name);
    out.train_scores[name] = score->train_c;
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = avg;
    i = j;
  }
  return r;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DataError("spearman_rho needs two equal-length sequences of length >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0 || syy <= 0) {
    spdlog::debug("spearman_rho: zero rank variance, reporting 0");
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

PruneResult redundancy_prune(const FeatureTable& table, std::span<const std::string> names,
                             const std::map<std::string, double>& scores, std::span<const int> rows,
                             const ScreenConfig& cfg) {
  const std::size_t k = names.size();
  std::vector<std::vector<double>> cols(k);
  for (std::size_t a = 0; a < k; ++a) {
    const int c = table.index_of(names[a]);
    for (int r : rows) cols[a].push_back(table.values()(r, c));
  }
  struct Pair {
    std::size_t a, b;
    double rho;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const double rho = spearman_rho(cols[a], cols[b]);
      if (std::abs(rho) > cfg.spearman_cutoff) pairs.push_back({a, b, rho});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& p, const Pair& q) {
    return std::abs(p.rho) > std::abs(q.rho);
  });
  auto score = [&](std::size_t i) {
    auto it = scores.find(names[i]);
    return it == scores.end() ? 0.0 : it->second;
  };
  std::vector<bool> alive(k, true);
  PruneResult out;
  for (const auto& p : pairs) {
    if (!alive[p.a] || !alive[p.b]) continue;
    // Lower score dropped; on equal scores the lexicographically later name.
    std::size_t drop = p.b, keep = p.a;
    if (score(p.a) < score(p.b) || (score(p.a) == score(p.b) && names[p.a] > names[p.b]))
      std::swap(drop, keep);
    alive[drop] = false;
    out.pruned.push_back({names[keep], names[drop], p.rho});
  }
  for (std::size_t i = 0; i < k; ++i)
    if (alive[i]) out.kept.push_back(names[i]);
  return out;
}

ForwardResult step_forward(const FeatureTable& table, std::span<const std::string> candidates,
                           std::span<const SurvivalOutcome> outcomes,
                           std::span<const Split> splits, const ScreenConfig& cfg) {
  if (cfg.max_features < 1) throw DataError("max_features must be >= 1");
  std::set<std::string> pool(candidates.begin(), candidates.end());  // lexicographic order
  std::vector<std::string> current;
  ForwardResult out;
  while (static_cast<int>(current.size()) < cfg.max_features && !pool.empty()) {
    std::optional<SplitScore> best;
    std::string best_name;
    for (const auto& name : pool) {
      auto trial = current;
      trial.push_back(name);
      auto s = score_feature_set(table, trial, outcomes, splits);
      if (s && (!best || s->val_c > best->val_c)) {
        best = s;
        best_name = name;
      }
    }
    if (!best) {
      if (current.empty()) throw DataError("no fittable features");
      break;
    }
    current.push_back(best_name);
    pool.erase(best_name);
    out.path.push_back({best_name, best->train_c, best->val_c});
  }
  std::size_t best_len = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.path.size(); ++i) {
    if (out.path[i].val_c > best_val) {
      best_val = out.path[i].val_c;
      best_len = i + 1;
    }
  }
  out.chosen.assign(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(best_len));
  return out;
}

PreselectResult preselect(const FeatureTable& table, std::span<const SurvivalOutcome> outcomes,
                          std::span<const int> rows, std::span<const Split> splits,
                          const ScreenConfig& cfg) {
  PreselectResult out;
  auto screen = univariate_screen(table, table.names(), outcomes, splits, cfg);
  out.trace.screened_out = std::move(screen.screened_out);
  out.train_scores = screen.train_scores;
  if (screen.surviving.empty()) {
    out.trace.notes.push_back("no feature passed the univariate screen");
    return out;
  }
  auto pruned = redundancy_prune(table, screen.surviving, screen.train_scores, rows, cfg);
  out.trace.pruned_pairs = std::move(pruned.pruned);
  out.kept = std::move(pruned.kept);
  return out;
}

SelectionResult select_features(const FeatureTable& table,
                                std::span<const SurvivalOutcome> outcomes,
                                std::span<const int> rows, std::span<const Split> splits,
                                const ScreenConfig& cfg) {
  auto pre = preselect(table, outcomes, rows, splits, cfg);
  SelectionResult out;
  out.trace = std::move(pre.trace);
  if (pre.kept.empty()) return out;
  try {
    auto fwd = step_forward(table, pre.kept, outcomes, splits, cfg);
    out.trace.forward_path = std::move(fwd.path);
    out.chosen = std::move(fwd.chosen);
  } catch (const DataError& e) {
    out.trace.notes.push_back(e.what());
  }
  out.trace.chosen_set = out.chosen;
  return out;
}

}  // namespace rfs::select
