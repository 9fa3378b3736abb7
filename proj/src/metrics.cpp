#include "rfs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rfs/error.hpp"

namespace rfs::metrics {

namespace {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  std::int64_t prefix(std::size_t i) const {
    std::int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

// 1-based average ranks.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = avg;
    i = j;
  }
  return r;
}

}  // namespace

double concordance_index(std::span<const double> predictions,
                         std::span<const SurvivalOutcome> outcomes) {
  if (predictions.size() != outcomes.size())
    throw DataError("predictions and outcomes differ in length");
  if (predictions.size() < 2) throw UndefinedMetric("no comparable pairs");

  std::vector<double> uniq(predictions.begin(), predictions.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  auto rank_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), v) - uniq.begin()) + 1;
  };

  std::vector<int> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return outcomes[a].time > outcomes[b].time; });

  Fenwick later(uniq.size());
  std::int64_t inserted = 0, concordant = 0, tied = 0, comparable = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && outcomes[order[j]].time == outcomes[order[i]].time) ++j;
    for (std::size_t k = i; k < j; ++k) {
      const int p = order[k];
      if (!outcomes[p].event) continue;
      const auto r = rank_of(predictions[p]);
      const auto le = later.prefix(r);
      const auto lt = later.prefix(r - 1);
      concordant += inserted - le;
      tied += le - lt;
      comparable += inserted;
    }
    for (std::size_t k = i; k < j; ++k) {
      later.add(rank_of(predictions[order[k]]));
      ++inserted;
    }
    i = j;
  }
  if (comparable == 0) throw UndefinedMetric("no comparable pairs");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(comparable);
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::vector<int>> bootstrap_resamples(std::span<const SurvivalOutcome> outcomes,
                                                  const BootstrapOptions& options) {
  const std::size_t n = outcomes.size();
  if (n < 2) throw DataError("bootstrap needs at least two patients");
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
  std::vector<std::vector<int>> out;
  out.reserve(options.resamples);
  std::vector<SurvivalOutcome> sample(n);
  for (int b = 0; b < options.resamples; ++b) {
    bool found = false;
    for (int attempt = 0; attempt <= options.max_redraws; ++attempt) {
      std::vector<int> idx(n);
      for (auto& i : idx) i = pick(rng);
      // Comparable pair exists iff some event time is below some other time.
      double min_event = std::numeric_limits<double>::infinity(), max_time = -min_event;
      for (int i : idx) {
        if (outcomes[i].event) min_event = std::min(min_event, outcomes[i].time);
        max_time = std::max(max_time, outcomes[i].time);
      }
      if (min_event < max_time) {
        out.push_back(std::move(idx));
        found = true;
        break;
      }
    }
    if (!found) throw UndefinedMetric("bootstrap: exhausted redraws without comparable pairs");
  }
  return out;
}

std::vector<double> bootstrap_statistics(std::span<const double> predictions,
                                         std::span<const SurvivalOutcome> outcomes,
                                         std::span<const std::vector<int>> resamples) {
  if (predictions.size() != outcomes.size())
    throw DataError("predictions and outcomes differ in length");
  std::vector<double> stats;
  stats.reserve(resamples.size());
  std::vector<double> p;
  std::vector<SurvivalOutcome> o;
  for (const auto& idx : resamples) {
    p.clear();
    o.clear();
    for (int i : idx) {
      p.push_back(predictions[i]);
      o.push_back(outcomes[i]);
    }
    stats.push_back(concordance_index(p, o));
  }
  return stats;
}

ConfidenceInterval percentile_interval(std::vector<double> stats, double level) {
  if (!(level > 0 && level < 1)) throw DataError("bootstrap level must be in (0,1)");
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {quantile(stats, alpha / 2.0), quantile(stats, 1.0 - alpha / 2.0)};
}

ConfidenceInterval bootstrap_ci(std::span<const double> predictions,
                                std::span<const SurvivalOutcome> outcomes,
                                const BootstrapOptions& options) {
  concordance_index(predictions, outcomes);  // validates inputs
  auto resamples = bootstrap_resamples(outcomes, options);
  return percentile_interval(bootstrap_statistics(predictions, outcomes, resamples),
                             options.level);
}

int HorizonAssessment::positives() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), true));
}

HorizonAssessment horizon_assessment(std::span<const double> predictions,
                                     std::span<const SurvivalOutcome> outcomes, double horizon) {
  if (!(horizon > 0)) throw DataError("horizon must be positive");
  if (predictions.size() != outcomes.size())
    throw DataError("predictions and outcomes differ in length");
  HorizonAssessment a;
  a.horizon = horizon;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.event && o.time < horizon) continue;
    a.included_ids.push_back(o.patient_id);
    a.included_rows.push_back(static_cast<int>(i));
    a.labels.push_back(o.event && o.time <= horizon);
    a.scores.push_back(predictions[i]);
  }
  if (a.labels.empty())
    throw UndefinedMetric(fmt::format("horizon {:g}: no patients included", horizon));
  const int pos = a.positives();
  if (pos == 0 || pos == static_cast<int>(a.labels.size()))
    throw UndefinedMetric(fmt::format("horizon {:g}: single-class assessment", horizon));
  a.cutoff = median(a.scores);
  return a;
}

RocCurve roc_curve(const std::vector<bool>& labels, std::span<const double> risk) {
  if (labels.size() != risk.size()) throw DataError("labels and scores differ in length");
  double npos = 0, nneg = 0;
  for (bool l : labels) (l ? npos : nneg) += 1;
  if (npos == 0 || nneg == 0) throw UndefinedMetric("ROC needs both classes");

  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return risk[a] > risk[b]; });
  RocCurve c;
  c.points.push_back({0.0, 0.0});
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && risk[order[j]] == risk[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    RocPoint next{fp / nneg, tp / npos};
    const auto& prev = c.points.back();
    c.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
    c.points.push_back(next);
    i = j;
  }
  return c;
}

RocCurve roc_auc(const HorizonAssessment& a) {
  std::vector<double> risk(a.scores.size());
  for (std::size_t i = 0; i < risk.size(); ++i) risk[i] = -a.scores[i];
  return roc_curve(a.labels, risk);
}

ConfusionMetrics confusion_metrics(const HorizonAssessment& a) {
  ConfusionMetrics m;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool predicted = a.scores[i] <= a.cutoff;
    if (a.labels[i]) {
      (predicted ? m.tp : m.fn) += 1;
    } else {
      (predicted ? m.fp : m.tn) += 1;
    }
  }
  if (m.tp + m.fn > 0) m.sensitivity = static_cast<double>(m.tp) / (m.tp + m.fn);
  if (m.tn + m.fp > 0) m.specificity = static_cast<double>(m.tn) / (m.tn + m.fp);
  const int total = m.tp + m.tn + m.fp + m.fn;
  if (total > 0) m.accuracy = static_cast<double>(m.tp + m.tn) / total;
  return m;
}

DeLongResult delong_test(const std::vector<bool>& labels, std::span<const double> risk_a,
                         std::span<const double> risk_b) {
  if (labels.size() != risk_a.size() || labels.size() != risk_b.size())
    throw DataError("DeLong inputs differ in length");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());
  if (pos.empty() || neg.empty()) throw UndefinedMetric("DeLong test needs both classes");

  // Placement values via midranks (Sun & Xu).
  auto placements = [&](std::span<const double> risk, std::vector<double>& v10,
                        std::vector<double>& v01) {
    std::vector<double> x, y;
    for (auto i : pos) x.push_back(risk[i]);
    for (auto i : neg) y.push_back(risk[i]);
    std::vector<double> z = x;
    z.insert(z.end(), y.begin(), y.end());
    auto tx = midranks(x), ty = midranks(y), tz = midranks(z);
    v10.resize(pos.size());
    v01.resize(neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) v10[i] = (tz[i] - tx[i]) / n;
    for (std::size_t j = 0; j < neg.size(); ++j) v01[j] = 1.0 - (tz[pos.size() + j] - ty[j]) / m;
  };
  std::vector<double> a10, a01, b10, b01;
  placements(risk_a, a10, a01);
  placements(risk_b, b10, b01);

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto cov = [&](const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() < 2) return 0.0;
    const double mu = mean(u), mv = mean(v);
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - mu) * (v[i] - mv);
    return s / static_cast<double>(u.size() - 1);
  };

  DeLongResult r;
  r.auc_a = mean(a10);
  r.auc_b = mean(b10);
  r.var_a = cov(a10, a10) / m + cov(a01, a01) / n;
  r.var_b = cov(b10, b10) / m + cov(b01, b01) / n;
  r.covariance = cov(a10, b10) / m + cov(a01, b01) / n;
  const double diff = r.auc_a - r.auc_b;
  const double var = r.variance_of_difference();
  if (diff == 0.0) {
    r.z = 0.0;
    r.p_value = 1.0;
  } else if (!(var > 0)) {
    r.z = diff > 0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.z = diff / std::sqrt(var);
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  }
  return r;
}

DeLongResult delong_test(const HorizonAssessment& a, const HorizonAssessment& b) {
  if (a.included_ids != b.included_ids || a.labels != b.labels)
    throw DataError("DeLong test needs both assessments on identical patients and labels");
  std::vector<double> ra(a.scores.size()), rb(b.scores.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ra[i] = -a.scores[i];
    rb[i] = -b.scores[i];
  }
  return delong_test(a.labels, ra, rb);
}

Stratification stratify_by_median(std::span<const double> predictions) {
  if (predictions.size() < 2) throw DataError("stratification needs at least two patients");
  Stratification s;
  s.median = median({predictions.begin(), predictions.end()});
  for (std::size_t i = 0; i < predictions.size(); ++i)
    (predictions[i] <= s.median ? s.high_risk : s.low_risk).push_back(static_cast<int>(i));
  s.degenerate = s.high_risk.empty() || s.low_risk.empty();
  if (s.degenerate) spdlog::warn("median stratification is degenerate: all patients in one group");
  return s;
}

}  // namespace rfs::metrics
