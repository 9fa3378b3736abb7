#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rfs/error.hpp"
#include "rfs/metrics.hpp"

using namespace rfs;
using namespace rfs::metrics;
using survcore::SurvivalOutcome;

namespace {

std::vector<SurvivalOutcome> all_events(std::vector<double> times) {
  std::vector<SurvivalOutcome> o;
  for (std::size_t i = 0; i < times.size(); ++i) o.push_back({"p" + std::to_string(i), times[i], true});
  return o;
}

// Predictions loosely tied to outcome, with coarse rounding to force ties.
std::vector<double> noisy_predictions(std::mt19937_64& rng, const std::vector<SurvivalOutcome>& o,
                                      double noise, bool round) {
  std::normal_distribution<double> z(0, noise);
  std::vector<double> p;
  for (const auto& x : o) {
    double v = x.time + z(rng);
    if (round) v = std::round(v / 5.0);
    p.push_back(v);
  }
  return p;
}

}  // namespace

TEST_CASE("C-index worked cases") {
  CHECK(concordance_index(std::vector<double>{1, 2, 3}, all_events({1, 2, 3})) == 1.0);
  CHECK(concordance_index(std::vector<double>{3, 2, 1}, all_events({1, 2, 3})) == 0.0);
  CHECK(concordance_index(std::vector<double>{7, 7, 7}, all_events({1, 2, 3})) == 0.5);
  const std::vector<SurvivalOutcome> censored = {{"a", 1, false}, {"b", 2, false}};
  CHECK_THROWS_AS(concordance_index(std::vector<double>{1, 2}, censored), UndefinedMetric);
}

TEST_CASE("C-index equals the pairwise oracle exactly") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> size(2, 200);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto o = oracle::random_outcomes(rng, size(rng), 0.35, trial % 3 == 0);
    const auto p = noisy_predictions(rng, o, 15.0, trial % 2 == 0);
    double ref;
    try {
      ref = oracle::c_index(p, o);
    } catch (...) {
      continue;
    }
    if (std::isnan(ref)) continue;
    CHECK(concordance_index(p, o) == ref);
    ++checked;
  }
  CHECK(checked >= 45);
}

TEST_CASE("C-index is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const auto o = oracle::random_outcomes(rng, 120, 0.3, false);
    const auto p = noisy_predictions(rng, o, 10.0, trial % 2 == 0);
    std::vector<double> q;
    for (double v : p) q.push_back(std::exp(v / 10.0) * 3.0 + 1.0);
    CHECK(concordance_index(p, o) == concordance_index(q, o));
  }
}

TEST_CASE("bootstrap confidence interval") {
  // Perfect predictor: every resample gives C = 1.
  std::vector<double> t;
  for (int i = 0; i < 40; ++i) t.push_back(i + 1.0);
  BootstrapOptions opts;
  opts.resamples = 200;
  opts.seed = 3;
  const auto perfect = bootstrap_ci(t, all_events(t), opts);
  CHECK(perfect.low == 1.0);
  CHECK(perfect.high == 1.0);

  std::mt19937_64 rng(57);
  std::uniform_int_distribution<int> size(30, 200);
  for (int trial = 0; trial < 50; ++trial) {
    const auto o = oracle::random_outcomes(rng, size(rng), 0.3, trial % 2 == 0);
    const auto p = noisy_predictions(rng, o, 20.0, false);
    opts.seed = trial;
    const auto ci = bootstrap_ci(p, o, opts);
    const double point = concordance_index(p, o);
    CHECK(ci.low >= 0.0);
    CHECK(ci.high <= 1.0);
    CHECK(ci.low <= point);
    CHECK(point <= ci.high);
    const auto again = bootstrap_ci(p, o, opts);
    CHECK(again.low == ci.low);
    CHECK(again.high == ci.high);
  }
}

TEST_CASE("horizon inclusion and labels") {
  const std::vector<SurvivalOutcome> o = {{"a", 6, true}, {"b", 8, false}, {"c", 30, false}};
  const auto a = horizon_assessment(std::vector<double>{1, 2, 3}, o, 12);
  CHECK(a.included_ids == std::vector<std::string>{"a", "c"});
  CHECK(a.labels == std::vector<bool>{true, false});

  const std::vector<SurvivalOutcome> edge = {{"a", 12, true}, {"b", 40, true}};
  CHECK(horizon_assessment(std::vector<double>{1, 2}, edge, 12).labels ==
        std::vector<bool>{true, false});
  // Censored exactly at the horizon is kept as a non-event.
  const std::vector<SurvivalOutcome> cens = {{"a", 12, false}, {"b", 3, true}};
  CHECK(horizon_assessment(std::vector<double>{1, 2}, cens, 12).labels ==
        std::vector<bool>{false, true});
  CHECK_THROWS_AS(horizon_assessment(std::vector<double>{1, 2}, all_events({1, 2}), 12),
                  UndefinedMetric);
}

TEST_CASE("cohort engineered to the reported inclusion counts") {
  // 96 patients, 28 recurrences. Inclusion at 12/24/36 months: 85/68/49,
  // with 22 and 28 recurrences inside the first two horizons.
  std::vector<SurvivalOutcome> o;
  int id = 0;
  auto add = [&](int count, double time, bool event) {
    for (int k = 0; k < count; ++k) o.push_back({"p" + std::to_string(id++), time + 0.01 * k, event});
  };
  add(22, 3, true);    // events before 12
  add(6, 15, true);    // events in (12, 24]
  add(11, 6, false);   // censored before 12
  add(17, 14, false);  // censored in [12, 24)
  add(19, 26, false);  // censored in [24, 36)
  add(21, 40, false);  // followed beyond 36
  REQUIRE(o.size() == 96);
  std::vector<double> p(96);
  for (int i = 0; i < 96; ++i) p[i] = i;
  const auto a12 = horizon_assessment(p, o, 12), a24 = horizon_assessment(p, o, 24),
             a36 = horizon_assessment(p, o, 36);
  CHECK(a12.labels.size() == 85);
  CHECK(a12.positives() == 22);
  CHECK(a24.labels.size() == 68);
  CHECK(a24.positives() == 28);
  CHECK(a36.labels.size() == 49);
}

TEST_CASE("ROC AUC") {
  CHECK(roc_curve({true, true, false, false}, std::vector<double>{0.9, 0.8, 0.2, 0.1}).auc == 1.0);
  CHECK(roc_curve({true, false, true, false}, std::vector<double>{1, 1, 1, 1}).auc == 0.5);

  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> size(4, 150), level(0, 12);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    std::vector<bool> labels(n);
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = coin(rng);
      s[i] = level(rng) + (labels[i] ? 2 : 0);
    }
    labels[0] = true;
    labels[1] = false;
    const auto c = roc_curve(labels, s);
    CHECK(std::abs(c.auc - oracle::mann_whitney(labels, s)) < 1e-12);
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
  }
}

TEST_CASE("confusion metrics") {
  // Positive call when expected RFS <= cutoff.
  HorizonAssessment a;
  a.labels = {true, true, true, false, false, false};
  a.scores = {1, 2, 9, 7, 8, 10};
  a.cutoff = 5;
  const auto m = confusion_metrics(a);
  CHECK(m.tp == 2);
  CHECK(m.fn == 1);
  CHECK(m.tn == 3);
  CHECK(m.fp == 0);
  CHECK(*m.sensitivity == 2.0 / 3.0);
  CHECK(*m.specificity == 1.0);
  CHECK(*m.accuracy == 5.0 / 6.0);

  a.scores = {1, 2, 3, 7, 8, 10};
  const auto all = confusion_metrics(a);
  CHECK(*all.sensitivity == 1.0);
  CHECK(*all.specificity == 1.0);
  CHECK(*all.accuracy == 1.0);

  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    const auto o = oracle::random_outcomes(rng, 80, 0.3, false);
    const auto p = noisy_predictions(rng, o, 10.0, trial % 2 == 0);
    HorizonAssessment h;
    try {
      h = horizon_assessment(p, o, 20);
    } catch (const UndefinedMetric&) {
      continue;
    }
    int tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<double> sorted = h.scores;
    std::sort(sorted.begin(), sorted.end());
    const auto k = sorted.size();
    const double med = k % 2 ? sorted[k / 2] : (sorted[k / 2 - 1] + sorted[k / 2]) / 2;
    CHECK(h.cutoff == med);
    for (std::size_t i = 0; i < k; ++i) {
      const bool call = h.scores[i] <= med;
      tp += call && h.labels[i];
      fp += call && !h.labels[i];
      tn += !call && !h.labels[i];
      fn += !call && h.labels[i];
    }
    const auto c = confusion_metrics(h);
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.tn == tn);
    CHECK(c.fn == fn);
    CHECK(*c.accuracy == double(tp + tn) / k);
  }
}

TEST_CASE("DeLong test") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> z(0, 1);
  std::bernoulli_distribution coin(0.45);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 20 + trial * 3;
    std::vector<bool> labels(n);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = coin(rng);
      a[i] = z(rng) + (labels[i] ? 1.0 : 0.0);
      b[i] = 0.6 * a[i] + z(rng);
      if (trial % 3 == 0) {
        a[i] = std::round(a[i]);
        b[i] = std::round(b[i]);
      }
    }
    labels[0] = true;
    labels[1] = false;
    const auto r = delong_test(labels, a, b);
    const auto ref = oracle::delong(labels, a, b);
    CHECK(std::abs(r.var_a - ref.var_a) < 1e-10);
    CHECK(std::abs(r.var_b - ref.var_b) < 1e-10);
    CHECK(std::abs(r.covariance - ref.cov) < 1e-10);
    CHECK(std::abs(r.auc_a - oracle::mann_whitney(labels, a)) < 1e-12);

    const auto same = delong_test(labels, a, a);
    CHECK(same.p_value == 1.0);
    const auto swapped = delong_test(labels, b, a);
    CHECK(swapped.p_value == doctest::Approx(r.p_value).epsilon(1e-12));
    CHECK(swapped.z == doctest::Approx(-r.z).epsilon(1e-12));
  }
}

TEST_CASE("median stratification") {
  const auto s = stratify_by_median(std::vector<double>{1, 2, 3, 4});
  CHECK(s.high_risk == std::vector<int>{0, 1});
  CHECK(s.low_risk == std::vector<int>{2, 3});
  CHECK(s.median == 2.5);
  const auto flat = stratify_by_median(std::vector<double>{5, 5, 5});
  CHECK(flat.degenerate);
  CHECK(flat.high_risk.size() == 3);

  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> u(0, 100);
  std::uniform_int_distribution<int> size(2, 200);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(size(rng));
    for (auto& v : p) v = u(rng);
    const auto r = stratify_by_median(p);
    CHECK(std::abs(static_cast<long>(r.high_risk.size()) - static_cast<long>(r.low_risk.size())) <= 1);
  }
}
