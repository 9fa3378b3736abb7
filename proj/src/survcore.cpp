#include "rfs/survcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rfs/error.hpp"

namespace rfs::survcore {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Indices sorted by time, then grouped into runs of identical time.
struct TimeGroups {
  std::vector<int> order;
  std::vector<std::pair<int, int>> groups;  // [begin, end) into order
};

TimeGroups group_by_time(std::span<const SurvivalOutcome> outcomes) {
  TimeGroups g;
  g.order.resize(outcomes.size());
  std::iota(g.order.begin(), g.order.end(), 0);
  std::stable_sort(g.order.begin(), g.order.end(),
                   [&](int a, int b) { return outcomes[a].time < outcomes[b].time; });
  for (std::size_t i = 0; i < g.order.size();) {
    std::size_t j = i;
    while (j < g.order.size() && outcomes[g.order[j]].time == outcomes[g.order[i]].time) ++j;
    g.groups.emplace_back(static_cast<int>(i), static_cast<int>(j));
    i = j;
  }
  return g;
}

}  // namespace

void validate_outcomes(std::span<const SurvivalOutcome> outcomes) {
  for (const auto& o : outcomes) {
    if (!(o.time > 0) || !std::isfinite(o.time))
      throw DataError("patient '" + o.patient_id + "': follow-up time must be positive");
  }
}

double CoxModel::linear_predictor(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(beta.size()))
    throw DataError("covariate count does not match the model");
  double eta = 0;
  for (Eigen::Index k = 0; k < beta.size(); ++k) eta += beta[k] * (x[k] - means[k]) / sds[k];
  return eta;
}

double CoxModel::cum_hazard(double t) const {
  double h = 0;
  for (const auto& p : baseline) {
    if (p.time > t) break;
    h = std::exp(p.log_cum_hazard);
  }
  return h;
}

PartialLikelihood partial_likelihood(const Eigen::MatrixXd& x,
                                     std::span<const SurvivalOutcome> outcomes,
                                     const Eigen::VectorXd& beta, TieMethod ties) {
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd eta = x * beta;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  const auto tg = group_by_time(outcomes);

  PartialLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd d1(p), num1(p);
  Eigen::MatrixXd d2(p, p), num2(p, p);

  // Risk sets are suffixes in time order; walk groups from the latest.
  for (auto it = tg.groups.rbegin(); it != tg.groups.rend(); ++it) {
    double d0 = 0;
    d1.setZero();
    d2.setZero();
    int deaths = 0;
    for (int k = it->first; k < it->second; ++k) {
      const int i = tg.order[k];
      const double w = std::exp(eta[i] - shift);
      const auto xi = x.row(i).transpose();
      s0 += w;
      s1.noalias() += w * xi;
      s2.noalias() += w * xi * xi.transpose();
      if (outcomes[i].event) {
        ++deaths;
        d0 += w;
        d1.noalias() += w * xi;
        d2.noalias() += w * xi * xi.transpose();
        out.log_likelihood += eta[i] - shift;
        out.gradient += xi;
      }
    }
    if (deaths == 0) continue;
    if (ties == TieMethod::Breslow) {
      out.log_likelihood -= deaths * std::log(s0);
      out.gradient -= deaths * s1 / s0;
      out.hessian -= deaths * (s2 / s0 - s1 * s1.transpose() / (s0 * s0));
    } else {
      for (int l = 0; l < deaths; ++l) {
        const double f = static_cast<double>(l) / deaths;
        const double den = s0 - f * d0;
        num1 = s1 - f * d1;
        num2 = s2 - f * d2;
        out.log_likelihood -= std::log(den);
        out.gradient -= num1 / den;
        out.hessian -= num2 / den - num1 * num1.transpose() / (den * den);
      }
    }
  }
  return out;
}

namespace {

std::vector<BaselinePoint> breslow_baseline(const Eigen::VectorXd& eta,
                                            std::span<const SurvivalOutcome> outcomes) {
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  const auto tg = group_by_time(outcomes);
  std::vector<BaselinePoint> rev;
  double s0 = 0;
  for (auto it = tg.groups.rbegin(); it != tg.groups.rend(); ++it) {
    int deaths = 0;
    for (int k = it->first; k < it->second; ++k) {
      const int i = tg.order[k];
      s0 += std::exp(eta[i] - shift);
      deaths += outcomes[i].event ? 1 : 0;
    }
    if (deaths == 0) continue;
    // log of the hazard increment d / sum_R exp(eta)
    rev.push_back({outcomes[tg.order[it->first]].time, std::log(deaths) - shift - std::log(s0)});
  }
  std::vector<BaselinePoint> out(rev.rbegin(), rev.rend());
  double acc = kNegInf;
  for (auto& pt : out) {
    acc = log_add_exp(acc, pt.log_cum_hazard);
    pt.log_cum_hazard = acc;
  }
  return out;
}

}  // namespace

CoxModel fit_cox(const Eigen::MatrixXd& x, std::span<const SurvivalOutcome> outcomes,
                 std::vector<std::string> feature_names, const CoxOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<std::size_t>(n) != outcomes.size())
    throw DataError("covariate rows do not match outcomes");
  if (feature_names.size() != static_cast<std::size_t>(p))
    throw DataError("feature names do not match covariate columns");
  validate_outcomes(outcomes);
  const auto events = std::count_if(outcomes.begin(), outcomes.end(),
                                    [](const SurvivalOutcome& o) { return o.event; });
  if (events < 2) throw FitError("fewer than 2 events");

  CoxModel model;
  model.feature_names = std::move(feature_names);
  model.ties = options.ties;
  model.means = Eigen::VectorXd::Zero(p);
  model.sds = Eigen::VectorXd::Ones(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double mean = x.col(k).mean();
    const double var = (x.col(k).array() - mean).square().sum() / std::max<Eigen::Index>(n - 1, 1);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw FitError("degenerate covariate '" + model.feature_names[k] + "'");
    if (options.standardize) {
      model.means[k] = mean;
      model.sds[k] = sd;
    }
  }
  Eigen::MatrixXd z = x;
  for (Eigen::Index k = 0; k < p; ++k)
    z.col(k) = (x.col(k).array() - model.means[k]) / model.sds[k];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto cur = partial_likelihood(z, outcomes, beta, options.ties);
  std::vector<IterationRecord> trace;
  bool converged = p == 0;
  int iter = 0;
  while (!converged) {
    const double gmax = cur.gradient.cwiseAbs().maxCoeff();
    if (gmax < options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    ++iter;

    Eigen::MatrixXd info = -cur.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step;
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
      step = ldlt.solve(cur.gradient);
      ok = step.allFinite() && ldlt.vectorD().minCoeff() > 0;
    }
    if (!ok) {
      spdlog::warn("cox: singular information matrix at iteration {}, adding ridge 1e-8", iter);
      info.diagonal().array() += 1e-8;
      ldlt.compute(info);
      step = ldlt.solve(cur.gradient);
      if (ldlt.info() != Eigen::Success || !step.allFinite())
        throw ConvergenceError("cox: information matrix singular after ridge", trace);
    }

    int halvings = 0;
    PartialLikelihood next;
    Eigen::VectorXd candidate;
    bool improved = false;
    for (; halvings <= 40; ++halvings) {
      candidate = beta + step;
      next = partial_likelihood(z, outcomes, candidate, options.ties);
      if (std::isfinite(next.log_likelihood) && next.log_likelihood >= cur.log_likelihood) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    trace.push_back({iter, cur.log_likelihood, gmax, halvings});
    if (!improved) {
      // No ascent direction left at working precision.
      converged = true;
      break;
    }
    const double delta = next.log_likelihood - cur.log_likelihood;
    beta = candidate;
    cur = std::move(next);
    if (std::abs(delta) < options.loglik_tolerance) converged = true;
  }
  if (!converged) {
    throw ConvergenceError(fmt::format("cox: no convergence after {} iterations (max|grad| {:g})",
                                       iter, cur.gradient.cwiseAbs().maxCoeff()),
                           trace);
  }

  // A few undamped Newton steps take the estimate to working precision, so
  // results do not depend on how the covariates happen to be scaled.
  for (int polish = 0; polish < 5 && p > 0; ++polish) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-cur.hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(cur.gradient);
    if (!step.allFinite()) break;
    bool tiny = true;
    for (Eigen::Index k = 0; k < p; ++k) tiny &= std::abs(step[k]) <= 1e-13 * (1.0 + std::abs(beta[k]));
    if (tiny) break;
    auto next = partial_likelihood(z, outcomes, beta + step, options.ties);
    if (!std::isfinite(next.log_likelihood) ||
        next.log_likelihood < cur.log_likelihood - 1e-12 * std::max(1.0, std::abs(cur.log_likelihood)))
      break;
    beta += step;
    cur = std::move(next);
  }

  model.beta = beta;
  model.iterations = iter;
  model.log_likelihood = cur.log_likelihood;
  model.baseline = breslow_baseline(z * beta, outcomes);
  model.max_time = 0;
  for (const auto& o : outcomes) model.max_time = std::max(model.max_time, o.time);
  return model;
}

double predict_expected_rfs(const CoxModel& model, std::span<const double> x) {
  const double eta = model.linear_predictor(x);
  double area = 0;
  double prev_t = 0;
  double s = 1.0;
  for (const auto& pt : model.baseline) {
    if (pt.time >= model.max_time) break;
    area += s * (pt.time - prev_t);
    s = std::exp(-std::exp(pt.log_cum_hazard + eta));
    prev_t = pt.time;
  }
  area += s * (model.max_time - prev_t);
  return area;
}

double predict_expected_rfs(const CoxModel& model, const FeatureTable& table, int row) {
  std::vector<double> x(model.feature_names.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    int c = table.find(model.feature_names[k]);
    if (c < 0) throw DataError("missing feature '" + model.feature_names[k] + "'");
    x[k] = table.values()(row, c);
  }
  return predict_expected_rfs(model, x);
}

double KmCurve::survival_at(double t) const {
  double s = 1.0;
  for (const auto& p : points) {
    if (p.time > t) break;
    s = p.survival;
  }
  return s;
}

KmCurve km_estimate(std::span<const SurvivalOutcome> outcomes) {
  if (outcomes.empty()) throw DataError("Kaplan-Meier needs a non-empty cohort");
  const auto tg = group_by_time(outcomes);
  KmCurve curve;
  int at_risk = static_cast<int>(outcomes.size());
  double s = 1.0;
  curve.points.push_back({0.0, 1.0, at_risk});
  for (const auto& [b, e] : tg.groups) {
    int d = 0;
    for (int k = b; k < e; ++k) d += outcomes[tg.order[k]].event ? 1 : 0;
    if (d > 0) s *= static_cast<double>(at_risk - d) / at_risk;
    curve.points.push_back({outcomes[tg.order[b]].time, s, at_risk});
    at_risk -= e - b;
  }
  return curve;
}

double chi_square_1df_sf(double x) {
  if (!(x > 0)) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

LogRankResult logrank_test(std::span<const SurvivalOutcome> group_a,
                           std::span<const SurvivalOutcome> group_b) {
  if (group_a.empty() || group_b.empty()) throw DataError("log-rank test needs two non-empty groups");
  std::vector<SurvivalOutcome> all(group_a.begin(), group_a.end());
  all.insert(all.end(), group_b.begin(), group_b.end());
  const auto na0 = group_a.size();
  const auto tg = group_by_time(all);

  LogRankResult r;
  double n_a = static_cast<double>(na0);
  double n = static_cast<double>(all.size());
  for (const auto& [b, e] : tg.groups) {
    double d = 0, d_a = 0, leave_a = 0;
    for (int k = b; k < e; ++k) {
      const int i = tg.order[k];
      const bool in_a = static_cast<std::size_t>(i) < na0;
      if (all[i].event) {
        d += 1;
        if (in_a) d_a += 1;
      }
      if (in_a) leave_a += 1;
    }
    if (d > 0) {
      r.observed_a += d_a;
      r.expected_a += d * n_a / n;
      if (n > 1) r.variance += d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1);
    }
    n -= e - b;
    n_a -= leave_a;
  }
  if (r.variance <= 0) {
    r.chi_square = 0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = r.observed_a - r.expected_a;
  r.chi_square = diff * diff / r.variance;
  r.p_value = chi_square_1df_sf(r.chi_square);
  return r;
}

}  // namespace rfs::survcore
