#include "hybridtail/tail_asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hybridtail/errors.hpp"
#include "hybridtail/numerics.hpp"

namespace hybridtail::asympt {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

constexpr double kLogFloor = -700.0;  // below this exp() underflows

}  // namespace

Asymptote finish_asymptote(std::string regime, std::string validity,
                           std::vector<AsymptoteFactor> factors) {
  Asymptote out;
  out.regime = std::move(regime);
  out.validity = std::move(validity);
  out.factors = std::move(factors);
  double lg = 0.0;
  for (const auto& f : out.factors) lg += f.log_value;
  out.log_value = lg;
  if (std::isfinite(lg) && lg > kLogFloor) out.value = std::exp(lg);
  return out;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::ReducedLoad: return "reduced-load";
    case Regime::ModerateDeviation: return "moderate-deviation";
    case Regime::Oscillatory: return "oscillatory";
    case Regime::ReducedPeak: return "reduced-peak";
    case Regime::Unsupported: return "unsupported";
  }
  return "unsupported";
}

HazardSpec hazard_of(const tails::TailModel& m) {
  HazardSpec h;
  h.hazard = [m](double t) { return m.hazard(t); };
  h.hazard_rate = [m](double t) { return m.hazard_rate(t); };
  h.hazard_rate_deriv = [m](double t) { return m.hazard_rate_deriv(t); };
  if (m.kind() == tails::TailKind::WeibullT1) {
    h.stretched_power = true;
    h.growth_index = m.weibull_beta();
  }
  return h;
}

HazardSpec hazard_of(const tails::ResidualModel& m) {
  HazardSpec h;
  h.hazard = [m](double t) { return m.hazard(t); };
  h.hazard_rate = [m](double t) { return m.hazard_rate(t); };
  h.hazard_rate_deriv = [m](double t) { return m.hazard_rate_deriv(t); };
  if (m.base().kind() == tails::TailKind::WeibullT1) {
    h.stretched_power = true;
    h.growth_index = m.base().weibull_beta();
  }
  return h;
}

double drift_cost(double mu, double x) {
  if (!(mu > 0) || !(x > 0)) throw RangeError("drift_cost: mu, x must be > 0");
  return 0.5 * mu * mu * x - mu + 0.5 / x;
}

double drift_cost_slope(double mu, double x) {
  if (!(mu > 0) || !(x > 0))
    throw RangeError("drift_cost_slope: mu, x must be > 0");
  return 0.5 * mu * mu - 0.5 / (x * x);
}

CriticalTime solve_critical_time(const ModerateDeviationProblem& prob,
                                 double u) {
  const double mu = prob.mu;
  if (!(mu > 0)) throw RangeError("solve_critical_time: mu must be > 0");
  if (!(u > 0)) throw RangeError("solve_critical_time: u must be > 0");
  if (!prob.hazard.hazard || !prob.hazard.hazard_rate)
    throw ConfigError("solve_critical_time: hazard and hazard_rate required");

  int evals = 0;
  auto g = [&](double t) {
    ++evals;
    return prob.hazard.hazard_rate(t) + drift_cost_slope(mu, t / u);
  };
  auto exponent_at = [&](double t) {
    return prob.hazard.hazard(t) + u * drift_cost(mu, t / u);
  };

  const double hi = (u / mu) * (1.0 - 1e-9);

  // Scan a log grid over (0, u/mu) for sign changes, seeded with the
  // linearized guess u/mu - u Q'(u/mu)/mu^3 when the hazard is a stretched
  // power (the guess tightens the bracket around the near-boundary root that
  // family produces at large u).
  std::vector<double> grid;
  grid.reserve(132);
  const int n_scan = 128;
  const double lo = hi * 1e-8;
  const double ratio = std::pow(hi / lo, 1.0 / (n_scan - 1));
  for (int i = 0; i < n_scan; ++i)
    grid.push_back(lo * std::pow(ratio, double(i)));
  grid.back() = hi;
  if (prob.hazard.stretched_power) {
    const double seed =
        u / mu - u * prob.hazard.hazard_rate(u / mu) / (mu * mu * mu);
    if (seed > lo && seed < hi) {
      grid.push_back(seed);
      std::sort(grid.begin(), grid.end());
    }
  }

  double best_t = 0.0;
  double best_h = std::numeric_limits<double>::infinity();
  double prev_t = grid[0];
  double prev_g = g(prev_t);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur_t = grid[i];
    const double cur_g = g(cur_t);
    if ((prev_g < 0 && cur_g >= 0) || (prev_g >= 0 && cur_g < 0)) {
      double root = num::find_root_brent(g, prev_t, cur_t, 1e-15);
      // Newton polish against the analytic slope of g when Q'' exists.
      if (prob.hazard.hazard_rate_deriv) {
        for (int it = 0; it < 3; ++it) {
          const double gr = g(root);
          const double slope =
              prob.hazard.hazard_rate_deriv(root) + u * u / (root * root * root);
          if (!(std::isfinite(slope)) || slope == 0.0) break;
          const double next = root - gr / slope;
          if (!(next > prev_t && next < cur_t)) break;
          root = next;
        }
      }
      const double h = exponent_at(root);
      if (h < best_h) {
        best_h = h;
        best_t = root;
      }
    }
    prev_t = cur_t;
    prev_g = cur_g;
  }

  if (!(best_t > 0.0))
    throw RangeError(
        "solve_critical_time: no interior stationary point; u is too small "
        "for the moderate-deviation evaluation");

  // Stationarity residual check, relative to the size of the terms.
  const double scale = std::abs(prob.hazard.hazard_rate(best_t)) +
                       0.5 * mu * mu + 0.5 * u * u / (best_t * best_t);
  if (std::abs(g(best_t)) > 1e-10 * scale)
    throw RangeError("solve_critical_time: stationarity tolerance not met");

  CriticalTime out;
  out.t = best_t;
  out.exponent = best_h;
  out.iterations = evals;
  return out;
}

Asymptote moderate_deviation_tail(const ModerateDeviationProblem& prob,
                                  double u) {
  const CriticalTime ct = solve_critical_time(prob, u);
  std::vector<AsymptoteFactor> factors;
  factors.push_back({"duration_hazard", -prob.hazard.hazard(ct.t),
                     fmt("hazard at the interior optimum t(u) = %.17g", ct.t)});
  factors.push_back({"gaussian_cost", -u * drift_cost(prob.mu, ct.t / u),
                     "drift cost of reaching level u by time t(u)"});
  return finish_asymptote("moderate-deviation",
                          "sharp as u grows; exact stationary-point "
                          "evaluation at finite u",
                          std::move(factors));
}

double moderate_deviation_hazard_rate(const ModerateDeviationProblem& prob,
                                      double u) {
  // d/du [Q(t(u)) + u drift_cost(t(u)/u)]: the t-derivative vanishes at the
  // stationary point, leaving u / t(u) - mu.
  const CriticalTime ct = solve_critical_time(prob, u);
  return u / ct.t - prob.mu;
}

Asymptote supercritical_tail(const fluid::HybridModel& model, double u) {
  if (!model.source())
    throw RegimeError("supercritical_tail: model has no on-off source");
  if (model.drift() != fluid::HybridModel::Drift::Supercritical)
    throw RegimeError("supercritical_tail: needs peak rate r > drain c");
  if (model.gaussian().kind() != gauss::GaussianKind::BrownianMotion)
    throw RegimeError("supercritical_tail: needs Brownian noise");
  if (model.source()->on().kind() != tails::TailKind::WeibullT1)
    throw RegimeError(
        "supercritical_tail: needs stretched-exponential on-periods");
  const double vrate = model.gaussian().variance_rate();
  if (!(vrate > 0))
    throw RegimeError("supercritical_tail: needs nondegenerate noise");

  const auto& src = *model.source();
  const double r = src.r(), c = model.drain();
  const double p = src.p(), rho = src.rho();
  const double sd = std::sqrt(vrate);

  ModerateDeviationProblem prob{hazard_of(src.on_residual()), (r - c) / sd};
  const CriticalTime ct = solve_critical_time(prob, u / sd);

  const double prefactor = p * (r - rho) / (c - rho);
  std::vector<AsymptoteFactor> factors;
  factors.push_back(
      {"cycle_prefactor", std::log(prefactor), "p (r - rho) / (c - rho)"});
  factors.push_back({"drifted_sup_tail", -ct.exponent,
                     "sup of noise plus drift (r - c) over a residual "
                     "on-period, unit-variance rescale applied"});

  std::string validity =
      "sharp as u grows; prefactor exact, sup tail from the "
      "stationary-point expansion";
  const auto cond = tails::reduced_load_condition(src.on());
  if (cond.status == tails::ConditionStatus::Holds)
    validity +=
        "; square-root absorption holds, so this also matches the bare "
        "residual duration tail at argument u/(r - c)";
  return finish_asymptote("supercritical", std::move(validity),
                          std::move(factors));
}

Asymptote random_walk_sup_tail(const tails::TailModel& increment_tail,
                               double mean_increment, double u) {
  if (!(mean_increment < 0))
    throw RegimeError("random_walk_sup_tail: increment mean must be negative");
  std::vector<AsymptoteFactor> factors;
  factors.push_back({"integrated_tail",
                     tails::log_integrated_tail(increment_tail, u),
                     "integral of the increment upper tail past u"});
  factors.push_back({"drift_normalizer", -std::log(-mean_increment),
                     "1 / |mean increment|"});
  return finish_asymptote(
      "random-walk-sup",
      "integrated-tail formula; valid for heavy-tailed increments",
      std::move(factors));
}

double critical_exponent(CriticalExponent which, double hurst, double nu) {
  if (!(hurst > 0 && hurst < 1))
    throw RangeError("critical_exponent: hurst must be in (0, 1)");
  if (!(nu > 1)) throw RangeError("critical_exponent: nu must be > 1");
  switch (which) {
    case CriticalExponent::HTimesNuMinusOne: return hurst * (nu - 1.0);
    case CriticalExponent::NuMinusOneOverH: return (nu - 1.0) / hurst;
  }
  throw RangeError("critical_exponent: unknown choice");
}

double bm_sup_moment(double q) {
  if (!(q > -2.0)) throw RangeError("bm_sup_moment: needs q > -2");
  if (q == 0.0) return 1.0;
  return std::pow(2.0, 0.5 * q) * std::tgamma(0.5 * (q + 1.0)) /
         std::sqrt(M_PI);
}

double critical_prefactor_gamma(double nu) {
  if (!(nu > 1)) throw RangeError("critical_prefactor_gamma: needs nu > 1");
  return std::pow(2.0, 1.0 + nu) * std::tgamma(nu + 0.5) / std::sqrt(M_PI);
}

CriticalPrefactor make_critical_prefactor(CriticalExponent which, double hurst,
                                          double nu) {
  if (std::abs(hurst - 0.5) > 1e-12)
    throw RegimeError(
        "make_critical_prefactor: closed form only at hurst = 1/2; use the "
        "Monte Carlo moment estimator for other H");
  const double q = critical_exponent(which, hurst, nu);
  CriticalPrefactor out;
  out.value = bm_sup_moment(q);
  out.provenance =
      (which == CriticalExponent::HTimesNuMinusOne)
          ? fmt("E[(sup B_H)^q] at q = H(nu-1) = %.17g, closed form", q)
          : fmt("E[(sup B_H)^q] at q = (nu-1)/H = %.17g, closed form", q);
  return out;
}

Asymptote critical_tail(const fluid::HybridModel& model, double u,
                        const CriticalPrefactor& prefactor) {
  if (!model.source())
    throw RegimeError("critical_tail: model has no on-off source");
  if (model.drift() != fluid::HybridModel::Drift::Critical)
    throw RegimeError("critical_tail: needs peak rate r equal to drain c");
  const auto gk = model.gaussian().kind();
  if (gk != gauss::GaussianKind::BrownianMotion &&
      gk != gauss::GaussianKind::FBM)
    throw RegimeError("critical_tail: needs self-similar noise (BM or fBm)");
  const auto& src = *model.source();
  if (src.on().kind() != tails::TailKind::Pareto)
    throw RegimeError("critical_tail: needs regularly varying on-periods");
  if (!(u >= 0)) throw RangeError("critical_tail: u must be >= 0");
  if (!(prefactor.value > 0))
    throw RangeError("critical_tail: prefactor must be positive");

  const double s_inv = model.gaussian().sigma_inverse(u);
  std::vector<AsymptoteFactor> factors;
  factors.push_back({"on_fraction", std::log(src.p()), "stationary P{On}"});
  factors.push_back(
      {"sup_moment", std::log(prefactor.value), prefactor.provenance});
  factors.push_back({"duration_tail", -src.on_residual().hazard(s_inv),
                     fmt("residual on-period tail at sigma^{-1}(u) = %.17g",
                         s_inv)});
  return finish_asymptote(
      "critical",
      "constant pending empirical arbitration between candidate exponents",
      std::move(factors));
}

double log_sup_power_drift(const gauss::GaussianSpec& spec, double d,
                           double eta, double u) {
  if (!(d > 0)) throw RangeError("log_sup_power_drift: d must be > 0");
  if (!(u > 0)) throw RangeError("log_sup_power_drift: u must be > 0");
  const double alpha = spec.alpha();
  if (!(eta > 0.5 * alpha))
    throw RegimeError(
        "log_sup_power_drift: needs eta > alpha/2, otherwise the sup is "
        "infinite");
  const double a_over = alpha / (2.0 * eta - alpha);
  const double coef = 0.5 * std::pow(d, alpha / eta) *
                      std::pow(a_over, -alpha / eta) *
                      std::pow(2.0 * eta / (2.0 * eta - alpha), 2.0);
  const double v = spec.variance(std::pow(u, 1.0 / eta));
  if (!(v > 0))
    throw RangeError("log_sup_power_drift: variance must be positive at the "
                     "evaluation point");
  return -coef * u * u / v;
}

double reduced_peak_time_scale(const fluid::HybridModel& model, double u) {
  if (!model.source())
    throw RegimeError("reduced_peak_time_scale: model has no on-off source");
  if (model.drift() != fluid::HybridModel::Drift::Subcritical)
    throw RegimeError("reduced_peak_time_scale: needs peak rate r < drain c");
  const double alpha = model.gaussian().alpha();
  if (!(alpha < 2.0))
    throw RegimeError("reduced_peak_time_scale: needs alpha < 2");
  const double d = model.drain() - model.source()->r();
  return (1.0 / d) * (alpha / (2.0 - alpha)) * u;
}

Asymptote subcritical_tail(const fluid::HybridModel& model, double u,
                           std::optional<double> gaussian_log_tail) {
  if (!model.source())
    throw RegimeError("subcritical_tail: model has no on-off source");
  if (model.drift() != fluid::HybridModel::Drift::Subcritical)
    throw RegimeError("subcritical_tail: needs peak rate r < drain c");
  const auto& src = *model.source();
  if (src.on().kind() != tails::TailKind::Pareto)
    throw RegimeError("subcritical_tail: needs regularly varying on-periods");

  const double d = model.drain() - src.r();
  const double t_u = reduced_peak_time_scale(model, u);
  const bool analytic = !gaussian_log_tail.has_value();
  const double g_log = analytic
                           ? log_sup_power_drift(model.gaussian(), d, 1.0, u)
                           : *gaussian_log_tail;

  std::vector<AsymptoteFactor> factors;
  factors.push_back({"on_fraction", std::log(src.p()), "stationary P{On}"});
  factors.push_back({"gaussian_sup_tail", g_log,
                     analytic ? "log-asymptote of sup[X(t) - (c-r) t]; no "
                                "constant attached"
                              : "caller-supplied (Monte Carlo) estimate"});
  factors.push_back({"duration_tail", -src.on_residual().hazard(t_u),
                     fmt("residual on-period tail at (1/(c-r)) "
                         "(alpha/(2-alpha)) u = %.17g",
                         t_u)});
  return finish_asymptote("reduced-peak",
                          analytic
                              ? "log-scale accuracy: the Gaussian factor "
                                "carries no constant"
                              : "Gaussian factor supplied externally",
                          std::move(factors));
}

RegimeDecision classify_regime(const fluid::HybridModel& model) {
  using Drift = fluid::HybridModel::Drift;
  if (!model.source())
    return {Regime::Unsupported,
            "no on-off source: the workload is Gaussian-only; for Brownian "
            "noise the tail is exactly exp(-2 c u / variance rate), and "
            "log_sup_power_drift covers the general log-asymptote"};

  const auto& src = *model.source();
  const auto drift = model.drift();

  if (drift == Drift::Supercritical) {
    const auto cond = tails::reduced_load_condition(src.on());
    if (cond.status == tails::ConditionStatus::Holds)
      return {Regime::ReducedLoad,
              "r > c and square-root-scale noise is absorbed by the "
              "on-period tail (" + cond.note +
                  "): the workload tail follows the residual on-period tail "
                  "at argument u/(r-c); no evaluator is provided"};
    if (cond.status == tails::ConditionStatus::Fails) {
      if (src.on().kind() != tails::TailKind::WeibullT1)
        return {Regime::Unsupported,
                "r > c but the on-period tail is too light for the "
                "heavy-tailed evaluators (" + cond.note + ")"};
      if (model.gaussian().kind() != gauss::GaussianKind::BrownianMotion)
        return {Regime::Unsupported,
                "the moderate-deviation evaluator needs Brownian noise"};
      return {Regime::ModerateDeviation,
              "r > c, stretched-exponential on-periods, Gaussian "
              "fluctuations enter the exponent (" + cond.note + ")"};
    }
    return {Regime::Unsupported,
            "square-root absorption undecided: " + cond.note};
  }

  if (drift == Drift::Critical) {
    const auto gk = model.gaussian().kind();
    const bool self_similar = gk == gauss::GaussianKind::BrownianMotion ||
                              gk == gauss::GaussianKind::FBM;
    if (src.on().kind() == tails::TailKind::Pareto && self_similar)
      return {Regime::Oscillatory,
              "r = c with regularly varying on-periods and self-similar "
              "noise: one long on-period carries the exceedance"};
    return {Regime::Unsupported,
            "the critical evaluator needs regularly varying on-periods and "
            "Brownian or fractional Brownian noise"};
  }

  if (src.on().kind() == tails::TailKind::Pareto)
    return {Regime::ReducedPeak,
            "r < c with regularly varying on-periods: the tail factorizes "
            "into a Gaussian large deviation and one long on-period"};
  return {Regime::Unsupported,
          "the subcritical evaluator needs regularly varying on-periods"};
}

}  // namespace hybridtail::asympt
