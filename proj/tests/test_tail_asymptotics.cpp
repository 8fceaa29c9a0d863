#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "hybridtail/errors.hpp"
#include "hybridtail/fluid_workload.hpp"
#include "hybridtail/tail_asymptotics.hpp"

using namespace hybridtail;
using asympt::CriticalExponent;
using asympt::ModerateDeviationProblem;
using fluid::HybridModel;
using gauss::GaussianSpec;
using tails::TailModel;

namespace {

HybridModel make_model(GaussianSpec g, double r, TailModel on, TailModel off,
                       double c) {
  return HybridModel::make(std::move(g),
                           onoff::OnOffSpec::make(r, std::move(on),
                                                  std::move(off)),
                           c);
}

HybridModel moderate_model() {
  // r = 2 > c = 1.5, mean-1 stretched-exponential on-periods, fixed off = 3.
  const double a = std::pow(std::tgamma(1.0 + 1.0 / 0.7), 0.7);
  return make_model(
      GaussianSpec::brownian(1.0), 2.0,
      TailModel::weibull_t1(0.7, tails::SlowlyVarying::constant(a)),
      TailModel::constant_duration(3.0), 1.5);
}

HybridModel critical_model(GaussianSpec g = GaussianSpec::brownian(1.0)) {
  return make_model(std::move(g), 1.0, TailModel::pareto(2.0, 1.0),
                    TailModel::exponential(1.0), 1.0);
}

HybridModel reduced_peak_model() {
  return make_model(GaussianSpec::fbm(0.5), 0.5, TailModel::pareto(2.0, 1.0),
                    TailModel::exponential(1.0), 1.0);
}

// Golden-section minimiser used as an independent oracle.
double golden_min(const std::function<double(double)>& f, double lo,
                  double hi) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("drift cost vanishes at the free-drift time and matches its slope") {
  const double mu = 0.7;
  CHECK(std::abs(asympt::drift_cost(mu, 1.0 / mu)) < 1e-12);
  CHECK(std::abs(asympt::drift_cost_slope(mu, 1.0 / mu)) < 1e-12);
  const double x = 1.7, h = 1e-6;
  const double fd =
      (asympt::drift_cost(0.8, x + h) - asympt::drift_cost(0.8, x - h)) /
      (2 * h);
  CHECK(asympt::drift_cost_slope(0.8, x) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("hazard bundles carry the duration-law structure") {
  auto spec = asympt::hazard_of(TailModel::weibull_t1(0.7));
  CHECK(spec.stretched_power);
  CHECK(spec.growth_index == doctest::Approx(0.7));
  CHECK(spec.hazard(1.0) == doctest::Approx(1.0));
  CHECK(spec.hazard_rate(1.0) == doctest::Approx(0.7));
  auto residual = asympt::hazard_of(tails::ResidualModel(TailModel::pareto(2.0)));
  CHECK(residual.hazard_rate(1.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("stationary time matches an independent golden-section search") {
  ModerateDeviationProblem prob{asympt::hazard_of(TailModel::weibull_t1(0.5)),
                                1.0};
  const double u = 100.0;
  auto ct = asympt::solve_critical_time(prob, u);
  CHECK(ct.t > 0.0);
  CHECK(ct.t < u);  // strictly inside (0, u/mu)
  CHECK(ct.iterations > 0);
  // Stationarity: Q'(t) + drift-cost slope = 0.
  const double resid =
      prob.hazard.hazard_rate(ct.t) + asympt::drift_cost_slope(1.0, ct.t / u);
  CHECK(std::abs(resid) < 1e-8 * prob.hazard.hazard_rate(ct.t));
  auto objective = [&](double t) {
    return prob.hazard.hazard(t) + u * asympt::drift_cost(1.0, t / u);
  };
  const double oracle = golden_min(objective, 1e-6, u * (1.0 - 1e-12));
  CHECK(ct.t == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(ct.exponent == doctest::Approx(objective(oracle)).epsilon(1e-9));
  // The exponent is a minimum over the scan grid, not just a critical value.
  for (double frac : {0.1, 0.3, 0.5, 0.7, 0.9})
    CHECK(ct.exponent <= objective(frac * u) + 1e-9);
}

TEST_CASE("the stationary time approaches u/mu at the documented rate") {
  // With tail exponent beta and unit drift, u - t(u) = beta u^beta (1 + o(1)).
  ModerateDeviationProblem prob{asympt::hazard_of(TailModel::weibull_t1(0.7)),
                                1.0};
  const double u = 1e6;
  auto ct = asympt::solve_critical_time(prob, u);
  const double gap_ratio = (u - ct.t) / (0.7 * std::pow(u, 0.7));
  CHECK(std::abs(gap_ratio - 1.0) <= 0.10);
}

TEST_CASE("below the half exponent the Gaussian cost drops out") {
  // For beta = 0.3 the exponent collapses to the duration hazard alone.
  ModerateDeviationProblem prob{asympt::hazard_of(TailModel::weibull_t1(0.3)),
                                1.0};
  const double u = 1e4;
  auto tail = asympt::moderate_deviation_tail(prob, u);
  const double ratio = std::exp(tail.log_value + prob.hazard.hazard(u));
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);
}

TEST_CASE("asymptote hazard rate doubles with the tail-exponent power") {
  ModerateDeviationProblem prob{asympt::hazard_of(TailModel::weibull_t1(0.7)),
                                1.0};
  const double u = 1e6, h = 1.0;
  auto exponent_at = [&](double v) {
    return -asympt::moderate_deviation_tail(prob, v).log_value;
  };
  const double qz_u = (exponent_at(u + h) - exponent_at(u - h)) / (2 * h);
  const double qz_2u =
      (exponent_at(2 * u + h) - exponent_at(2 * u - h)) / (2 * h);
  CHECK(std::abs(qz_2u / qz_u - std::pow(2.0, -0.3)) <
        0.05 * std::pow(2.0, -0.3));
  // The closed-form rate u/t(u) - mu agrees with the finite difference.
  CHECK(asympt::moderate_deviation_hazard_rate(prob, u) ==
        doctest::Approx(qz_u).epsilon(1e-4));
}

TEST_CASE("fast-source workload tail factorizes with the exact constant") {
  auto model = moderate_model();
  const double u = 9.0;
  auto asym = asympt::supercritical_tail(model, u);
  REQUIRE(asym.factors.size() == 2);
  CHECK(asym.factors[0].name == "cycle_prefactor");
  // p (r - rho)/(c - rho) = 0.25 * 1.5 / 1 = 0.375.
  CHECK(asym.factors[0].log_value == doctest::Approx(std::log(0.375)));
  CHECK(asym.factors[1].name == "drifted_sup_tail");
  // Consistency with the drifted-sup machinery it is built on.
  ModerateDeviationProblem prob{
      asympt::hazard_of(model.source()->on_residual()), 0.5};
  auto inner = asympt::moderate_deviation_tail(prob, u);
  CHECK(asym.log_value ==
        doctest::Approx(std::log(0.375) + inner.log_value).epsilon(1e-12));
  // Factor logs always sum to the total.
  double sum = 0.0;
  for (const auto& f : asym.factors) sum += f.log_value;
  CHECK(asym.log_value == doctest::Approx(sum).epsilon(1e-14));
  CHECK(asym.value.has_value());
  CHECK(*asym.value == doctest::Approx(std::exp(asym.log_value)));
  // Far out the probability-scale value underflows and is withheld.
  auto deep = asympt::supercritical_tail(model, 1e7);
  CHECK_FALSE(deep.value.has_value());
  CHECK(deep.log_value < -1e3);
}

TEST_CASE("negative-drift random walk maximum via the integrated tail") {
  auto asym = asympt::random_walk_sup_tail(TailModel::pareto(2.0, 1.0), -4.0,
                                           3.0);
  // integral of (1+v)^{-2} from 3 is 1/4; divided by |mean| = 4.
  CHECK(asym.value.has_value());
  CHECK(*asym.value == doctest::Approx(1.0 / 16.0).epsilon(1e-9));
  CHECK(asym.factors[0].name == "integrated_tail");
  CHECK(asym.factors[1].name == "drift_normalizer");
  CHECK_THROWS_AS(
      asympt::random_walk_sup_tail(TailModel::pareto(2.0), 0.5, 3.0),
      RegimeError);
}

TEST_CASE("critical-constant candidates")
{
  CHECK(asympt::critical_exponent(CriticalExponent::HTimesNuMinusOne, 0.5,
                                  2.0) == doctest::Approx(0.5));
  CHECK(asympt::critical_exponent(CriticalExponent::NuMinusOneOverH, 0.5,
                                  2.0) == doctest::Approx(2.0));
  // Reflection-principle moments: E|N|^q = 2^{q/2} Gamma((q+1)/2)/sqrt(pi).
  CHECK(asympt::bm_sup_moment(0.0) == doctest::Approx(1.0));
  CHECK(asympt::bm_sup_moment(1.0) == doctest::Approx(std::sqrt(2.0 / M_PI)));
  CHECK(asympt::bm_sup_moment(2.0) == doctest::Approx(1.0));
  CHECK(asympt::critical_prefactor_gamma(2.0) == doctest::Approx(6.0));
  CHECK(asympt::critical_prefactor_gamma(1.5) ==
        doctest::Approx(std::pow(2.0, 2.5) / std::sqrt(M_PI)));
  auto pf =
      asympt::make_critical_prefactor(CriticalExponent::NuMinusOneOverH, 0.5,
                                      2.0);
  CHECK(pf.value == doctest::Approx(1.0));
  CHECK(!pf.provenance.empty());
  auto pf2 = asympt::make_critical_prefactor(CriticalExponent::HTimesNuMinusOne,
                                             0.5, 2.0);
  CHECK(pf2.value == doctest::Approx(asympt::bm_sup_moment(0.5)));
  CHECK_THROWS_AS(asympt::make_critical_prefactor(
                      CriticalExponent::NuMinusOneOverH, 0.7, 2.0),
                  RegimeError);
  CHECK_THROWS_AS(asympt::bm_sup_moment(-3.0), RangeError);
}

TEST_CASE("balanced-rate workload tail follows the residual duration at sigma-inverse") {
  auto model = critical_model();
  asympt::CriticalPrefactor unit{1.0, "unit"};
  // At u = 0 only the on-fraction survives.
  auto at0 = asympt::critical_tail(model, 0.0, unit);
  CHECK(at0.value.has_value());
  CHECK(*at0.value == doctest::Approx(0.5));
  // sigma^{-1}(3) = 9 and the residual power tail gives (1 + 9)^{-1}.
  auto at3 = asympt::critical_tail(model, 3.0, unit);
  CHECK(*at3.value == doctest::Approx(0.05));
  CHECK(at3.factors.front().name == "on_fraction");
}

TEST_CASE("drifted-sup log tail and its exact Brownian anchor") {
  auto bm = GaussianSpec::brownian(1.0);
  for (double u : {1.0, 2.0, 3.0})
    CHECK(asympt::log_sup_power_drift(bm, 1.0, 1.0, u) == -2.0 * u);
  // Doubling the drain coefficient doubles the Brownian exponent.
  CHECK(asympt::log_sup_power_drift(bm, 2.0, 1.0, 1.5) ==
        doctest::Approx(2.0 * asympt::log_sup_power_drift(bm, 1.0, 1.0, 1.5)));
  // Independent oracle: minimize (u + d t)^2 / (2 sigma^2(t)) directly.
  auto fbm = GaussianSpec::fbm(0.6);
  const double u = 5.0, d = 0.8;
  auto cost = [&](double t) {
    const double num = u + d * t;
    return num * num / (2.0 * fbm.variance(t));
  };
  const double oracle = -cost(golden_min(cost, 1e-9, 1e9));
  CHECK(asympt::log_sup_power_drift(fbm, d, 1.0, u) ==
        doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("slow-source factorization in the subcritical regime") {
  auto model = reduced_peak_model();
  // (1/(c-r)) (alpha/(2-alpha)) u with alpha = 1, c - r = 1/2.
  CHECK(asympt::reduced_peak_time_scale(model, 4.0) == doctest::Approx(8.0));
  auto asym = asympt::subcritical_tail(model, 4.0);
  // p = 1/2, Gaussian factor e^{-2 (c-r) u}, residual tail (1 + 2u)^{-1}.
  const double expect = std::log(0.5) - 2.0 * 0.5 * 4.0 - std::log(9.0);
  CHECK(asym.log_value == doctest::Approx(expect).epsilon(1e-12));
  // An externally supplied Gaussian factor replaces the analytic one.
  auto with_mc = asympt::subcritical_tail(model, 4.0, -3.5);
  CHECK(with_mc.log_value ==
        doctest::Approx(std::log(0.5) - 3.5 - std::log(9.0)));
}

TEST_CASE("regime classification covers every drift and duration class") {
  using asympt::Regime;
  auto cls = [](const HybridModel& m) {
    return asympt::classify_regime(m).regime;
  };
  CHECK(cls(HybridModel::make(GaussianSpec::brownian(1.0), std::nullopt,
                              1.0)) == Regime::Unsupported);
  CHECK(cls(moderate_model()) == Regime::ModerateDeviation);
  // Heavier stretched tail: sqrt-scale noise is absorbed, no evaluator.
  CHECK(cls(make_model(GaussianSpec::brownian(1.0), 2.0,
                       TailModel::weibull_t1(0.3),
                       TailModel::constant_duration(30.0), 1.5)) ==
        Regime::ReducedLoad);
  // Power-law on-periods absorb sqrt-scale noise as well.
  CHECK(cls(make_model(GaussianSpec::brownian(1.0), 2.0,
                       TailModel::pareto(2.0, 1.0),
                       TailModel::constant_duration(3.0), 1.5)) ==
        Regime::ReducedLoad);
  // Fractional noise has no moderate-deviation evaluator.
  CHECK(cls(make_model(GaussianSpec::fbm(0.7), 2.0,
                       TailModel::weibull_t1(
                           0.7, tails::SlowlyVarying::constant(
                                    std::pow(std::tgamma(1.0 + 1.0 / 0.7),
                                             0.7))),
                       TailModel::constant_duration(3.0), 1.5)) ==
        Regime::Unsupported);
  // Exponential on-periods are too light for any heavy-tail evaluator.
  CHECK(cls(make_model(GaussianSpec::brownian(1.0), 2.0,
                       TailModel::exponential(1.0),
                       TailModel::constant_duration(3.0), 1.5)) ==
        Regime::Unsupported);
  CHECK(cls(critical_model()) == Regime::Oscillatory);
  CHECK(cls(critical_model(GaussianSpec::fbm(0.7))) == Regime::Oscillatory);
  CHECK(cls(make_model(GaussianSpec::brownian(1.0), 1.0,
                       TailModel::weibull_t1(0.7), TailModel::exponential(1.0),
                       1.0)) == Regime::Unsupported);
  CHECK(cls(reduced_peak_model()) == Regime::ReducedPeak);
  CHECK(cls(make_model(GaussianSpec::fbm(0.5), 0.5,
                       TailModel::weibull_t1(0.7), TailModel::exponential(1.0),
                       1.0)) == Regime::Unsupported);
  CHECK(!asympt::classify_regime(reduced_peak_model()).explanation.empty());
  CHECK(asympt::to_string(Regime::ReducedPeak) != "");
}

TEST_CASE("evaluator preconditions are enforced") {
  auto bm_only = HybridModel::make(GaussianSpec::brownian(1.0), std::nullopt,
                                   1.0);
  CHECK_THROWS_AS(asympt::supercritical_tail(bm_only, 2.0), RegimeError);
  CHECK_THROWS_AS(asympt::supercritical_tail(reduced_peak_model(), 2.0),
                  RegimeError);
  CHECK_THROWS_AS(asympt::supercritical_tail(critical_model(), 2.0),
                  RegimeError);
  // Power-law on-periods do not satisfy the stretched-exponential contract.
  CHECK_THROWS_AS(
      asympt::supercritical_tail(
          make_model(GaussianSpec::brownian(1.0), 2.0,
                     TailModel::pareto(2.0, 1.0),
                     TailModel::constant_duration(3.0), 1.5),
          2.0),
      RegimeError);
  asympt::CriticalPrefactor unit{1.0, "unit"};
  CHECK_THROWS_AS(asympt::critical_tail(bm_only, 1.0, unit), RegimeError);
  CHECK_THROWS_AS(asympt::critical_tail(moderate_model(), 1.0, unit),
                  RegimeError);
  CHECK_THROWS_AS(
      asympt::critical_tail(critical_model(), 1.0,
                            asympt::CriticalPrefactor{0.0, "zero"}),
      RangeError);
  CHECK_THROWS_AS(asympt::subcritical_tail(critical_model(), 1.0), RegimeError);
  CHECK_THROWS_AS(asympt::reduced_peak_time_scale(critical_model(), 1.0),
                  RegimeError);
  CHECK_THROWS_AS(asympt::log_sup_power_drift(GaussianSpec::brownian(1.0), 0.0,
                                              1.0, 1.0),
                  RangeError);
  // eta must exceed alpha/2 for the sup to be finite.
  CHECK_THROWS_AS(asympt::log_sup_power_drift(GaussianSpec::brownian(1.0), 1.0,
                                              0.4, 1.0),
                  RegimeError);
  // No interior stationary point: a flat hazard never balances the drift
  // cost, and the solver must refuse rather than extrapolate.
  asympt::HazardSpec flat;
  flat.hazard = [](double) { return 1.0; };
  flat.hazard_rate = [](double) { return 0.0; };
  flat.hazard_rate_deriv = [](double) { return 0.0; };
  CHECK_THROWS_AS(
      asympt::solve_critical_time(ModerateDeviationProblem{flat, 1.0}, 10.0),
      RangeError);
  CHECK_THROWS_AS(
      asympt::solve_critical_time(ModerateDeviationProblem{{}, 1.0}, 10.0),
      ConfigError);
}
