#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "hybridtail/errors.hpp"
#include "hybridtail/fluid_workload.hpp"
#include "test_util.hpp"

using namespace hybridtail;
using fluid::HybridModel;
using fluid::SimOptions;
using tails::TailModel;

namespace {

HybridModel bm_only() {
  return HybridModel::make(gauss::GaussianSpec::brownian(1.0), std::nullopt,
                           1.0);
}

HybridModel critical_model() {
  // r = c = 1, power-tail on-periods: the single-long-on-period regime.
  return HybridModel::make(
      gauss::GaussianSpec::brownian(1.0),
      onoff::OnOffSpec::make(1.0, TailModel::pareto(2.0, 1.0),
                             TailModel::exponential(1.0)),
      1.0);
}

HybridModel fast_source_model() {
  // r = 2 > c = 1.5, mean-1 stretched-exponential on, fixed off of 3.
  const double a = std::pow(std::tgamma(1.0 + 1.0 / 0.7), 0.7);
  return HybridModel::make(
      gauss::GaussianSpec::brownian(1.0),
      onoff::OnOffSpec::make(
          2.0, TailModel::weibull_t1(0.7, tails::SlowlyVarying::constant(a)),
          TailModel::constant_duration(3.0)),
      1.5);
}

}  // namespace

TEST_CASE("model accounting: rates, fractions, drift class") {
  auto m = fast_source_model();
  CHECK(m.p() == doctest::Approx(0.25));
  CHECK(m.rho() == doctest::Approx(0.5));
  CHECK(m.stability_margin() == doctest::Approx(1.0));
  CHECK(m.drift() == HybridModel::Drift::Supercritical);
  CHECK(m.source()->on().mean() == doctest::Approx(1.0));
  CHECK(critical_model().drift() == HybridModel::Drift::Critical);
  CHECK(bm_only().drift() == HybridModel::Drift::Subcritical);
  CHECK(bm_only().p() == 0.0);
}

TEST_CASE("truncation horizon scales with the level and the drift gap") {
  CHECK(fluid::horizon_for(bm_only(), 2.0, 5.0) == doctest::Approx(10.0));
  // Positive levels scale linearly; only level zero is clamped so the
  // horizon never collapses to nothing.
  CHECK(fluid::horizon_for(bm_only(), 0.25, 5.0) == doctest::Approx(1.25));
  CHECK(fluid::horizon_for(bm_only(), 0.0, 5.0) == doctest::Approx(5.0));
  // In the critical regime the horizon follows sigma^{-1}(u) = u^2 once
  // that exceeds the drift time scale.
  CHECK(fluid::horizon_for(critical_model(), 4.0, 5.0) ==
        doctest::Approx(80.0));
  CHECK(fluid::horizon_for(critical_model(), 1.0, 5.0) ==
        doctest::Approx(10.0));
}

TEST_CASE("noise-only workload matches the exponential closed form") {
  SimOptions opts;
  opts.n_steps = 8192;
  auto est = fluid::estimate_tail(bm_only(), 2.0, 30000, opts, 424242, 1);
  // Refinement-corrected estimate against P{V > u} = exp(-2u).
  const double corrected = est.p_hat + 2.414 * est.bias_indicator;
  const double target = std::exp(-4.0);
  CHECK(std::abs(corrected - target) <
        3.0 * testutil::binom_se(target, 30000) + 3e-4);
  CHECK(est.ci_low <= est.p_hat);
  CHECK(est.p_hat <= est.ci_high);
  CHECK(est.horizon == doctest::Approx(10.0));
}

TEST_CASE("level zero counts strictly positive grid sups") {
  // In continuous time P{V > 0} = 1 for noisy input, but the grid estimator
  // sees an atom of paths whose sampled sup sits exactly at the t = 0
  // anchor; the zero-level estimate is therefore high yet honest (< 1).
  SimOptions opts;
  opts.n_steps = 256;
  auto est = fluid::estimate_tail(bm_only(), 0.0, 200, opts, 7, 2);
  CHECK(est.p_hat > 0.7);
  CHECK(est.p_hat <= 1.0);
  CHECK(est.ci_low <= est.p_hat);
  CHECK(est.ci_high <= 1.0);
}

TEST_CASE("interval estimates switch shape in the rare-event range") {
  SimOptions opts;
  opts.n_steps = 2048;
  // Around a handful of hits the interval comes from the score bound and
  // is asymmetric around p_hat.
  auto few = fluid::estimate_tail(bm_only(), 2.75, 2000, opts, 11, 3);
  CHECK(few.p_hat > 0.0);
  CHECK(few.p_hat * 2000 < 30);
  CHECK_FALSE(few.rule_of_three);
  CHECK(few.ci_high - few.p_hat > few.p_hat - few.ci_low);
  CHECK(few.ci_low > 0.0);
  // With zero hits the interval is [0, 3/n].
  auto none = fluid::estimate_tail(bm_only(), 8.0, 200, opts, 12, 4);
  CHECK(none.p_hat == 0.0);
  CHECK(none.rule_of_three);
  CHECK(none.ci_low == 0.0);
  CHECK(none.ci_high == doctest::Approx(3.0 / 200.0));
}

TEST_CASE("per-path draws are pinned by the path index alone") {
  auto model = critical_model();
  SimOptions opts;
  opts.n_steps = 512;
  auto a = fluid::collect_sups(model, 2.0, 100, opts, 99, 5, 1, std::nullopt);
  auto b = fluid::collect_sups(model, 2.0, 200, opts, 99, 5, 3, std::nullopt);
  REQUIRE(a.size() == 100);
  REQUIRE(b.size() == 200);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sup == b[i].sup);
    CHECK(a[i].argmax_time == b[i].argmax_time);
    CHECK(a[i].covering_on == b[i].covering_on);
  }
  for (const auto& s : b) CHECK(s.sup_coarse <= s.sup + 1e-15);
}

TEST_CASE("stratifying the initial state is consistent with crude sampling") {
  auto model = critical_model();
  SimOptions opts;
  opts.n_steps = 2048;
  auto crude = fluid::estimate_tail(model, 2.0, 20000, opts, 321, 6);
  opts.stratify = true;
  auto strat = fluid::estimate_tail(model, 2.0, 20000, opts, 321, 7);
  CHECK(strat.stratified);
  const double se_c = (crude.ci_high - crude.ci_low) / (2 * 1.96);
  const double se_s = (strat.ci_high - strat.ci_low) / (2 * 1.96);
  CHECK(std::abs(crude.p_hat - strat.p_hat) < 3.0 * (se_c + se_s));
}

TEST_CASE("embedded cycle increments have the book-keeping mean") {
  auto model = fast_source_model();
  // E{U} = (r - c) E{on} - c E{off} = 0.5 - 4.5 = -4.
  const int n = 20000;
  std::vector<double> us;
  us.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto cyc = fluid::sample_cycle(model, fluid::CycleKind::Generic, 512,
                                   fluid::PathStreams::derive(77, 8, i));
    CHECK(cyc.M >= cyc.U - 1e-12);
    us.push_back(cyc.U);
  }
  auto ms = testutil::mean_se(us);
  CHECK(std::abs(ms.mean - (-4.0)) < 3.0 * ms.se);
}

TEST_CASE("a first cycle from an on start closes at the regeneration point") {
  auto model = fast_source_model();
  for (int i = 0; i < 50; ++i) {
    auto cyc = fluid::sample_cycle(model, fluid::CycleKind::First, 512,
                                   fluid::PathStreams::derive(78, 9, i), 1);
    CHECK(cyc.initial_state == 1);
    CHECK(cyc.length > 0.0);
  }
}

TEST_CASE("a noiseless fixed-duration cycle is pure arithmetic") {
  auto model = HybridModel::make(
      gauss::GaussianSpec::brownian(0.0),
      onoff::OnOffSpec::make(2.0, TailModel::constant_duration(1.0),
                             TailModel::constant_duration(2.0)),
      1.5);
  auto cyc = fluid::sample_cycle(model, fluid::CycleKind::Generic, 4096,
                                 fluid::PathStreams::derive(79, 1, 0));
  CHECK(cyc.length == doctest::Approx(3.0));
  CHECK(cyc.U == doctest::Approx(-2.5));  // -1.5 * 2 + 0.5 * 1
  CHECK(cyc.M <= 0.0);
  CHECK(cyc.M > -0.01);  // sup is approached at t -> 0+
}

TEST_CASE("random-interval sups dominate their endpoints") {
  auto spec = gauss::GaussianSpec::brownian(1.0);
  auto duration = TailModel::constant_duration(2.0);
  const int n = 3000;
  std::vector<double> ends;
  ends.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto s = fluid::sample_sup_over_random_interval(
        spec, duration, 1.0, 1024, fluid::PathStreams::derive(80, 2, i));
    CHECK(s.duration == doctest::Approx(2.0));
    CHECK(s.sup >= s.endpoint - 1e-12);
    CHECK(s.sup >= 0.0);
    ends.push_back(s.endpoint);
  }
  // X(2) + 2 has mean 2 (and variance 2).
  auto ms = testutil::mean_se(ends);
  CHECK(std::abs(ms.mean - 2.0) < 4.0 * ms.se);
}

TEST_CASE("construction and estimation guards") {
  CHECK_THROWS_AS(HybridModel::make(gauss::GaussianSpec::brownian(1.0),
                                    std::nullopt, 0.0),
                  RegimeError);
  // Unstable: rho = p r = 1 * 2 / 2 = 1 >= c.
  CHECK_THROWS_AS(
      HybridModel::make(gauss::GaussianSpec::brownian(1.0),
                        onoff::OnOffSpec::make(2.0, TailModel::exponential(1.0),
                                               TailModel::exponential(1.0)),
                        1.0),
      RegimeError);
  SimOptions opts;
  CHECK_THROWS_AS(fluid::estimate_tail(bm_only(), 1.0, 50, opts, 1), RegimeError);
  CHECK_THROWS_AS(fluid::horizon_for(bm_only(), 1.0, 0.0), RegimeError);
  // Embedded cycles need a peak rate above the drain and Brownian noise.
  CHECK_THROWS_AS(fluid::sample_cycle(critical_model(),
                                      fluid::CycleKind::Generic, 64,
                                      fluid::PathStreams::derive(1, 0, 0)),
                  RegimeError);
  CHECK_THROWS_AS(fluid::sample_cycle(bm_only(), fluid::CycleKind::Generic, 64,
                                      fluid::PathStreams::derive(1, 0, 0)),
                  RegimeError);
}
