#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hybridtail::harness {

// One property suite outcome: a verdict plus the measured values that led to
// it, one line per check so failures are diagnosable from the report alone.
struct SuiteResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;
};

// Renewal-count sandwich on drifted Brownian paths: the level count must
// equal the floor of the running grid maximum, with zero exceptions.
struct SandwichParams {
  long n_paths = 1000;
  int n_steps = 4096;
  double horizon = 10.0;
  double mu = 1.0;
};
SuiteResult renewal_sandwich(const SandwichParams& params, std::uint64_t seed);

// Endpoint-vs-sup tail equivalence over a heavy-tailed random interval:
// P{W_mu(T) > u} / P{sup W_mu > u} at increasing u, from common paths.
struct TailEquivParams {
  long n_paths = 100000;
  int n_steps = 2048;
  double mu = 1.0;
  double weibull_beta = 0.7;
  std::vector<double> u = {4.0, 6.0, 8.5};
  double min_ratio = 0.7;  // required at the largest u
};
SuiteResult tail_equivalence(const TailEquivParams& params, std::uint64_t seed);

// Exact first-passage sampler: mean, variance, and moment generating
// function against their closed forms, each within 4 standard errors.
struct HittingParams {
  long n_draws = 1000000;
  double mu = 1.0;
  double level = 1.0;
  double mgf_y = 0.25;
};
SuiteResult hitting_moments(const HittingParams& params, std::uint64_t seed);

// Stationary-point machinery, no simulation: the linearized gap to the
// drift optimum, the small-index collapse onto the duration tail, and the
// index of the asymptote's numeric hazard.
struct CriticalTimeParams {
  double gap_beta = 0.7;
  double gap_u = 1e6;
  double gap_tol = 0.10;
  double collapse_beta = 0.3;
  double collapse_u = 1e4;
  double collapse_lo = 0.9;
  double collapse_hi = 1.1;
  double hazard_beta = 0.7;
  double hazard_u = 1e6;
  double hazard_tol = 0.05;
};
SuiteResult critical_time_convergence(const CriticalTimeParams& params);

// Critical-regime constant arbitration: the measured workload tail divided
// by p times the duration factor, against the three candidate constants.
struct PrefactorParams {
  // The level must sit beyond the pre-asymptotic range: at small u the
  // measured constant is inflated by paths that cross without one long
  // on-period dominating, and no candidate would match it there.
  double u = 12.5;
  long n_paths = 40000;
  int n_steps = 1 << 13;
  double factor = 1.5;  // a candidate passes when the ratio is within this
  int workers = 1;
};
SuiteResult prefactor_arbitration(const PrefactorParams& params,
                                  std::uint64_t seed);

// Log-log slope of the measured workload tail in the balanced-rate model
// against the predicted regular-variation index.
struct RvSlopeParams {
  std::vector<double> u = {2.0, 4.0, 7.0, 12.5};
  long n_paths = 40000;
  int n_steps = 1 << 13;
  double expected_slope = -2.0;
  double slope_tol = 0.3;
  int workers = 1;
};
SuiteResult rv_slope(const RvSlopeParams& params, std::uint64_t seed);

// Names accepted by the config `suites` key, in canonical order.
std::vector<std::string> suite_names();

// Runs one suite at its documented default sizes.
SuiteResult run_suite_by_name(const std::string& name, std::uint64_t seed,
                              int workers);

}  // namespace hybridtail::harness
