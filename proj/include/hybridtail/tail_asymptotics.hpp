#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybridtail/fluid_workload.hpp"
#include "hybridtail/gaussian_paths.hpp"
#include "hybridtail/heavy_tails.hpp"

namespace hybridtail::asympt {

// One multiplicative factor of an asymptote, kept on log scale so products
// of very small terms stay representable.
struct AsymptoteFactor {
  std::string name;
  double log_value = 0.0;
  std::string note;
};

struct Asymptote {
  double log_value = 0.0;
  // exp(log_value) when it does not underflow; factor log_values always sum
  // to log_value.
  std::optional<double> value;
  std::string regime;
  std::string validity;
  std::vector<AsymptoteFactor> factors;
};

Asymptote finish_asymptote(std::string regime, std::string validity,
                           std::vector<AsymptoteFactor> factors);

// Which evaluator covers a model's workload tail.
enum class Regime {
  ReducedLoad,        // r > c and the duration tail absorbs sqrt-scale noise
  ModerateDeviation,  // r > c, Gaussian fluctuations enter the exponent
  Oscillatory,        // r = c, tail carried by one long on-period sup
  ReducedPeak,        // r < c, Gaussian large deviation times one on-period
  Unsupported
};
std::string to_string(Regime regime);

struct RegimeDecision {
  Regime regime = Regime::Unsupported;
  std::string explanation;
};

// Pure function of (sign(r - c), duration-law class, square-root absorption
// diagnostic).  ReducedLoad is classified but has no evaluator here: its
// tail follows the residual duration tail alone.
RegimeDecision classify_regime(const fluid::HybridModel& model);

// Duration hazard bundle used by the stationary-point machinery.  The two
// flags seed the solver's initial guess; correctness never depends on them.
struct HazardSpec {
  std::function<double(double)> hazard;             // Q(t) = -log P{T > t}
  std::function<double(double)> hazard_rate;        // Q'(t)
  std::function<double(double)> hazard_rate_deriv;  // Q''(t)
  bool stretched_power = false;  // Q grows like L(t) t^g, 0 < g < 1
  double growth_index = 0.0;     // g when stretched_power
};
HazardSpec hazard_of(const tails::TailModel& m);
HazardSpec hazard_of(const tails::ResidualModel& m);

// Cost of pushing a unit-variance Brownian path with upward drift mu > 0 to
// a level u by time t = x u, per unit of u:
//   drift_cost(x)  = mu^2 x / 2 - mu + 1 / (2 x)      (zero at x = 1/mu)
//   and its x-derivative mu^2 / 2 - 1 / (2 x^2)       (zero at x = 1/mu)
double drift_cost(double mu, double x);
double drift_cost_slope(double mu, double x);

// P{ sup_{0<=s<=T} [B(s) + mu s] > u } for a unit-variance Brownian motion B
// and an independent duration T with the given hazard.
struct ModerateDeviationProblem {
  HazardSpec hazard;
  double mu = 1.0;  // > 0
};

struct CriticalTime {
  double t = 0.0;         // stationary point of Q(t) + u * drift_cost(t/u)
  double exponent = 0.0;  // the exponent value there
  int iterations = 0;
};

// Solves Q'(t) + drift_cost_slope(mu, t/u) = 0 on (0, u/mu).  Every sign
// change found on a scan grid is polished (bisection, then Newton when Q''
// is available) and the root with the smallest exponent wins, so the result
// is the global minimiser, not just a stationary point.  Refuses to
// extrapolate: no sign change means u is too small for this expansion.
CriticalTime solve_critical_time(const ModerateDeviationProblem& prob,
                                 double u);

// log P{...} ~ -[Q(t(u)) + u * drift_cost(t(u)/u)] with both exponent pieces
// retained as factors.
Asymptote moderate_deviation_tail(const ModerateDeviationProblem& prob,
                                  double u);

// d/du of the exponent along the optimum; collapses to u / t(u) - mu because
// the t-derivative vanishes at the stationary point.
double moderate_deviation_hazard_rate(const ModerateDeviationProblem& prob,
                                      double u);

// Workload tail for r > c with Brownian noise and stretched-exponential
// on-periods: p (r - rho)/(c - rho) times the drifted-sup tail of the
// residual on-period at drift r - c (rescaled to unit variance).
Asymptote supercritical_tail(const fluid::HybridModel& model, double u);

// All-time maximum of a random walk with negative-mean increments whose
// upper tail matches increment_tail: integrated_tail(u) / (-mean).
Asymptote random_walk_sup_tail(const tails::TailModel& increment_tail,
                               double mean_increment, double u);

// ---- r == c -----------------------------------------------------------

// The critical-regime constant is E[(sup_{[0,1]} B_H)^q].  Two candidate
// exponents are implemented because two derivations of the same scaling
// limit disagree; nothing here decides between them — the validation suite
// measures which one matches simulation.
enum class CriticalExponent {
  HTimesNuMinusOne,  // q = H (nu - 1)
  NuMinusOneOverH    // q = (nu - 1) / H
};
double critical_exponent(CriticalExponent which, double hurst, double nu);

// E[(sup_{[0,1]} B_H)^q] for H = 1/2 in closed form via the reflection
// principle: the sup is |N(0,1)|, so the moment is 2^{q/2} Gamma((q+1)/2) /
// sqrt(pi).  Requires q > -2.
double bm_sup_moment(double q);

// Closed-form candidate for the critical-regime constant at alpha = 1:
// (1/sqrt(pi)) 2^{1+nu} Gamma(nu + 1/2).  A third candidate for the
// arbitration run; it does not equal bm_sup_moment at either candidate
// exponent.
double critical_prefactor_gamma(double nu);

struct CriticalPrefactor {
  double value = 1.0;
  std::string provenance;  // formula or MC settings that produced it
};

// Closed-form prefactor for Brownian noise (hurst = 1/2).  Other H need an
// MC moment from gaussian_paths::estimate_prefactor_moment.
CriticalPrefactor make_critical_prefactor(CriticalExponent which, double hurst,
                                          double nu);

// Workload tail for r = c, self-similar noise, regularly varying on-periods:
// p * C * P{T_on residual > sigma^{-1}(u)}.
Asymptote critical_tail(const fluid::HybridModel& model, double u,
                        const CriticalPrefactor& prefactor);

// ---- Gaussian-only large deviations ------------------------------------

// log P{ sup_t [X(t) - d t^eta] > u } for d > 0 and eta > alpha/2:
//   -(1/2) d^{alpha/eta} (alpha/(2 eta - alpha))^{-alpha/eta}
//        (2 eta/(2 eta - alpha))^2 u^2 / sigma^2(u^{1/eta}).
// At alpha = eta = 1 this is exactly -2 d u / variance_rate, matching the
// exact exponential sup law of drifted Brownian motion.
double log_sup_power_drift(const gauss::GaussianSpec& spec, double d,
                           double eta, double u);

// ---- r < c --------------------------------------------------------------

// Duration argument of the subcritical factorization:
// (1/(c - r)) (alpha/(2 - alpha)) u.
double reduced_peak_time_scale(const fluid::HybridModel& model, double u);

// Workload tail for r < c with regularly varying on-periods:
// p * P{sup_t [X(t) - (c-r) t] > u} * P{T_on residual > time scale}.
// The Gaussian factor defaults to log_sup_power_drift (log-scale accuracy
// only); pass gaussian_log_tail to substitute an MC estimate.
Asymptote subcritical_tail(const fluid::HybridModel& model, double u,
                           std::optional<double> gaussian_log_tail =
                               std::nullopt);

}  // namespace hybridtail::asympt
