#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hybridtail/gaussian_paths.hpp"
#include "hybridtail/onoff_source.hpp"

namespace hybridtail::fluid {

// Stationary workload model V = sup_{t>=0} [X(t) + Y(t) - c t].  A missing
// source means Y is identically zero (the Gaussian-only anchor case).
class HybridModel {
 public:
  static HybridModel make(gauss::GaussianSpec gaussian,
                          std::optional<onoff::OnOffSpec> source, double drain);

  const gauss::GaussianSpec& gaussian() const { return gaussian_; }
  const std::optional<onoff::OnOffSpec>& source() const { return source_; }
  double drain() const { return drain_; }

  double peak_rate() const;  // r, or 0 without a source
  double p() const;          // stationary on-probability, 0 without a source
  double rho() const;        // mean input rate
  double stability_margin() const { return drain_ - rho(); }

  enum class Drift { Supercritical, Critical, Subcritical };
  Drift drift() const;  // sign of r - c

 private:
  HybridModel(gauss::GaussianSpec g, std::optional<onoff::OnOffSpec> s,
              double c);
  gauss::GaussianSpec gaussian_;
  std::optional<onoff::OnOffSpec> source_;
  double drain_;
};

// Truncation horizon for level u: K * u / (c - rho), stretched in the
// critical regime to K * max(u / (c - rho), sigma_inverse(u)) because there
// the exceedance is carried by a single on-period of length ~ sigma^{-1}(u).
double horizon_for(const HybridModel& model, double u, double horizon_factor);

struct SimOptions {
  int n_steps = 1 << 12;          // uniform Gaussian grid points per path
  double horizon_factor = 5.0;    // K
  bool stratify = false;          // condition the initial state and reweight
  bool include_kinks = true;      // exact bridge candidates at segment
                                  // boundaries (Brownian noise only)
};

// Per-path substreams, all derived from (seed, experiment, path) so a path's
// draws never depend on worker layout or on the total path count.
struct PathStreams {
  RngStream source;
  RngStream gaussian;
  RngStream bridge;

  static PathStreams derive(std::uint64_t seed, std::uint64_t experiment,
                            std::uint64_t path);
};

struct SupSample {
  double sup = 0.0;          // max over grid times, kinks, and t = 0
  double sup_coarse = 0.0;   // same candidates restricted to the half grid
  double argmax_time = 0.0;
  double horizon = 0.0;
  bool covering_on = false;        // argmax fell inside an on-period
  double covering_length = 0.0;    // duration of the covering segment
};

struct PathWorkspace {
  gauss::PathGrid grid;
};

// One path of S(t) = X(t) + Y(t) - c t on [0, horizon] and its grid sup.
// Y is evaluated exactly at grid times; with Brownian noise the sup
// candidates also include every segment boundary, where X is filled in by
// exact bridge sampling between the neighbouring grid points.  The coarse
// sup uses the even-index subgrid (plus the same kinks), giving the
// refinement bias indicator for free.
SupSample simulate_sup(const HybridModel& model, double u_ref,
                       const SimOptions& opts, PathStreams streams,
                       PathWorkspace& ws,
                       std::optional<int> force_initial = std::nullopt);
SupSample simulate_sup(const HybridModel& model, double u_ref,
                       const SimOptions& opts, PathStreams streams);

struct McEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long n_paths = 0;
  double horizon = 0.0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  double bias_indicator = 0.0;  // p_hat(full grid) - p_hat(half grid)
  bool rule_of_three = false;   // zero hits: ci_high is 3/n
  bool stratified = false;
};

// All per-path results of an estimate_tail run, in path-index order.  The
// first n entries are identical for any larger path count and any worker
// split, which is what the determinism tests pin down.
std::vector<SupSample> collect_sups(const HybridModel& model, double u,
                                    long n_paths, const SimOptions& opts,
                                    std::uint64_t seed,
                                    std::uint64_t experiment, int workers,
                                    std::optional<int> force_initial);

// Crude (or initial-state-stratified) Monte Carlo estimate of P{V > u}.
// 95% CI: normal approximation, Wilson when p_hat * n < 30, [0, 3/n] at
// p_hat = 0.
McEstimate estimate_tail(const HybridModel& model, double u, long n_paths,
                         const SimOptions& opts, std::uint64_t seed,
                         std::uint64_t experiment = 0, int workers = 1);

struct CycleSample {
  double U = 0.0;  // workload increment over the cycle
  double M = 0.0;  // sup of S over the cycle (t > 0)
  double length = 0.0;
  int initial_state = 0;  // first cycle only
};

enum class CycleKind { First, Generic };

// Workload increment and running sup over one regeneration cycle of the
// embedded random walk; Brownian noise with r > c only.  The first cycle
// runs to the first regeneration point from the stationary start; a generic
// cycle is one full (off, on) pair.
CycleSample sample_cycle(const HybridModel& model, CycleKind kind, int n_steps,
                         PathStreams streams,
                         std::optional<int> force_initial = std::nullopt);

struct RandomIntervalSup {
  double sup = 0.0;       // grid sup of X(t) + mu t over [0, T]
  double endpoint = 0.0;  // X(T) + mu T
  double duration = 0.0;  // the drawn T
};

// Draws T from `duration`, samples X on [0, T], and returns the grid sup and
// endpoint of X(t) + mu t.  Used to compare the endpoint and sup laws over a
// random interval.
RandomIntervalSup sample_sup_over_random_interval(
    const gauss::GaussianSpec& spec, const tails::TailModel& duration,
    double mu, int n_steps, PathStreams streams);
RandomIntervalSup sample_sup_over_random_interval(
    const gauss::GaussianSpec& spec, const tails::ResidualModel& duration,
    double mu, int n_steps, PathStreams streams);

}  // namespace hybridtail::fluid
