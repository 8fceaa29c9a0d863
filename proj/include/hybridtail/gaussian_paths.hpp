#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "hybridtail/rng.hpp"

namespace hybridtail::gauss {

enum class GaussianKind { BrownianMotion, FBM, CustomVariance };

// Centered Gaussian process with stationary increments, X(0) = 0, described
// by its variance function sigma^2(t) together with the local (alpha) and
// global (beta0) growth exponents used by the asymptotic evaluators.
class GaussianSpec {
 public:
  // sigma^2(t) = variance_rate * t.  variance_rate = 0 is accepted as a
  // degenerate test double (X identically 0).
  static GaussianSpec brownian(double variance_rate = 1.0);
  // sigma^2(t) = t^(2H), 0 < H < 1.
  static GaussianSpec fbm(double hurst);
  // Arbitrary variance function; alpha and beta0 must be supplied because
  // they cannot be recovered from a black-box callable.
  static GaussianSpec custom(std::function<double(double)> variance,
                             double alpha, double beta0);

  GaussianKind kind() const;
  double hurst() const;          // NaN for CustomVariance
  double alpha() const;
  double beta0() const;
  double variance_rate() const;  // BrownianMotion only, else NaN
  double variance(double t) const;
  double sigma(double t) const;

  // t with sigma(t) = u: closed form u^(1/H) for BM/FBM, otherwise a
  // bracketed bisection to relative tolerance 1e-12.
  double sigma_inverse(double u) const;

  // Whether exact conditional (bridge) sampling between grid points is
  // available; true only for Brownian motion.
  bool has_exact_bridge() const;

 private:
  struct Impl;
  explicit GaussianSpec(std::shared_ptr<const Impl>);
  std::shared_ptr<const Impl> impl_;
};

// Uniform grid path: values[i] = X(i * horizon / n_steps), values[0] = 0.
struct PathGrid {
  double horizon = 0.0;
  int n_steps = 0;
  std::vector<double> values;

  double step() const { return horizon / n_steps; }
  double time(int i) const { return horizon * double(i) / double(n_steps); }
};

// One-time setup per (spec, horizon, n_steps): circulant embedding of the
// increment covariance for FBM (grid size must be a power of two), nothing
// for Brownian motion, dense Cholesky for CustomVariance (n_steps <= 8192).
// Falls back from the embedding to Cholesky if an embedding eigenvalue sits
// below -1e-10; eigenvalues in [-1e-10, 0) are clipped to zero.
class PathSampler {
 public:
  PathSampler(GaussianSpec spec, double horizon, int n_steps);

  const GaussianSpec& spec() const { return spec_; }
  double horizon() const { return horizon_; }
  int n_steps() const { return n_steps_; }

  PathGrid sample(RngStream& rng) const;
  void sample_into(PathGrid& out, RngStream& rng) const;

 private:
  enum class Method { Iid, Circulant, Cholesky };
  GaussianSpec spec_;
  double horizon_;
  int n_steps_;
  Method method_;
  double iid_sd_ = 0.0;
  std::vector<double> coef_;          // Circulant: sqrt(lambda_j / m)
  std::vector<double> chol_;          // Cholesky: lower factor, row-major
};

PathGrid sample_path(const GaussianSpec& spec, double horizon, int n_steps,
                     RngStream& rng);

// Grid sup of X over [0, 1]; always >= 0 because t = 0 is a grid point.
double sup_on_unit_interval(const GaussianSpec& spec, int n_steps,
                            RngStream& rng);

struct MomentEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long n_paths = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  // Mean difference between the full-grid and half-grid statistic on the
  // same paths; reported, never applied as a correction.
  double bias_indicator = 0.0;
  bool flagged = false;  // nonfinite sample moment encountered
};

// Monte Carlo estimate of E[ (sup_{[0,1]} B_H)^q ] on an n_steps grid.
// q = 0 returns exactly 1.  Requires q > -1/H for a finite limit.
MomentEstimate estimate_prefactor_moment(double hurst, double q, long n_paths,
                                         int n_steps, std::uint64_t seed);

// First passage time of a unit-variance Brownian motion with drift mu > 0 to
// level x > 0; exact inverse-Gaussian draw (mean x/mu, variance x/mu^3).
double sample_hitting_time(double mu, double level, RngStream& rng);

// Number of whole levels crossed by the running grid maximum up to time t:
// floor(max(0, M(t))).  The path must cover [0, t].
long renewal_count(const PathGrid& path, double t);

}  // namespace hybridtail::gauss
