#include "hybridtail/gaussian_paths.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "hybridtail/errors.hpp"
#include "hybridtail/numerics.hpp"
#include "fft_radix2.hpp"

namespace hybridtail::gauss {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kCholeskyCap = 8192;

bool is_pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

struct GaussianSpec::Impl {
  GaussianKind kind = GaussianKind::BrownianMotion;
  double hurst = kNaN;
  double alpha = kNaN;
  double beta0 = kNaN;
  double vrate = kNaN;
  std::function<double(double)> variance;
};

GaussianSpec::GaussianSpec(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

GaussianSpec GaussianSpec::brownian(double variance_rate) {
  if (!(variance_rate >= 0.0))
    throw RegimeError("brownian: variance_rate must be >= 0");
  auto im = std::make_shared<Impl>();
  im->kind = GaussianKind::BrownianMotion;
  im->hurst = 0.5;
  im->alpha = 1.0;
  im->beta0 = 1.0;
  im->vrate = variance_rate;
  return GaussianSpec(im);
}

GaussianSpec GaussianSpec::fbm(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0))
    throw RegimeError("fbm: hurst must lie in (0, 1)");
  auto im = std::make_shared<Impl>();
  im->kind = GaussianKind::FBM;
  im->hurst = hurst;
  im->alpha = 2.0 * hurst;
  im->beta0 = 2.0 * hurst;
  return GaussianSpec(im);
}

GaussianSpec GaussianSpec::custom(std::function<double(double)> variance,
                                  double alpha, double beta0) {
  if (!variance) throw RegimeError("custom: variance callable required");
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw RegimeError("custom: alpha must lie in (0, 2]");
  if (!(beta0 > 0.0 && beta0 < 2.0))
    throw RegimeError("custom: beta0 must lie in (0, 2)");
  auto im = std::make_shared<Impl>();
  im->kind = GaussianKind::CustomVariance;
  im->alpha = alpha;
  im->beta0 = beta0;
  im->variance = std::move(variance);
  return GaussianSpec(im);
}

GaussianKind GaussianSpec::kind() const { return impl_->kind; }
double GaussianSpec::hurst() const { return impl_->hurst; }
double GaussianSpec::alpha() const { return impl_->alpha; }
double GaussianSpec::beta0() const { return impl_->beta0; }
double GaussianSpec::variance_rate() const { return impl_->vrate; }

double GaussianSpec::variance(double t) const {
  if (t <= 0) return 0.0;
  switch (impl_->kind) {
    case GaussianKind::BrownianMotion:
      return impl_->vrate * t;
    case GaussianKind::FBM:
      return std::pow(t, 2.0 * impl_->hurst);
    case GaussianKind::CustomVariance:
      return impl_->variance(t);
  }
  return kNaN;
}

double GaussianSpec::sigma(double t) const { return std::sqrt(variance(t)); }

double GaussianSpec::sigma_inverse(double u) const {
  if (!(u >= 0)) throw RegimeError("sigma_inverse: u must be >= 0");
  if (u == 0) return 0.0;
  switch (impl_->kind) {
    case GaussianKind::BrownianMotion:
      if (!(impl_->vrate > 0))
        throw RegimeError("sigma_inverse: degenerate variance");
      return u * u / impl_->vrate;
    case GaussianKind::FBM:
      return std::pow(u, 1.0 / impl_->hurst);
    case GaussianKind::CustomVariance: {
      double hi = 1.0;
      int guard = 0;
      while (sigma(hi) < u) {
        hi *= 2.0;
        if (++guard > 1100) throw RangeError("sigma_inverse: no bracket");
      }
      double lo = hi > 1.0 ? hi * 0.5 : 0.0;
      while (lo > 0 && sigma(lo) > u) lo *= 0.5;
      return num::bisect([&](double t) { return sigma(t) - u; }, lo, hi,
                         1e-12);
    }
  }
  return kNaN;
}

bool GaussianSpec::has_exact_bridge() const {
  return impl_->kind == GaussianKind::BrownianMotion;
}

// ---------------------------------------------------------------------------
// PathSampler

namespace {

// Stationary-increment covariance at lag k steps for step h:
//   (sigma2((k+1)h) - 2 sigma2(kh) + sigma2((k-1)h)) / 2.
double increment_cov(const GaussianSpec& spec, double h, long k) {
  if (k == 0) return spec.variance(h);
  return 0.5 * (spec.variance((k + 1) * h) - 2.0 * spec.variance(k * h) +
                spec.variance((k - 1) * h));
}

}  // namespace

PathSampler::PathSampler(GaussianSpec spec, double horizon, int n_steps)
    : spec_(std::move(spec)), horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0)) throw RegimeError("PathSampler: horizon must be > 0");
  if (n_steps < 1) throw RegimeError("PathSampler: n_steps must be >= 1");
  const double h = horizon_ / n_steps_;

  if (spec_.kind() == GaussianKind::BrownianMotion) {
    method_ = Method::Iid;
    iid_sd_ = std::sqrt(spec_.variance_rate() * h);
    return;
  }

  bool want_circulant =
      spec_.kind() == GaussianKind::FBM && is_pow2(n_steps_);
  if (want_circulant) {
    const long n = n_steps_, m = 2 * n;
    std::vector<std::complex<double>> c(m);
    for (long k = 0; k <= n; ++k) c[k] = increment_cov(spec_, h, k);
    for (long k = n + 1; k < m; ++k) c[k] = c[m - k];
    detail::fft_radix2(c, false);
    double min_ev = c[0].real();
    for (long j = 0; j < m; ++j) min_ev = std::min(min_ev, c[j].real());
    if (min_ev >= -1e-10) {
      method_ = Method::Circulant;
      coef_.resize(m);
      for (long j = 0; j < m; ++j) {
        double ev = std::max(c[j].real(), 0.0);
        coef_[j] = std::sqrt(ev / double(m));
      }
      return;
    }
    // Embedding failed beyond the clip tolerance: fall through to Cholesky.
  }

  if (n_steps_ > kCholeskyCap)
    throw CapacityError("PathSampler: dense factorization capped at 8192 steps");
  const int n = n_steps_;
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    const double ti = (i + 1) * h;
    for (int j = 0; j <= i; ++j) {
      const double tj = (j + 1) * h;
      const double v = 0.5 * (spec_.variance(ti) + spec_.variance(tj) -
                              spec_.variance(ti - tj));
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw RegimeError(
        "PathSampler: covariance is not positive definite beyond the clip "
        "tolerance");
  Eigen::MatrixXd L = llt.matrixL();
  method_ = Method::Cholesky;
  chol_.resize(std::size_t(n) * (n + 1) / 2);
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) chol_[idx++] = L(i, j);
}

PathGrid PathSampler::sample(RngStream& rng) const {
  PathGrid out;
  sample_into(out, rng);
  return out;
}

void PathSampler::sample_into(PathGrid& out, RngStream& rng) const {
  const int n = n_steps_;
  out.horizon = horizon_;
  out.n_steps = n;
  out.values.resize(n + 1);
  out.values[0] = 0.0;

  switch (method_) {
    case Method::Iid: {
      double acc = 0.0;
      for (int i = 1; i <= n; ++i) {
        acc += iid_sd_ * rng.normal();
        out.values[i] = acc;
      }
      return;
    }
    case Method::Circulant: {
      const long m = 2L * n;
      std::vector<std::complex<double>> z(m);
      z[0] = coef_[0] * rng.normal();
      z[m / 2] = coef_[m / 2] * rng.normal();
      const double inv_sqrt2 = M_SQRT1_2;
      for (long j = 1; j < m / 2; ++j) {
        const double a = rng.normal(), b = rng.normal();
        const std::complex<double> v(a * inv_sqrt2, b * inv_sqrt2);
        z[j] = coef_[j] * v;
        z[m - j] = coef_[j] * std::conj(v);
      }
      detail::fft_radix2(z, false);
      double acc = 0.0;
      for (int i = 1; i <= n; ++i) {
        acc += z[i - 1].real();
        out.values[i] = acc;
      }
      return;
    }
    case Method::Cholesky: {
      std::vector<double> zs(n);
      for (int i = 0; i < n; ++i) zs[i] = rng.normal();
      std::size_t idx = 0;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j <= i; ++j) acc += chol_[idx++] * zs[j];
        out.values[i + 1] = acc;
      }
      return;
    }
  }
}

PathGrid sample_path(const GaussianSpec& spec, double horizon, int n_steps,
                     RngStream& rng) {
  return PathSampler(spec, horizon, n_steps).sample(rng);
}

double sup_on_unit_interval(const GaussianSpec& spec, int n_steps,
                            RngStream& rng) {
  const PathGrid p = sample_path(spec, 1.0, n_steps, rng);
  double m = 0.0;
  for (double v : p.values) m = std::max(m, v);
  return m;
}

MomentEstimate estimate_prefactor_moment(double hurst, double q, long n_paths,
                                         int n_steps, std::uint64_t seed) {
  if (!(q > -1.0 / hurst))
    throw RegimeError("estimate_prefactor_moment: q must exceed -1/H");
  if (n_paths < 1) throw RegimeError("estimate_prefactor_moment: n_paths < 1");
  const GaussianSpec spec = GaussianSpec::fbm(hurst);
  const PathSampler sampler(spec, 1.0, n_steps);

  MomentEstimate out;
  out.n_paths = n_paths;
  out.n_steps = n_steps;
  out.seed = seed;

  double sum = 0.0, sum2 = 0.0, sum_coarse = 0.0;
  bool flagged = false;
  PathGrid grid;
  for (long i = 0; i < n_paths; ++i) {
    RngStream rng = RngStream::derive(seed, 0x70726566ULL, std::uint64_t(i));
    sampler.sample_into(grid, rng);
    double mf = 0.0, mc = 0.0;
    for (int k = 0; k <= n_steps; ++k) {
      mf = std::max(mf, grid.values[k]);
      if ((k & 1) == 0) mc = std::max(mc, grid.values[k]);
    }
    const double vf = std::pow(mf, q), vc = std::pow(mc, q);
    if (!std::isfinite(vf) || !std::isfinite(vc)) flagged = true;
    sum += vf;
    sum2 += vf * vf;
    sum_coarse += vc;
  }
  const double mean = sum / double(n_paths);
  const double var =
      std::max(0.0, sum2 / double(n_paths) - mean * mean);
  const double se = std::sqrt(var / double(n_paths));
  out.value = mean;
  out.ci_low = mean - 1.959963984540054 * se;
  out.ci_high = mean + 1.959963984540054 * se;
  out.bias_indicator = mean - sum_coarse / double(n_paths);
  out.flagged = flagged;
  return out;
}

double sample_hitting_time(double mu, double level, RngStream& rng) {
  if (!(mu > 0)) throw RegimeError("sample_hitting_time: drift must be > 0");
  if (!(level > 0)) throw RegimeError("sample_hitting_time: level must be > 0");
  // Inverse-Gaussian(mean m, shape lam) via the transformation method with
  // a uniform correction step.
  const double m = level / mu, lam = level * level;
  const double nu = rng.normal();
  const double y = nu * nu;
  const double w = m + m * m * y / (2.0 * lam) -
                   (m / (2.0 * lam)) * std::sqrt(4.0 * m * lam * y + m * m * y * y);
  const double u = rng.uniform01();
  return (u <= m / (m + w)) ? w : m * m / w;
}

long renewal_count(const PathGrid& path, double t) {
  if (path.n_steps < 1) throw RegimeError("renewal_count: empty path");
  if (t < 0 || t > path.horizon * (1.0 + 1e-12))
    throw std::out_of_range("renewal_count: t outside the sampled horizon");
  const long idx =
      std::min<long>(path.n_steps, long(std::floor(t / path.step() + 1e-9)));
  double m = 0.0;
  for (long i = 0; i <= idx; ++i) m = std::max(m, path.values[i]);
  return long(std::floor(m));
}

}  // namespace hybridtail::gauss
