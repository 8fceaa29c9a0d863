#include "hybridtail/heavy_tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridtail/errors.hpp"
#include "hybridtail/numerics.hpp"

namespace hybridtail::tails {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

SlowlyVarying SlowlyVarying::constant(double c) {
  if (!(c > 0)) throw RegimeError("SlowlyVarying::constant: c must be > 0");
  SlowlyVarying s;
  s.name = "const";
  s.value = [c](double) { return c; };
  s.deriv = [](double) { return 0.0; };
  s.deriv2 = [](double) { return 0.0; };
  return s;
}

SlowlyVarying SlowlyVarying::log_pow(double gamma) {
  SlowlyVarying s;
  s.name = "logpow";
  s.value = [gamma](double u) { return std::pow(std::log(M_E + u), gamma); };
  s.deriv = [gamma](double u) {
    const double l = std::log(M_E + u);
    return gamma * std::pow(l, gamma - 1.0) / (M_E + u);
  };
  s.deriv2 = [gamma](double u) {
    const double e = M_E + u, l = std::log(e);
    return gamma * (gamma - 1.0) * std::pow(l, gamma - 2.0) / (e * e) -
           gamma * std::pow(l, gamma - 1.0) / (e * e);
  };
  return s;
}

struct detail::TailImpl {
  TailKind kind = TailKind::Custom;
  std::string label;
  double mean = kNaN;
  double beta = kNaN;
  double nu = kNaN;
  double scale = kNaN;
  double rate = kNaN;
  double point = kNaN;
  std::optional<SlowlyVarying> L;
  std::function<double(double)> log_tail;  // Custom only
};

TailModel::TailModel(std::shared_ptr<const detail::TailImpl> impl) : impl_(std::move(impl)) {}

namespace {

double fd_step(double u) { return std::max(1e-4 * std::abs(u), 1e-6); }

double hazard_of(const detail::TailImpl& im, double u);

// log ∫_u^∞ exp(-Q(y)) dy, computed as
// -Q(u) + log ∫_0^∞ exp(-(Q(u+w) - Q(u))) dw so the integrand is O(1) even
// where the plain tail underflows.  Windows double until the mass left
// behind is provably below the 1e-8 relative target.
template <class Hazard>
double log_int_tail_kernel(Hazard&& Q, double u) {
  u = std::max(u, 0.0);
  const double qu = Q(u);
  auto f = [&](double w) { return std::exp(-(Q(u + w) - qu)); };

  // Window scale from the local hazard rate where it is informative.
  const double probe = std::max(u, 1e-3);
  const double slope = (Q(probe * 1.001) - Q(probe)) / (0.001 * probe);
  double w1 = (slope > 1e-300 && std::isfinite(slope)) ? 1.0 / slope : 1.0;
  w1 = std::min(std::max(w1, 1e-9), 1e9);

  double total = 0.0, lo = 0.0, hi = w1, prev = kInf;
  for (int k = 0; k < 400; ++k) {
    const double coarse = (hi - lo) * 0.5 * (f(lo) + f(hi));
    const double eps = 1e-9 * std::max(coarse, total * 1e-3) + 1e-300;
    const double seg = num::adaptive_simpson(f, lo, hi, eps);
    total += seg;
    const bool deep = Q(u + hi) - qu > 45.0;
    if (total > 0 && seg <= 1e-12 * total && (deep || seg < prev)) break;
    // A convergent integrand sheds mass geometrically under window doubling;
    // once far past the natural scale, non-decaying windows mean divergence.
    if (hi > 1e12 * w1 && seg >= 0.999 * prev && seg > 1e-6 * total)
      throw RangeError("integrated tail does not converge: tail too heavy");
    if (hi > 1e250) break;
    prev = seg;
    lo = hi;
    hi *= 2.0;
  }
  if (!(total > 0)) return -kInf;
  return -qu + std::log(total);
}

double log_integrated_tail_numeric(const detail::TailImpl& im, double u) {
  return log_int_tail_kernel([&](double v) { return hazard_of(im, v); }, u);
}

double hazard_of(const detail::TailImpl& im, double u) {
  if (u <= 0) return 0.0;
  switch (im.kind) {
    case TailKind::WeibullT1:
      return im.L->value(u) * std::pow(u, im.beta);
    case TailKind::Pareto:
      return im.nu * std::log1p(u / im.scale);
    case TailKind::Exponential:
      return im.rate * u;
    case TailKind::Constant:
      return u < im.point ? 0.0 : kInf;
    case TailKind::Custom: {
      const double lt = im.log_tail(u);
      return lt > 0 ? 0.0 : -lt;
    }
  }
  return kNaN;
}

double hazard_rate_of(const detail::TailImpl& im, double u) {
  switch (im.kind) {
    case TailKind::WeibullT1: {
      const double ub = std::pow(u, im.beta - 1.0);
      return ub * (im.beta * im.L->value(u) + u * im.L->deriv(u));
    }
    case TailKind::Pareto:
      return im.nu / (im.scale + u);
    case TailKind::Exponential:
      return im.rate;
    case TailKind::Constant:
      return kNaN;
    case TailKind::Custom: {
      const double h = std::min(fd_step(u), u > 0 ? 0.5 * u : kInf);
      return (hazard_of(im, u + h) - hazard_of(im, u - h)) / (2.0 * h);
    }
  }
  return kNaN;
}

double hazard_rate_deriv_of(const detail::TailImpl& im, double u) {
  switch (im.kind) {
    case TailKind::WeibullT1: {
      const double b = im.beta;
      const double L = im.L->value(u), Lp = im.L->deriv(u), Lpp = im.L->deriv2(u);
      return Lpp * std::pow(u, b) + 2.0 * b * Lp * std::pow(u, b - 1.0) +
             b * (b - 1.0) * L * std::pow(u, b - 2.0);
    }
    case TailKind::Pareto:
      return -im.nu / ((im.scale + u) * (im.scale + u));
    case TailKind::Exponential:
      return 0.0;
    case TailKind::Constant:
      return kNaN;
    case TailKind::Custom: {
      const double h = std::min(fd_step(u), u > 0 ? 0.5 * u : kInf);
      return (hazard_of(im, u + h) - 2.0 * hazard_of(im, u) +
              hazard_of(im, u - h)) /
             (h * h);
    }
  }
  return kNaN;
}

double quantile_numeric(const detail::TailImpl& im, double y) {
  // Solve Q(x) = y by bracketed root finding; Q is nondecreasing.
  double hi = std::isfinite(im.mean) && im.mean > 0 ? im.mean : 1.0;
  int guard = 0;
  while (hazard_of(im, hi) < y) {
    hi *= 2.0;
    if (++guard > 1100 || hi > 1e300)
      throw RangeError("quantile_from_tail: bracket exceeded 1e300");
  }
  double lo = hi * 0.5;
  guard = 0;
  while (lo > 0 && hazard_of(im, lo) > y) {
    lo *= 0.5;
    if (++guard > 1100) { lo = 0.0; break; }
  }
  auto g = [&](double x) { return hazard_of(im, x) - y; };
  if (g(lo) == 0.0) return lo;
  return num::find_root_brent(g, lo, hi, 1e-12);
}

}  // namespace

TailModel TailModel::weibull_t1(double beta, SlowlyVarying L) {
  if (!(beta > 0.0 && beta < 1.0))
    throw RegimeError("weibull_t1: beta must lie in (0, 1)");
  auto im = std::make_shared<detail::TailImpl>();
  im->kind = TailKind::WeibullT1;
  im->label = "weibull";
  im->beta = beta;
  im->L = std::move(L);
  im->mean = std::exp(log_integrated_tail_numeric(*im, 0.0));
  return TailModel(im);
}

TailModel TailModel::pareto(double nu, double scale) {
  if (!(nu > 1.0)) throw RegimeError("pareto: nu must be > 1 for a finite mean");
  if (!(scale > 0.0)) throw RegimeError("pareto: scale must be > 0");
  auto im = std::make_shared<detail::TailImpl>();
  im->kind = TailKind::Pareto;
  im->label = "pareto";
  im->nu = nu;
  im->scale = scale;
  im->mean = scale / (nu - 1.0);
  return TailModel(im);
}

TailModel TailModel::exponential(double rate) {
  if (!(rate > 0.0)) throw RegimeError("exponential: rate must be > 0");
  auto im = std::make_shared<detail::TailImpl>();
  im->kind = TailKind::Exponential;
  im->label = "exp";
  im->rate = rate;
  im->mean = 1.0 / rate;
  return TailModel(im);
}

TailModel TailModel::constant_duration(double value) {
  if (!(value > 0.0)) throw RegimeError("constant_duration: value must be > 0");
  auto im = std::make_shared<detail::TailImpl>();
  im->kind = TailKind::Constant;
  im->label = "const";
  im->point = value;
  im->mean = value;
  return TailModel(im);
}

TailModel TailModel::custom(std::function<double(double)> log_tail,
                            std::string label) {
  if (!log_tail) throw RegimeError("custom: log_tail callable required");
  auto im = std::make_shared<detail::TailImpl>();
  im->kind = TailKind::Custom;
  im->label = std::move(label);
  im->log_tail = std::move(log_tail);
  im->mean = std::exp(log_integrated_tail_numeric(*im, 0.0));
  return TailModel(im);
}

TailKind TailModel::kind() const { return impl_->kind; }
const std::string& TailModel::label() const { return impl_->label; }
double TailModel::mean() const { return impl_->mean; }

double TailModel::tail(double u) const {
  if (u <= 0) return 1.0;
  return std::exp(-hazard_of(*impl_, u));
}

double TailModel::hazard(double u) const { return hazard_of(*impl_, u); }
double TailModel::hazard_rate(double u) const { return hazard_rate_of(*impl_, u); }
double TailModel::hazard_rate_deriv(double u) const {
  return hazard_rate_deriv_of(*impl_, u);
}

double TailModel::quantile_from_tail(double p) const {
  if (!(p > 0.0 && p <= 1.0))
    throw RegimeError("quantile_from_tail: p must lie in (0, 1]");
  const double y = -std::log(p);
  if (y == 0.0) return 0.0;
  const detail::TailImpl& im = *impl_;
  switch (im.kind) {
    case TailKind::Exponential:
      return y / im.rate;
    case TailKind::Pareto:
      return im.scale * std::expm1(y / im.nu);
    case TailKind::Constant:
      return im.point;
    case TailKind::WeibullT1:
      if (im.L->name == "const")
        return std::pow(y / im.L->value(1.0), 1.0 / im.beta);
      return quantile_numeric(im, y);
    case TailKind::Custom:
      return quantile_numeric(im, y);
  }
  return kNaN;
}

double TailModel::sample(RngStream& rng) const {
  return quantile_from_tail(rng.uniform01());
}

double TailModel::weibull_beta() const { return impl_->beta; }
double TailModel::rv_index() const { return impl_->nu; }
double TailModel::pareto_scale() const { return impl_->scale; }
double TailModel::exp_rate() const { return impl_->rate; }
const SlowlyVarying* TailModel::slowly_varying() const {
  return impl_->L ? &*impl_->L : nullptr;
}

double log_integrated_tail(const TailModel& m, double u) {
  u = std::max(u, 0.0);
  switch (m.kind()) {
    case TailKind::Exponential:
      return -m.exp_rate() * u - std::log(m.exp_rate());
    case TailKind::Pareto:
      return std::log(m.pareto_scale() / (m.rv_index() - 1.0)) +
             (1.0 - m.rv_index()) * std::log1p(u / m.pareto_scale());
    case TailKind::Constant: {
      const double pt = m.mean();
      return u >= pt ? -kInf : std::log(pt - u);
    }
    default:
      break;
  }
  return log_int_tail_kernel([&](double v) { return m.hazard(v); }, u);
}

double integrated_tail(const TailModel& m, double u) {
  return std::exp(log_integrated_tail(m, u));
}

// ---------------------------------------------------------------------------
// Residual law

namespace {

// Monotone cubic (Fritsch-Carlson) table of Q_r on a log-spaced grid; used
// only to seed Newton when inverting the numeric residual hazard.
struct MonotoneTable {
  std::vector<double> x, y, m;

  void build(const std::function<double(double)>& f, double x0, double x1,
             int n) {
    x.resize(n);
    y.resize(n);
    const double lx0 = std::log(x0), lx1 = std::log(x1);
    for (int i = 0; i < n; ++i) {
      x[i] = std::exp(lx0 + (lx1 - lx0) * i / (n - 1));
      y[i] = f(x[i]);
    }
    std::vector<double> s(n - 1);
    for (int i = 0; i + 1 < n; ++i) s[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    m.assign(n, 0.0);
    m[0] = s[0];
    m[n - 1] = s[n - 2];
    for (int i = 1; i + 1 < n; ++i)
      m[i] = (s[i - 1] * s[i] > 0) ? 0.5 * (s[i - 1] + s[i]) : 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      if (s[i] == 0.0) { m[i] = m[i + 1] = 0.0; continue; }
      const double a = m[i] / s[i], b = m[i + 1] / s[i];
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double t = 3.0 / std::sqrt(r);
        m[i] = t * a * s[i];
        m[i + 1] = t * b * s[i];
      }
    }
  }

  double eval(int i, double xv) const {
    const double h = x[i + 1] - x[i], t = (xv - x[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * h * m[i] +
           (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * h * m[i + 1];
  }

  // x with table(x) ~= yv; clamped to the table range.
  double invert(double yv) const {
    if (yv <= y.front()) return x.front();
    if (yv >= y.back()) return x.back();
    auto it = std::upper_bound(y.begin(), y.end(), yv);
    int i = int(it - y.begin()) - 1;
    i = std::clamp(i, 0, int(x.size()) - 2);
    double lo = x[i], hi = x[i + 1];
    double xv = lo + (hi - lo) * (yv - y[i]) / std::max(y[i + 1] - y[i], 1e-300);
    for (int k = 0; k < 40; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (eval(i, mid) < yv) lo = mid; else hi = mid;
    }
    xv = 0.5 * (lo + hi);
    return xv;
  }
};

}  // namespace

struct ResidualModel::Impl {
  TailModel base;
  double mean;
  bool closed;
  MonotoneTable inverse_seed;  // numeric kinds only

  explicit Impl(TailModel b) : base(std::move(b)), mean(base.mean()) {
    closed = base.kind() == TailKind::Pareto ||
             base.kind() == TailKind::Exponential ||
             base.kind() == TailKind::Constant;
    if (!closed) {
      auto qr = [this](double x) {
        return std::log(mean) - log_integrated_tail(base, x);
      };
      double hi = std::max(mean, 1e-6);
      int guard = 0;
      while (qr(hi) < 45.0 && ++guard < 400) hi *= 2.0;
      inverse_seed.build(qr, 1e-9 * mean, hi, 256);
    }
  }
};

ResidualModel::ResidualModel(TailModel base)
    : impl_(std::make_shared<Impl>(std::move(base))) {}

const TailModel& ResidualModel::base() const { return impl_->base; }

double ResidualModel::log_tail(double x) const {
  if (x <= 0) return 0.0;
  const TailModel& b = impl_->base;
  switch (b.kind()) {
    case TailKind::Pareto:
      return (1.0 - b.rv_index()) * std::log1p(x / b.pareto_scale());
    case TailKind::Exponential:
      return -b.exp_rate() * x;
    case TailKind::Constant: {
      const double pt = b.mean();
      return x >= pt ? -kInf : std::log1p(-x / pt);
    }
    default:
      return log_integrated_tail(b, x) - std::log(impl_->mean);
  }
}

double ResidualModel::tail(double x) const { return std::exp(log_tail(x)); }
double ResidualModel::hazard(double x) const { return -log_tail(x); }

double ResidualModel::hazard_rate(double x) const {
  if (x < 0) x = 0;
  const TailModel& b = impl_->base;
  switch (b.kind()) {
    case TailKind::Pareto:
      return (b.rv_index() - 1.0) / (b.pareto_scale() + x);
    case TailKind::Exponential:
      return b.exp_rate();
    case TailKind::Constant:
      return 1.0 / (b.mean() - x);
    default:
      // tail(x) / ∫_x^∞ tail, assembled in log space.
      return std::exp(-b.hazard(x) - log_integrated_tail(b, x));
  }
}

double ResidualModel::hazard_rate_deriv(double x) const {
  const TailModel& b = impl_->base;
  switch (b.kind()) {
    case TailKind::Pareto: {
      const double d = b.pareto_scale() + x;
      return -(b.rv_index() - 1.0) / (d * d);
    }
    case TailKind::Exponential:
      return 0.0;
    case TailKind::Constant: {
      const double d = b.mean() - x;
      return 1.0 / (d * d);
    }
    default: {
      const double qr = hazard_rate(x);
      return qr * (qr - b.hazard_rate(x));
    }
  }
}

double ResidualModel::quantile_from_tail(double p) const {
  if (!(p > 0.0 && p <= 1.0))
    throw RegimeError("residual quantile: p must lie in (0, 1]");
  const double y = -std::log(p);
  if (y == 0.0) return 0.0;
  const TailModel& b = impl_->base;
  switch (b.kind()) {
    case TailKind::Pareto:
      return b.pareto_scale() * std::expm1(y / (b.rv_index() - 1.0));
    case TailKind::Exponential:
      return y / b.exp_rate();
    case TailKind::Constant:
      return b.mean() * -std::expm1(-y);
    default: {
      double x = impl_->inverse_seed.invert(y);
      if (y < impl_->inverse_seed.y.front()) x = y * impl_->mean;
      // Two Newton corrections against the exact hazard.
      for (int k = 0; k < 2; ++k) {
        const double g = hazard(x) - y;
        const double gp = hazard_rate(x);
        if (!(gp > 0) || !std::isfinite(g)) break;
        double step = g / gp;
        step = std::clamp(step, -0.5 * x, 0.5 * x);
        x -= step;
      }
      return x;
    }
  }
}

double ResidualModel::sample(RngStream& rng) const {
  return quantile_from_tail(rng.uniform01());
}

// ---------------------------------------------------------------------------
// Square-root insensitivity probe

ConditionDiagnostic reduced_load_condition(const TailModel& m) {
  ConditionDiagnostic out;
  const double band = std::log(1.02);

  if (m.kind() == TailKind::Constant) {
    out.status = ConditionStatus::Unknown;
    out.note = "degenerate duration: condition not meaningful";
    return out;
  }

  // Hazard differences stay finite where tails underflow.
  std::vector<double> deltas;
  for (int k = 0; k <= 12; ++k) {
    const double u = 100.0 * std::pow(10.0, 0.5 * k);
    const double d = m.hazard(u) - m.hazard(u - std::sqrt(u));
    deltas.push_back(d);
    out.ratio_curve.emplace_back(u, std::exp(-d));
  }

  if (m.kind() == TailKind::WeibullT1) {
    const double beta = m.weibull_beta();
    if (beta < 0.5) {
      out.status = ConditionStatus::Holds;
      out.note = "analytic: beta < 1/2";
    } else if (beta > 0.5) {
      out.status = ConditionStatus::Fails;
      out.note = "analytic: beta > 1/2";
    } else {
      out.status = ConditionStatus::Unknown;
      out.note = "analytic boundary beta = 1/2: slowly varying factor decides";
    }
    return out;
  }

  const size_t n = deltas.size();
  const bool tail_ok = std::abs(deltas[n - 1]) <= band &&
                       std::abs(deltas[n - 2]) <= band &&
                       std::abs(deltas[n - 3]) <= band;
  if (tail_ok) {
    out.status = ConditionStatus::Holds;
    out.note = "ratio inside 1 +/- 0.02 at the top of the probe grid";
  } else if (std::abs(deltas[n - 1]) > band &&
             std::abs(deltas[n - 1]) >= std::abs(deltas[n - 2]) &&
             std::abs(deltas[n - 2]) >= std::abs(deltas[n - 3])) {
    out.status = ConditionStatus::Fails;
    out.note = "ratio escapes the band and is still widening at u = 1e8";
  } else {
    out.status = ConditionStatus::Unknown;
    out.note = "probe inconclusive on the grid up to u = 1e8";
  }
  return out;
}

}  // namespace hybridtail::tails
