#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace hybridtail::num {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

// Brent's method on [a, b] with f(a), f(b) of opposite sign.
template <class F>
double find_root_brent(F&& f, double a, double b, double xtol_rel = 1e-14,
                       int max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (std::signbit(fa) == std::signbit(fb))
    throw std::invalid_argument("find_root_brent: no sign change in bracket");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() *
                           std::abs(b) +
                       0.5 * xtol_rel * std::max(1.0, std::abs(b));
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = m; e = m;
    } else {
      double p, q, r, s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc; r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d; d = p / q;
      } else {
        d = m; e = m;
      }
    }
    a = b; fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
    fb = f(b);
    if (std::signbit(fb) == std::signbit(fc)) {
      c = a; fc = fa; d = b - a; e = d;
    }
  }
  return b;
}

// Plain bisection; used where a guaranteed, derivative-free contraction is
// preferred over speed.
template <class F>
double bisect(F&& f, double lo, double hi, double xtol_rel = 1e-12,
              int max_iter = 400) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if (std::signbit(flo) == std::signbit(fhi))
    throw std::invalid_argument("bisect: no sign change in bracket");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((hi - lo) <= xtol_rel * std::max(1.0, std::abs(mid))) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid; flo = fm;
    } else {
      hi = mid; fhi = fm;
    }
  }
  return 0.5 * (lo + hi);
}

namespace detail {
template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m,
                    double fm, double whole, double eps, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps)
    return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}
}  // namespace detail

// Adaptive Simpson with absolute tolerance eps on [a, b].
template <class F>
double adaptive_simpson(F&& f, double a, double b, double eps,
                        int max_depth = 40) {
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, eps, max_depth);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  int n = 0;
};

// Ordinary least squares of y on x.
template <class It>
LinearFit fit_line(It xs_begin, It xs_end, It ys_begin) {
  LinearFit out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  It y = ys_begin;
  for (It x = xs_begin; x != xs_end; ++x, ++y, ++n) {
    sx += *x; sy += *y; sxx += *x * *x; sxy += *x * *y;
  }
  out.n = n;
  if (n < 2) throw std::invalid_argument("fit_line: need at least two points");
  const double det = n * sxx - sx * sx;
  out.slope = (n * sxy - sx * sy) / det;
  out.intercept = (sy - out.slope * sx) / n;
  if (n > 2) {
    double ssr = 0.0;
    y = ys_begin;
    for (It x = xs_begin; x != xs_end; ++x, ++y) {
      const double r = *y - (out.intercept + out.slope * *x);
      ssr += r * r;
    }
    const double sigma2 = ssr / (n - 2);
    out.slope_se = std::sqrt(sigma2 * n / det);
  }
  return out;
}

}  // namespace hybridtail::num
