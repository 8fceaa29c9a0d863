#include "hybridtail/fluid_workload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "hybridtail/errors.hpp"

namespace hybridtail::fluid {

namespace {
constexpr double kZ95 = 1.959963984540054;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

HybridModel::HybridModel(gauss::GaussianSpec g,
                         std::optional<onoff::OnOffSpec> s, double c)
    : gaussian_(std::move(g)), source_(std::move(s)), drain_(c) {}

HybridModel HybridModel::make(gauss::GaussianSpec gaussian,
                              std::optional<onoff::OnOffSpec> source,
                              double drain) {
  if (!(drain > 0)) throw RegimeError("HybridModel: drain must be > 0");
  const double rho = source ? source->rho() : 0.0;
  if (!(drain > rho))
    throw RegimeError("HybridModel: unstable, needs c > rho = p * r");
  return HybridModel(std::move(gaussian), std::move(source), drain);
}

double HybridModel::peak_rate() const { return source_ ? source_->r() : 0.0; }
double HybridModel::p() const { return source_ ? source_->p() : 0.0; }
double HybridModel::rho() const { return source_ ? source_->rho() : 0.0; }

HybridModel::Drift HybridModel::drift() const {
  const double r = peak_rate();
  if (r > drain_) return Drift::Supercritical;
  if (r == drain_) return Drift::Critical;
  return Drift::Subcritical;
}

double horizon_for(const HybridModel& model, double u, double horizon_factor) {
  if (!(horizon_factor > 0)) throw RegimeError("horizon_for: K must be > 0");
  const double ueff = u > 0 ? u : 1.0;
  double T = horizon_factor * ueff / model.stability_margin();
  if (model.source() && model.drift() == HybridModel::Drift::Critical)
    T = std::max(T, horizon_factor * model.gaussian().sigma_inverse(ueff));
  return T;
}

PathStreams PathStreams::derive(std::uint64_t seed, std::uint64_t experiment,
                                std::uint64_t path) {
  PathStreams s;
  s.source = RngStream::derive(seed, experiment, path, 0);
  s.gaussian = RngStream::derive(seed, experiment, path, 1);
  s.bridge = RngStream::derive(seed, experiment, path, 2);
  return s;
}

namespace {

SupSample run_path(const HybridModel& model, const gauss::PathSampler& sampler,
                   const SimOptions& opts, PathStreams streams,
                   PathWorkspace& ws, std::optional<int> force_initial) {
  const double T = sampler.horizon();
  const int n = sampler.n_steps();
  const double c = model.drain();

  std::optional<onoff::OnOffPath> ypath;
  if (model.source())
    ypath.emplace(onoff::sample_stationary(*model.source(), T, streams.source,
                                           force_initial));
  sampler.sample_into(ws.grid, streams.gaussian);
  const auto& x = ws.grid.values;

  double best = -kInf, best_coarse = -kInf, best_t = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = ws.grid.time(i);
    const double s = x[i] + (ypath ? ypath->eval_Y(t) : 0.0) - c * t;
    if (s > best) { best = s; best_t = t; }
    if ((i & 1) == 0 && s > best_coarse) best_coarse = s;
  }

  // Exact sup candidates at the drift kinks.  Boundaries are visited in
  // time order; within one grid cell each new point conditions on the
  // previously inserted one, so the joint law is exact for Brownian noise.
  if (opts.include_kinks && ypath && model.gaussian().has_exact_bridge() &&
      model.gaussian().variance_rate() > 0) {
    const double vr = model.gaussian().variance_rate();
    const double h = ws.grid.step();
    int anchor_cell = -1;
    double at = 0.0, ax = 0.0;
    for (const auto& seg : ypath->segments()) {
      const double tau = seg.end();
      if (tau >= T) break;
      int k = std::min(int(tau / h), n - 1);
      const double tk = ws.grid.time(k), tk1 = ws.grid.time(k + 1);
      if (tau - tk < 1e-9 * h || tk1 - tau < 1e-9 * h) continue;
      if (k != anchor_cell) {
        anchor_cell = k;
        at = tk;
        ax = x[k];
      }
      const double frac = (tau - at) / (tk1 - at);
      const double mean = ax + (x[k + 1] - ax) * frac;
      const double var = vr * (tau - at) * (tk1 - tau) / (tk1 - at);
      const double xt = mean + std::sqrt(var) * streams.bridge.normal();
      const double s = xt + ypath->eval_Y(tau) - c * tau;
      if (s > best) { best = s; best_t = tau; }
      if (s > best_coarse) best_coarse = s;
      at = tau;
      ax = xt;
    }
  }

  SupSample out;
  out.sup = best;
  out.sup_coarse = best_coarse;
  out.argmax_time = best_t;
  out.horizon = T;
  if (ypath) {
    const auto& seg = ypath->segment_at(best_t);
    out.covering_on = seg.on;
    out.covering_length = seg.duration;
  }
  return out;
}

}  // namespace

SupSample simulate_sup(const HybridModel& model, double u_ref,
                       const SimOptions& opts, PathStreams streams,
                       PathWorkspace& ws, std::optional<int> force_initial) {
  const gauss::PathSampler sampler(model.gaussian(),
                                   horizon_for(model, u_ref,
                                               opts.horizon_factor),
                                   opts.n_steps);
  return run_path(model, sampler, opts, streams, ws, force_initial);
}

SupSample simulate_sup(const HybridModel& model, double u_ref,
                       const SimOptions& opts, PathStreams streams) {
  PathWorkspace ws;
  return simulate_sup(model, u_ref, opts, streams, ws, std::nullopt);
}

std::vector<SupSample> collect_sups(const HybridModel& model, double u,
                                    long n_paths, const SimOptions& opts,
                                    std::uint64_t seed,
                                    std::uint64_t experiment, int workers,
                                    std::optional<int> force_initial) {
  const gauss::PathSampler sampler(model.gaussian(),
                                   horizon_for(model, u, opts.horizon_factor),
                                   opts.n_steps);
  std::vector<SupSample> out(n_paths);
  workers = std::clamp<long>(workers, 1, std::max<long>(1, n_paths));

  auto run_range = [&](long lo, long hi) {
    PathWorkspace ws;
    for (long i = lo; i < hi; ++i)
      out[i] = run_path(model, sampler, opts,
                        PathStreams::derive(seed, experiment, i), ws,
                        force_initial);
  };

  if (workers == 1) {
    run_range(0, n_paths);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (n_paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const long lo = w * chunk, hi = std::min<long>(n_paths, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

namespace {

void binomial_ci(long k, long n, McEstimate& est) {
  const double p = double(k) / double(n);
  est.p_hat = p;
  if (k == 0) {
    est.ci_low = 0.0;
    est.ci_high = 3.0 / double(n);
    est.rule_of_three = true;
    return;
  }
  if (p * double(n) < 30.0) {
    // Wilson interval.
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / double(n);
    const double center = (p + z2 / (2.0 * double(n))) / denom;
    const double half =
        kZ95 *
        std::sqrt(p * (1.0 - p) / double(n) + z2 / (4.0 * double(n) * double(n))) /
        denom;
    est.ci_low = std::max(0.0, center - half);
    est.ci_high = std::min(1.0, center + half);
    return;
  }
  const double se = std::sqrt(p * (1.0 - p) / double(n));
  est.ci_low = std::max(0.0, p - kZ95 * se);
  est.ci_high = std::min(1.0, p + kZ95 * se);
}

}  // namespace

McEstimate estimate_tail(const HybridModel& model, double u, long n_paths,
                         const SimOptions& opts, std::uint64_t seed,
                         std::uint64_t experiment, int workers) {
  if (n_paths < 100) throw RegimeError("estimate_tail: n_paths must be >= 100");

  McEstimate est;
  est.n_paths = n_paths;
  est.n_steps = opts.n_steps;
  est.seed = seed;
  est.horizon = horizon_for(model, u, opts.horizon_factor);

  const bool strat = opts.stratify && model.source().has_value();
  if (!strat) {
    const auto sups =
        collect_sups(model, u, n_paths, opts, seed, experiment, workers,
                     std::nullopt);
    long k = 0, kc = 0;
    for (const auto& s : sups) {
      k += s.sup > u;
      kc += s.sup_coarse > u;
    }
    binomial_ci(k, n_paths, est);
    est.bias_indicator = double(k - kc) / double(n_paths);
    return est;
  }

  const double p = model.p();
  const long n1 = n_paths / 2, n0 = n_paths - n1;
  const auto s1 =
      collect_sups(model, u, n1, opts, seed,
                   mix64(experiment ^ 0x7374726174310aULL), workers, 1);
  const auto s0 =
      collect_sups(model, u, n0, opts, seed,
                   mix64(experiment ^ 0x7374726174300aULL), workers, 0);
  long k1 = 0, k1c = 0, k0 = 0, k0c = 0;
  for (const auto& s : s1) { k1 += s.sup > u; k1c += s.sup_coarse > u; }
  for (const auto& s : s0) { k0 += s.sup > u; k0c += s.sup_coarse > u; }

  const double p1 = double(k1) / double(n1), p0 = double(k0) / double(n0);
  est.stratified = true;
  est.p_hat = p * p1 + (1.0 - p) * p0;
  est.bias_indicator = p * double(k1 - k1c) / double(n1) +
                       (1.0 - p) * double(k0 - k0c) / double(n0);
  if (k1 + k0 == 0) {
    est.ci_low = 0.0;
    est.ci_high = 3.0 / double(n_paths);
    est.rule_of_three = true;
  } else {
    const double var = p * p * p1 * (1.0 - p1) / double(n1) +
                       (1.0 - p) * (1.0 - p) * p0 * (1.0 - p0) / double(n0);
    const double se = std::sqrt(var);
    est.ci_low = std::max(0.0, est.p_hat - kZ95 * se);
    est.ci_high = std::min(1.0, est.p_hat + kZ95 * se);
  }
  return est;
}

CycleSample sample_cycle(const HybridModel& model, CycleKind kind, int n_steps,
                         PathStreams streams,
                         std::optional<int> force_initial) {
  if (!model.source())
    throw RegimeError("sample_cycle: model has no on-off source");
  if (model.drift() != HybridModel::Drift::Supercritical)
    throw RegimeError("sample_cycle: embedded cycles need r > c");
  if (model.gaussian().kind() != gauss::GaussianKind::BrownianMotion)
    throw RegimeError("sample_cycle: Brownian noise only");
  if (n_steps < 2) throw RegimeError("sample_cycle: n_steps must be >= 2");

  const auto& src = *model.source();
  const double c = model.drain(), r = src.r();
  const double vr = model.gaussian().variance_rate();

  double t_off = 0.0, t_on = 0.0;
  int init = 0;
  if (kind == CycleKind::First) {
    const double bern = streams.source.uniform01();
    const bool on0 = force_initial ? (*force_initial != 0) : bern <= src.p();
    init = on0 ? 1 : 0;
    if (on0) {
      t_on = src.on_residual().sample(streams.source);
    } else {
      t_off = src.off_residual().sample(streams.source);
      t_on = src.on().sample(streams.source);
    }
  } else {
    t_off = src.off().sample(streams.source);
    t_on = src.on().sample(streams.source);
  }

  const double len = t_off + t_on;
  const double h = len / n_steps;
  const double sd = std::sqrt(vr * h);
  double xv = 0.0, best = -kInf, s = 0.0;
  for (int i = 1; i <= n_steps; ++i) {
    xv += sd * streams.gaussian.normal();
    const double t = len * double(i) / double(n_steps);
    const double y = r * std::max(0.0, t - t_off);
    s = xv + y - c * t;
    best = std::max(best, s);
  }

  CycleSample out;
  out.U = s;
  out.M = best;
  out.length = len;
  out.initial_state = init;
  return out;
}

namespace {

template <class Law>
RandomIntervalSup random_interval_impl(const gauss::GaussianSpec& spec,
                                       const Law& law, double mu, int n_steps,
                                       PathStreams& streams) {
  RandomIntervalSup out;
  out.duration = law.sample(streams.source);
  const gauss::PathGrid g =
      gauss::sample_path(spec, out.duration, n_steps, streams.gaussian);
  double best = -kInf;
  for (int i = 0; i <= n_steps; ++i) {
    const double v = g.values[i] + mu * g.time(i);
    best = std::max(best, v);
  }
  out.sup = best;
  out.endpoint = g.values[n_steps] + mu * out.duration;
  return out;
}

}  // namespace

RandomIntervalSup sample_sup_over_random_interval(
    const gauss::GaussianSpec& spec, const tails::TailModel& duration,
    double mu, int n_steps, PathStreams streams) {
  return random_interval_impl(spec, duration, mu, n_steps, streams);
}

RandomIntervalSup sample_sup_over_random_interval(
    const gauss::GaussianSpec& spec, const tails::ResidualModel& duration,
    double mu, int n_steps, PathStreams streams) {
  return random_interval_impl(spec, duration, mu, n_steps, streams);
}

}  // namespace hybridtail::fluid
