#include "hybridtail/onoff_source.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

#include "hybridtail/errors.hpp"

namespace hybridtail::onoff {

namespace {
constexpr double kDurationCap = 1e12;
std::atomic<bool> g_cap_warned{false};

double capped_draw(double x, bool& capped) {
  if (x > kDurationCap) {
    capped = true;
    if (!g_cap_warned.exchange(true))
      std::fprintf(stderr,
                   "onoff_source: duration draw exceeded 1e12 and was capped; "
                   "further caps are silent\n");
    return kDurationCap;
  }
  return x;
}
}  // namespace

OnOffSpec::OnOffSpec(double r, tails::TailModel on, tails::TailModel off)
    : r_(r),
      on_(std::move(on)),
      off_(std::move(off)),
      on_res_(on_),
      off_res_(off_) {
  p_ = on_.mean() / (on_.mean() + off_.mean());
  rho_ = p_ * r_;
}

OnOffSpec OnOffSpec::make(double r, tails::TailModel on, tails::TailModel off) {
  if (!(r > 0)) throw RegimeError("OnOffSpec: peak rate r must be > 0");
  if (!(on.mean() > 0) || !std::isfinite(on.mean()))
    throw RegimeError("OnOffSpec: on-period mean must be positive and finite");
  if (!(off.mean() > 0) || !std::isfinite(off.mean()))
    throw RegimeError("OnOffSpec: off-period mean must be positive and finite");
  return OnOffSpec(r, std::move(on), std::move(off));
}

OnOffPath::OnOffPath(const OnOffSpec& spec, double horizon, RngStream& rng,
                     std::optional<int> force_initial)
    : spec_(&spec) {
  if (!(horizon >= 0)) throw RegimeError("sample_stationary: horizon < 0");
  const double bern = rng.uniform01();
  initial_on_ = force_initial ? (*force_initial != 0) : (bern <= spec.p());

  if (initial_on_) {
    push_segment(true, capped_draw(spec.on_residual().sample(rng), capped_));
    z0_ = segments_.back().end();
  } else {
    push_segment(false, capped_draw(spec.off_residual().sample(rng), capped_));
    push_segment(true, capped_draw(spec.on().sample(rng), capped_));
    z0_ = segments_.back().end();
  }
  horizon_ = std::max(horizon, z0_);
  extend_to(horizon, rng);
}

void OnOffPath::push_segment(bool on, double duration) {
  Segment s;
  s.on = on;
  s.duration = duration;
  if (segments_.empty()) {
    s.start = 0.0;
    s.y_at_start = 0.0;
  } else {
    const Segment& prev = segments_.back();
    s.start = prev.end();
    s.y_at_start =
        prev.y_at_start + (prev.on ? spec_->r() * prev.duration : 0.0);
  }
  segments_.push_back(s);
}

void OnOffPath::extend_to(double new_horizon, RngStream& rng) {
  horizon_ = std::max(horizon_, new_horizon);
  while (segments_.back().end() < horizon_) {
    push_segment(false, capped_draw(spec_->off().sample(rng), capped_));
    push_segment(true, capped_draw(spec_->on().sample(rng), capped_));
  }
}

const OnOffPath::Segment& OnOffPath::segment_at(double t) const {
  if (t < 0 || t > segments_.back().end())
    throw std::out_of_range("OnOffPath: t outside the sampled horizon");
  // Binary search over segment starts.
  std::size_t lo = 0, hi = segments_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (segments_[mid].start <= t) lo = mid; else hi = mid - 1;
  }
  return segments_[lo];
}

double OnOffPath::eval_Y(double t) const {
  const Segment& s = segment_at(t);
  return s.y_at_start + (s.on ? spec_->r() * (t - s.start) : 0.0);
}

OnOffPath sample_stationary(const OnOffSpec& spec, double horizon,
                            RngStream& rng, std::optional<int> force_initial) {
  return OnOffPath(spec, horizon, rng, force_initial);
}

}  // namespace hybridtail::onoff
