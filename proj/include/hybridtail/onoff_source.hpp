#pragma once

#include <optional>
#include <vector>

#include "hybridtail/heavy_tails.hpp"
#include "hybridtail/rng.hpp"

namespace hybridtail::onoff {

// Alternating On-Off fluid source with peak rate r.  p and rho follow from
// the duration means and are not free parameters.
class OnOffSpec {
 public:
  static OnOffSpec make(double r, tails::TailModel on, tails::TailModel off);

  double r() const { return r_; }
  const tails::TailModel& on() const { return on_; }
  const tails::TailModel& off() const { return off_; }
  const tails::ResidualModel& on_residual() const { return on_res_; }
  const tails::ResidualModel& off_residual() const { return off_res_; }

  double p() const { return p_; }      // stationary P{On}
  double rho() const { return rho_; }  // mean rate p * r

 private:
  OnOffSpec(double r, tails::TailModel on, tails::TailModel off);
  double r_;
  tails::TailModel on_;
  tails::TailModel off_;
  tails::ResidualModel on_res_;
  tails::ResidualModel off_res_;
  double p_;
  double rho_;
};

// One sampled trajectory of the stationary source: the activity indicator
// J(t) as a segment list and the integrated input Y(t) = r ∫_0^t J, which is
// piecewise linear and evaluated exactly.  Duration draws are capped at 1e12
// (flagged, and warned once per process).
class OnOffPath {
 public:
  struct Segment {
    bool on;
    double start;
    double duration;
    double y_at_start;  // Y(start)
    double end() const { return start + duration; }
  };

  int initial_state() const { return initial_on_ ? 1 : 0; }
  double first_regeneration() const { return z0_; }  // end of first on-period
  double horizon() const { return horizon_; }
  bool capped() const { return capped_; }

  double eval_Y(double t) const;
  bool on_at(double t) const { return segment_at(t).on; }
  const Segment& segment_at(double t) const;
  const std::vector<Segment>& segments() const { return segments_; }

  // Grows the segment list from the same stream; existing segments are
  // never altered, so extensions are path-consistent.
  void extend_to(double new_horizon, RngStream& rng);

 private:
  friend OnOffPath sample_stationary(const OnOffSpec&, double, RngStream&,
                                     std::optional<int>);
  OnOffPath(const OnOffSpec& spec, double horizon, RngStream& rng,
            std::optional<int> force_initial);
  void push_segment(bool on, double duration);

  const OnOffSpec* spec_;
  std::vector<Segment> segments_;
  bool initial_on_ = false;
  double z0_ = 0.0;
  double horizon_ = 0.0;
  bool capped_ = false;
};

// Stationary construction: with probability p start inside an on-period
// whose remaining length has the residual on law; otherwise start inside an
// off-period (residual off) followed by a full on-period.  Alternating full
// (off, on) pairs then extend the path past `horizon` and past the first
// regeneration point, whichever is later.  force_initial pins the initial
// state for stratified estimators (the Bernoulli draw is still consumed, so
// forced and unforced paths stay aligned on the same stream).
OnOffPath sample_stationary(const OnOffSpec& spec, double horizon,
                            RngStream& rng,
                            std::optional<int> force_initial = std::nullopt);

}  // namespace hybridtail::onoff
