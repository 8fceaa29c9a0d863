#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hybridtail/fluid_workload.hpp"
#include "hybridtail/tail_asymptotics.hpp"

namespace hybridtail {

inline constexpr char kVersion[] = "0.1.0";

}  // namespace hybridtail

namespace hybridtail::harness {

enum class RunMode { Simulate, Asymptote, Compare, Validate };
std::string to_string(RunMode mode);

// Source of the critical-regime constant E[(sup_{[0,1]} B_H)^q].  The two
// closed forms differ in the moment exponent (the two derivations of the
// scaling limit disagree; see tail_asymptotics); the MC source estimates the
// moment by simulation at q = (nu - 1)/H and works for any H, while the
// closed forms need H = 1/2.
enum class PrefactorSource { HTimesNuMinusOne, NuMinusOneOverH, McEstimate };
std::string to_string(PrefactorSource source);

// Source of the Gaussian factor P{V_X^{c-r} > u} in the subcritical
// factorization: log-scale analytic formula, or a Monte Carlo estimate of
// the source-free workload tail at the same u.
enum class VxTailSource { AnalyticLog, McEstimate };
std::string to_string(VxTailSource source);

// A parsed experiment.  The canonical value texts (gaussian_text, onoff_text,
// u_text) are what serialize_config emits for the structured fields; parse
// keeps them consistent with the typed fields, and configs built by hand
// must do the same if they are to round-trip.
struct ExperimentConfig {
  // [model]
  gauss::GaussianSpec gaussian = gauss::GaussianSpec::brownian();
  std::optional<onoff::OnOffSpec> source;
  double drain = 1.0;

  // [run]
  RunMode mode = RunMode::Compare;
  std::vector<double> u;
  long n_paths = 10000;
  int n_steps = 4096;
  double horizon_factor = 5.0;
  std::uint64_t seed = 1;
  bool stratify = false;
  PrefactorSource prefactor_source = PrefactorSource::NuMinusOneOverH;
  VxTailSource vx_tail_source = VxTailSource::AnalyticLog;
  std::vector<std::string> suites;  // validate mode; empty means all

  std::string gaussian_text = "bm(variance_rate=1)";
  std::string onoff_text = "none";
  std::string u_text = "list()";
};

// Sectioned key = value text, sections [model] and [run], '#' comments,
// function-call syntax for structured values; grammar in the README.
// Unknown keys, malformed values, and fields violating a module
// precondition all throw ConfigError (the CLI maps that to exit code 2).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical form: every key explicit, structured values in their canonical
// spelling.  parse(serialize(cfg)) == cfg field for field, and serialize is
// idempotent on the result.
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a 64 over the canonical serialization; logged in every run header.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Value parsers for the structured fields, exposed for reuse and tests.
gauss::GaussianSpec parse_gaussian_value(const std::string& text);
std::optional<onoff::OnOffSpec> parse_onoff_value(const std::string& text);
tails::TailModel parse_dist_value(const std::string& text);
std::vector<double> parse_u_value(const std::string& text);

fluid::HybridModel build_model(const ExperimentConfig& cfg);

// One CSV line.  Optional cells serialize as empty fields; ratio is present
// only when the MC estimate and a positive probability-scale asymptote both
// are.
struct ReportRow {
  double u = 0.0;
  std::optional<double> mc_estimate;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> asymptote;
  std::optional<double> log_asymptote;
  std::optional<double> ratio;
  std::string regime;
  long n_paths = 0;
  int n_steps = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> bias_indicator;
};

std::string csv_header();
std::string to_csv_row(const ReportRow& row);

struct RvIndexFit {
  double slope = 0.0;
  double slope_se = 0.0;
  int n_used = 0;
  int n_dropped = 0;
  std::vector<std::string> warnings;
};

// Least-squares slope of log p against log u.  Requires at least four
// points; nonpositive probabilities are dropped with a warning and at least
// two points must survive.
RvIndexFit fit_rv_index(const std::vector<std::pair<double, double>>& points);

struct RunOptions {
  int workers = 1;
  std::string out_path;  // when set, the CSV and a gnuplot script land here
  bool strict = false;
  std::ostream* echo = nullptr;  // live copy of the summary lines
};

struct RunResult {
  std::vector<ReportRow> rows;
  std::string csv;  // header + rows, byte-identical across worker counts
  std::vector<std::string> summary;
  int exit_code = 0;  // 1 only under strict (unsupported regime or failed suite)
};

RunResult run(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace hybridtail::harness
