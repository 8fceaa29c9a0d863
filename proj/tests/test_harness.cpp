#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "hybridtail/errors.hpp"
#include "hybridtail/experiment_harness.hpp"

using namespace hybridtail;
using harness::ExperimentConfig;
using harness::parse_config;

namespace {

const char* kMessyConfig = R"(# comment lines and blanks are ignored
[model]
gaussian = bm()
onoff = { r=2, on=pareto(nu=2), off=exp(rate=0.5) }
c = 1.5

[run]
mode = compare
u = list(1, 2.5)
n_paths = 1000
n_steps = 512
seed = 42
)";

std::string replaced(std::string text, const std::string& from,
                     const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string critical_cfg_text(const char* extra = "") {
  std::string t = R"([model]
gaussian = bm(variance_rate=1)
onoff = { r=1, on=pareto(nu=2, scale=1), off=exp(rate=1) }
c = 1

[run]
mode = compare
u = list(1, 2)
n_paths = 2000
n_steps = 512
seed = 9
)";
  return t + extra;
}

}  // namespace

TEST_CASE("parsing normalizes to a canonical fixed point") {
  auto cfg = parse_config(kMessyConfig);
  CHECK(cfg.gaussian_text == "bm(variance_rate=1)");
  CHECK(cfg.onoff_text == "{ r=2, on=pareto(nu=2, scale=1), off=exp(rate=0.5) }");
  CHECK(cfg.u_text == "list(1, 2.5)");
  CHECK(cfg.drain == doctest::Approx(1.5));
  CHECK(cfg.mode == harness::RunMode::Compare);
  CHECK(cfg.u == std::vector<double>{1.0, 2.5});
  // Round trip: serialize -> parse -> serialize is the identity.
  const std::string s1 = harness::serialize_config(cfg);
  auto cfg2 = parse_config(s1);
  CHECK(harness::serialize_config(cfg2) == s1);
  CHECK(harness::config_hash(cfg2) == harness::config_hash(cfg));
}

TEST_CASE("geometric level grids pin their endpoints exactly") {
  auto u = harness::parse_u_value("geometric(lo=2, hi=8, n=5)");
  REQUIRE(u.size() == 5);
  CHECK(u.front() == 2.0);
  CHECK(u.back() == 8.0);
  for (std::size_t i = 1; i < u.size(); ++i)
    CHECK(u[i] / u[i - 1] == doctest::Approx(std::pow(4.0, 0.25)));
}

TEST_CASE("the config hash sees every field") {
  auto a = parse_config(kMessyConfig);
  auto b = parse_config(kMessyConfig);
  CHECK(harness::config_hash(a) == harness::config_hash(b));
  b.seed = 43;
  CHECK(harness::config_hash(a) != harness::config_hash(b));
}

TEST_CASE("malformed configs are rejected with config errors") {
  auto reject = [](const std::string& text) {
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  };
  // Key before any section.
  reject("mode = compare\n");
  // Unknown section, unknown keys, missing '='.
  reject("[plot]\nx = 1\n");
  reject("[model]\ncolor = red\n");
  reject("[run]\nmode compare\n");
  // Duplicate key within a section.
  reject(critical_cfg_text("seed = 10\n"));
  // Unknown enum tokens.
  reject(replaced(critical_cfg_text(), "mode = compare", "mode = banana"));
  reject(critical_cfg_text("prefactor_source = sideways\n"));
  reject(critical_cfg_text("suites = bogus_suite\n"));
}

TEST_CASE("field validation catches module precondition violations") {
  auto reject = [](const std::string& text) {
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  };
  const std::string base = critical_cfg_text();
  // Odd step count breaks the half-grid bias indicator.
  reject(replaced(base, "n_steps = 512", "n_steps = 511"));
  // Fractional noise needs a power-of-two grid.
  reject(replaced(replaced(base, "gaussian = bm(variance_rate=1)",
                           "gaussian = fbm(H=0.7)"),
                  "n_steps = 512", "n_steps = 6"));
  // Levels are required outside validate mode.
  reject(replaced(base, "u = list(1, 2)", "u = list()"));
  // Tail estimation needs enough paths for an interval.
  reject(replaced(base, "n_paths = 2000", "n_paths = 50"));
  // Stability: mean input rate must stay below the drain.
  reject(replaced(base, "onoff = { r=1, on=pareto(nu=2, scale=1), off=exp(rate=1) }",
                  "onoff = { r=2, on=exp(rate=1), off=exp(rate=1) }"));
}

TEST_CASE("value grammar errors") {
  auto reject = [](const std::string& text) {
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  };
  const std::string base = critical_cfg_text();
  // Custom gaussians exist in the library but not in the config grammar.
  reject(replaced(base, "gaussian = bm(variance_rate=1)",
                  "gaussian = custom(alpha=1)"));
  // Unknown distribution and malformed source block.
  reject(replaced(base, "on=pareto(nu=2, scale=1)", "on=gamma(k=2)"));
  reject(replaced(base, "{ r=1, on=pareto(nu=2, scale=1), off=exp(rate=1) }",
                  "{ r=1, on=pareto(nu=2, scale=1) }"));
  // list(...) takes plain numbers only.
  reject(replaced(base, "u = list(1, 2)", "u = list(x=1)"));
  reject(replaced(base, "u = list(1, 2)", "u = geometric(lo=4, hi=2, n=3)"));
  ConfigError probe("x");
  CHECK(std::string(probe.what()).find('x') != std::string::npos);
}

TEST_CASE("power-law index fit") {
  // Exact power law: slope recovered exactly, zero residual error.
  std::vector<std::pair<double, double>> pts;
  for (double u : {1.0, 2.0, 4.0, 8.0}) pts.emplace_back(u, std::pow(u, -2.0));
  auto fit = harness::fit_rv_index(pts);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(fit.slope_se == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(fit.n_used == 4);
  CHECK(fit.n_dropped == 0);
  CHECK(fit.warnings.empty());

  // Nonpositive probabilities are dropped with a warning.
  pts.emplace_back(16.0, 0.0);
  auto dropped = harness::fit_rv_index(pts);
  CHECK(dropped.n_used == 4);
  CHECK(dropped.n_dropped == 1);
  REQUIRE(dropped.warnings.size() == 1);
  CHECK(dropped.slope == doctest::Approx(-2.0).epsilon(1e-12));

  CHECK_THROWS_AS(
      harness::fit_rv_index({{1.0, 0.5}, {2.0, 0.25}, {4.0, 0.125}}),
      RangeError);
  CHECK_THROWS_AS(harness::fit_rv_index(
                      {{1.0, 0.5}, {2.0, 0.0}, {4.0, 0.0}, {8.0, 0.0}}),
                  RangeError);
}

TEST_CASE("CSV schema is pinned") {
  CHECK(harness::csv_header() ==
        "u,mc_estimate,ci_low,ci_high,asymptote,log_asymptote,ratio,regime,"
        "n_paths,n_steps,horizon,seed,bias_indicator");
  harness::ReportRow row;
  row.u = 1.0;
  row.regime = "oscillatory";
  row.n_paths = 10;
  row.n_steps = 4;
  row.horizon = 2.5;
  row.seed = 7;
  CHECK(harness::to_csv_row(row) == "1,,,,,,,oscillatory,10,4,2.5,7,");
  // Cells are printed with 17 significant digits so every double
  // round-trips; dyadic values keep the expected strings short.
  row.mc_estimate = 0.25;
  row.ci_low = 0.1875;
  row.ci_high = 0.3125;
  row.bias_indicator = -0.001953125;
  CHECK(harness::to_csv_row(row) ==
        "1,0.25,0.1875,0.3125,,,,oscillatory,10,4,2.5,7,-0.001953125");
}

TEST_CASE("compare runs are deterministic across worker counts") {
  auto cfg = parse_config(critical_cfg_text());
  harness::RunOptions one;
  one.workers = 1;
  auto r1 = harness::run(cfg, one);
  harness::RunOptions three;
  three.workers = 3;
  auto r3 = harness::run(cfg, three);
  CHECK(r1.exit_code == 0);
  CHECK(r1.csv == r3.csv);
  REQUIRE(r1.rows.size() == 2);
  CHECK(r1.rows[0].mc_estimate.has_value());
  CHECK(r1.rows[0].asymptote.has_value());
  CHECK(r1.rows[0].ratio.has_value());
  CHECK(r1.rows[0].regime == "oscillatory");
  // Monotone level grid means a monotone asymptote.
  CHECK(*r1.rows[0].log_asymptote > *r1.rows[1].log_asymptote);
}

TEST_CASE("asymptote-only runs skip simulation") {
  auto cfg = parse_config(critical_cfg_text());
  cfg.mode = harness::RunMode::Asymptote;
  harness::RunOptions opts;
  auto r = harness::run(cfg, opts);
  CHECK(r.exit_code == 0);
  REQUIRE(r.rows.size() == 2);
  CHECK_FALSE(r.rows[0].mc_estimate.has_value());
  CHECK(r.rows[0].asymptote.has_value());
}

TEST_CASE("noise-only models report no asymptote and flag strict runs") {
  std::string text = R"([model]
gaussian = bm(variance_rate=1)
onoff = none
c = 1

[run]
mode = compare
u = list(1)
n_paths = 500
n_steps = 256
seed = 3
)";
  auto cfg = parse_config(text);
  harness::RunOptions opts;
  auto r = harness::run(cfg, opts);
  CHECK(r.exit_code == 0);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].mc_estimate.has_value());
  CHECK_FALSE(r.rows[0].asymptote.has_value());
  CHECK(r.rows[0].regime == "unsupported");
  opts.strict = true;
  CHECK(harness::run(cfg, opts).exit_code == 1);
}

TEST_CASE("single validation suites run through the harness") {
  std::string text = R"([run]
mode = validate
seed = 20240817
suites = renewal_sandwich
)";
  auto cfg = parse_config(text);
  CHECK(cfg.suites == std::vector<std::string>{"renewal_sandwich"});
  harness::RunOptions opts;
  auto r = harness::run(cfg, opts);
  CHECK(r.exit_code == 0);
  CHECK(r.csv == harness::csv_header() + "\n");
  bool saw_pass = false;
  for (const auto& line : r.summary)
    if (line.find("renewal_sandwich") != std::string::npos &&
        line.find("PASS") != std::string::npos)
      saw_pass = true;
  CHECK(saw_pass);
}
