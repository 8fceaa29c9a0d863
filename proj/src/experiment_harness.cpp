#include "hybridtail/experiment_harness.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "hybridtail/errors.hpp"
#include "hybridtail/numerics.hpp"
#include "hybridtail/validate_suites.hpp"

namespace hybridtail::harness {
namespace {

// ---- text utilities -----------------------------------------------------

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Shortest decimal that parses back to the same double; canonical config form.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Fixed 17 significant digits for CSV cells.
std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw ConfigError(ctx + ": " + msg);
}

template <class F>
auto rewrap(const std::string& ctx, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(ctx, e.what());
  }
}

double parse_number(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  if (t.empty()) fail(ctx, "empty number");
  const char* begin = t.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + t.size()) fail(ctx, "bad number '" + t + "'");
  if (errno == ERANGE || !std::isfinite(v))
    fail(ctx, "number '" + t + "' out of range");
  return v;
}

long parse_count(const std::string& text, const std::string& ctx, long lo,
                 long hi) {
  const double v = parse_number(text, ctx);
  if (std::rint(v) != v || v < static_cast<double>(lo) ||
      v > static_cast<double>(hi))
    fail(ctx, "expected an integer in [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "], got '" + trim(text) + "'");
  return static_cast<long>(v);
}

std::uint64_t parse_seed(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  const bool digits =
      !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
      });
  if (!digits) fail(ctx, "seed must be an unsigned integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (errno == ERANGE || end != t.c_str() + t.size())
    fail(ctx, "seed out of range");
  return v;
}

bool parse_flag(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "true") return true;
  if (t == "false") return false;
  fail(ctx, "expected true or false, got '" + t + "'");
}

// Split on commas at bracket depth zero; () and {} both count.
std::vector<std::string> split_top(const std::string& s,
                                   const std::string& ctx) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char ch : s) {
    if (ch == '(' || ch == '{') ++depth;
    if (ch == ')' || ch == '}') {
      --depth;
      if (depth < 0) fail(ctx, "unbalanced brackets in '" + s + "'");
    }
    if (ch == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (depth != 0) fail(ctx, "unbalanced brackets in '" + s + "'");
  out.push_back(cur);
  return out;
}

struct Arg {
  std::string name;  // empty means positional
  std::string value;
};

struct Call {
  std::string name;
  std::vector<Arg> args;
};

Call parse_call(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  if (open == std::string::npos || t.empty() || t.back() != ')')
    fail(ctx, "expected name(...) syntax, got '" + t + "'");
  Call call;
  call.name = trim(t.substr(0, open));
  if (call.name.empty()) fail(ctx, "missing name before '(' in '" + t + "'");
  const std::string inside = t.substr(open + 1, t.size() - open - 2);
  if (trim(inside).empty()) return call;
  for (const std::string& piece : split_top(inside, ctx)) {
    std::size_t eq = std::string::npos;
    int depth = 0;
    for (std::size_t i = 0; i < piece.size(); ++i) {
      const char ch = piece[i];
      if (ch == '(' || ch == '{') ++depth;
      if (ch == ')' || ch == '}') --depth;
      if (ch == '=' && depth == 0) {
        eq = i;
        break;
      }
    }
    Arg a;
    if (eq == std::string::npos) {
      a.value = trim(piece);
    } else {
      a.name = trim(piece.substr(0, eq));
      a.value = trim(piece.substr(eq + 1));
      if (a.name.empty()) fail(ctx, "empty argument name in '" + piece + "'");
    }
    if (a.value.empty()) fail(ctx, "empty argument in '" + t + "'");
    call.args.push_back(std::move(a));
  }
  return call;
}

std::string take_named(Call& call, const std::string& key,
                       const std::string& ctx, const char* def = nullptr) {
  for (auto it = call.args.begin(); it != call.args.end(); ++it) {
    if (it->name == key) {
      std::string v = it->value;
      call.args.erase(it);
      return v;
    }
  }
  if (def) return def;
  fail(ctx, "missing argument '" + key + "'");
}

void expect_consumed(const Call& call, const std::string& ctx) {
  if (call.args.empty()) return;
  const Arg& a = call.args.front();
  fail(ctx, "unexpected argument '" + (a.name.empty() ? a.value : a.name) +
                "' to " + call.name + "(...)");
}

// ---- structured value parsers -------------------------------------------

struct ParsedDist {
  tails::TailModel model;
  std::string canonical;
};

ParsedDist parse_dist_internal(const std::string& text,
                               const std::string& ctx) {
  Call call = parse_call(text, ctx);
  if (call.name == "weibull") {
    const double beta =
        parse_number(take_named(call, "beta", ctx), ctx + ".beta");
    const std::string ltext = trim(take_named(call, "L", ctx, "const"));
    expect_consumed(call, ctx);
    tails::SlowlyVarying sv = tails::SlowlyVarying::constant();
    std::string lcanon = "const";
    if (ltext != "const") {
      Call lc = parse_call(ltext, ctx + ".L");
      if (lc.name == "const") {
        const double c = parse_number(take_named(lc, "c", ctx + ".L", "1"),
                                      ctx + ".L.c");
        expect_consumed(lc, ctx + ".L");
        sv = rewrap(ctx + ".L", [&] { return tails::SlowlyVarying::constant(c); });
        lcanon = c == 1.0 ? "const" : "const(c=" + fmt_double(c) + ")";
      } else if (lc.name == "log_pow") {
        const double g = parse_number(take_named(lc, "gamma", ctx + ".L"),
                                      ctx + ".L.gamma");
        expect_consumed(lc, ctx + ".L");
        sv = rewrap(ctx + ".L", [&] { return tails::SlowlyVarying::log_pow(g); });
        lcanon = "log_pow(gamma=" + fmt_double(g) + ")";
      } else {
        fail(ctx, "unknown slowly varying form '" + lc.name + "'");
      }
    }
    auto model =
        rewrap(ctx, [&] { return tails::TailModel::weibull_t1(beta, sv); });
    return {std::move(model),
            "weibull(beta=" + fmt_double(beta) + ", L=" + lcanon + ")"};
  }
  if (call.name == "pareto") {
    const double nu = parse_number(take_named(call, "nu", ctx), ctx + ".nu");
    const double scale =
        parse_number(take_named(call, "scale", ctx, "1"), ctx + ".scale");
    expect_consumed(call, ctx);
    auto model = rewrap(ctx, [&] { return tails::TailModel::pareto(nu, scale); });
    return {std::move(model), "pareto(nu=" + fmt_double(nu) +
                                  ", scale=" + fmt_double(scale) + ")"};
  }
  if (call.name == "exp") {
    const double rate =
        parse_number(take_named(call, "rate", ctx), ctx + ".rate");
    expect_consumed(call, ctx);
    auto model = rewrap(ctx, [&] { return tails::TailModel::exponential(rate); });
    return {std::move(model), "exp(rate=" + fmt_double(rate) + ")"};
  }
  if (call.name == "const") {
    const double value =
        parse_number(take_named(call, "value", ctx), ctx + ".value");
    expect_consumed(call, ctx);
    auto model =
        rewrap(ctx, [&] { return tails::TailModel::constant_duration(value); });
    return {std::move(model), "const(value=" + fmt_double(value) + ")"};
  }
  fail(ctx, "unknown distribution '" + call.name + "'");
}

struct ParsedGaussian {
  gauss::GaussianSpec spec;
  std::string canonical;
};

ParsedGaussian parse_gaussian_internal(const std::string& text,
                                       const std::string& ctx) {
  Call call = parse_call(text, ctx);
  if (call.name == "bm") {
    const double vr = parse_number(take_named(call, "variance_rate", ctx, "1"),
                                   ctx + ".variance_rate");
    expect_consumed(call, ctx);
    auto spec = rewrap(ctx, [&] { return gauss::GaussianSpec::brownian(vr); });
    return {spec, "bm(variance_rate=" + fmt_double(vr) + ")"};
  }
  if (call.name == "fbm") {
    const double h = parse_number(take_named(call, "H", ctx), ctx + ".H");
    expect_consumed(call, ctx);
    auto spec = rewrap(ctx, [&] { return gauss::GaussianSpec::fbm(h); });
    return {spec, "fbm(H=" + fmt_double(h) + ")"};
  }
  fail(ctx, "unknown gaussian spec '" + call.name +
                "' (custom variance functions are library-only)");
}

struct ParsedOnOff {
  std::optional<onoff::OnOffSpec> spec;
  std::string canonical;
};

ParsedOnOff parse_onoff_internal(const std::string& text,
                                 const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "none") return {std::nullopt, "none"};
  if (t.size() < 2 || t.front() != '{' || t.back() != '}')
    fail(ctx, "expected none or { r=..., on=..., off=... }, got '" + t + "'");
  std::optional<double> r;
  std::optional<ParsedDist> on, off;
  const std::string inside = t.substr(1, t.size() - 2);
  if (trim(inside).empty()) fail(ctx, "empty source block");
  for (const std::string& piece : split_top(inside, ctx)) {
    std::size_t eq = std::string::npos;
    int depth = 0;
    for (std::size_t i = 0; i < piece.size(); ++i) {
      const char ch = piece[i];
      if (ch == '(' || ch == '{') ++depth;
      if (ch == ')' || ch == '}') --depth;
      if (ch == '=' && depth == 0) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      fail(ctx, "expected key=value inside { }, got '" + trim(piece) + "'");
    const std::string key = trim(piece.substr(0, eq));
    const std::string value = trim(piece.substr(eq + 1));
    if (key == "r") {
      if (r) fail(ctx, "duplicate key 'r'");
      r = parse_number(value, ctx + ".r");
    } else if (key == "on") {
      if (on) fail(ctx, "duplicate key 'on'");
      on = parse_dist_internal(value, ctx + ".on");
    } else if (key == "off") {
      if (off) fail(ctx, "duplicate key 'off'");
      off = parse_dist_internal(value, ctx + ".off");
    } else {
      fail(ctx, "unknown key '" + key + "' inside { }");
    }
  }
  if (!r || !on || !off) fail(ctx, "source block needs r, on, and off");
  auto spec = rewrap(
      ctx, [&] { return onoff::OnOffSpec::make(*r, on->model, off->model); });
  return {spec, "{ r=" + fmt_double(*r) + ", on=" + on->canonical +
                    ", off=" + off->canonical + " }"};
}

struct ParsedU {
  std::vector<double> values;
  std::string canonical;
};

ParsedU parse_u_internal(const std::string& text, const std::string& ctx) {
  Call call = parse_call(text, ctx);
  if (call.name == "list") {
    ParsedU out;
    std::string canon = "list(";
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      const Arg& a = call.args[i];
      if (!a.name.empty())
        fail(ctx, "list(...) takes plain numbers, got '" + a.name + "='");
      const double v = parse_number(a.value, ctx);
      out.values.push_back(v);
      if (i) canon += ", ";
      canon += fmt_double(v);
    }
    out.canonical = canon + ")";
    return out;
  }
  if (call.name == "geometric") {
    const double lo = parse_number(take_named(call, "lo", ctx), ctx + ".lo");
    const double hi = parse_number(take_named(call, "hi", ctx), ctx + ".hi");
    const long n = parse_count(take_named(call, "n", ctx), ctx + ".n", 2, 10000);
    expect_consumed(call, ctx);
    if (!(lo > 0) || !(hi > lo))
      fail(ctx, "geometric range needs 0 < lo < hi");
    ParsedU out;
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (long i = 0; i < n; ++i)
      out.values.push_back(lo * std::exp(step * static_cast<double>(i)));
    out.values.front() = lo;
    out.values.back() = hi;
    out.canonical = "geometric(lo=" + fmt_double(lo) + ", hi=" + fmt_double(hi) +
                    ", n=" + std::to_string(n) + ")";
    return out;
  }
  fail(ctx, "expected list(...) or geometric(lo=, hi=, n=), got '" +
                call.name + "(...)'");
}

std::vector<std::string> parse_suites(const std::string& text,
                                      const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "all") return {};
  std::vector<std::string> out;
  const auto known = suite_names();
  for (const std::string& piece : split_top(t, ctx)) {
    const std::string name = trim(piece);
    if (name.empty()) fail(ctx, "empty suite name");
    if (std::find(known.begin(), known.end(), name) == known.end())
      fail(ctx, "unknown suite '" + name + "'");
    out.push_back(name);
  }
  return out;
}

RunMode mode_from(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "simulate") return RunMode::Simulate;
  if (t == "asymptote") return RunMode::Asymptote;
  if (t == "compare") return RunMode::Compare;
  if (t == "validate") return RunMode::Validate;
  fail(ctx, "unknown mode '" + t + "'");
}

PrefactorSource prefactor_from(const std::string& text,
                               const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "h_times_nu_minus_one") return PrefactorSource::HTimesNuMinusOne;
  if (t == "nu_minus_one_over_h") return PrefactorSource::NuMinusOneOverH;
  if (t == "mc_estimate") return PrefactorSource::McEstimate;
  fail(ctx, "unknown prefactor source '" + t + "'");
}

VxTailSource vx_from(const std::string& text, const std::string& ctx) {
  const std::string t = trim(text);
  if (t == "analytic_log") return VxTailSource::AnalyticLog;
  if (t == "mc_estimate") return VxTailSource::McEstimate;
  fail(ctx, "unknown vx tail source '" + t + "'");
}

std::string suites_text(const std::vector<std::string>& suites) {
  if (suites.empty()) return "all";
  std::string out;
  for (std::size_t i = 0; i < suites.size(); ++i) {
    if (i) out += ", ";
    out += suites[i];
  }
  return out;
}

void apply_key(ExperimentConfig& cfg, const std::string& section,
               const std::string& key, const std::string& value,
               const std::string& ctx) {
  if (section == "model") {
    if (key == "gaussian") {
      auto g = parse_gaussian_internal(value, ctx);
      cfg.gaussian = g.spec;
      cfg.gaussian_text = g.canonical;
    } else if (key == "onoff") {
      auto o = parse_onoff_internal(value, ctx);
      cfg.source = o.spec;
      cfg.onoff_text = o.canonical;
    } else if (key == "c") {
      cfg.drain = parse_number(value, ctx);
    } else {
      fail(ctx, "unknown key '" + key + "' in [model]");
    }
    return;
  }
  if (key == "mode") {
    cfg.mode = mode_from(value, ctx);
  } else if (key == "u") {
    auto u = parse_u_internal(value, ctx);
    cfg.u = u.values;
    cfg.u_text = u.canonical;
  } else if (key == "n_paths") {
    cfg.n_paths = parse_count(value, ctx, 1, 2000000000L);
  } else if (key == "n_steps") {
    cfg.n_steps = static_cast<int>(parse_count(value, ctx, 2, 1 << 24));
  } else if (key == "horizon_factor") {
    cfg.horizon_factor = parse_number(value, ctx);
  } else if (key == "seed") {
    cfg.seed = parse_seed(value, ctx);
  } else if (key == "stratify") {
    cfg.stratify = parse_flag(value, ctx);
  } else if (key == "prefactor_source") {
    cfg.prefactor_source = prefactor_from(value, ctx);
  } else if (key == "vx_tail_source") {
    cfg.vx_tail_source = vx_from(value, ctx);
  } else if (key == "suites") {
    cfg.suites = parse_suites(value, ctx);
  } else {
    fail(ctx, "unknown key '" + key + "' in [run]");
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (!std::isfinite(cfg.horizon_factor) || !(cfg.horizon_factor > 0))
    fail("run.horizon_factor", "must be positive");
  if (cfg.n_steps % 2 != 0)
    fail("run.n_steps",
         "must be even (the bias indicator compares against the half grid)");
  if (cfg.gaussian.kind() == gauss::GaussianKind::FBM &&
      (cfg.n_steps & (cfg.n_steps - 1)) != 0)
    fail("run.n_steps", "must be a power of two for fbm noise");
  for (double u : cfg.u)
    if (!std::isfinite(u) || u < 0)
      fail("run.u", "levels must be finite and nonnegative");
  if (cfg.mode != RunMode::Validate && cfg.u.empty())
    fail("run.u", "at least one level is required outside validate mode");
  if ((cfg.mode == RunMode::Simulate || cfg.mode == RunMode::Compare) &&
      cfg.n_paths < 100)
    fail("run.n_paths", "tail estimation needs at least 100 paths");
  build_model(cfg);  // stability and spec coherence
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << content;
  if (!out.good()) throw ConfigError("short write to '" + path + "'");
}

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Simulate: return "simulate";
    case RunMode::Asymptote: return "asymptote";
    case RunMode::Compare: return "compare";
    case RunMode::Validate: return "validate";
  }
  return "compare";
}

std::string to_string(PrefactorSource source) {
  switch (source) {
    case PrefactorSource::HTimesNuMinusOne: return "h_times_nu_minus_one";
    case PrefactorSource::NuMinusOneOverH: return "nu_minus_one_over_h";
    case PrefactorSource::McEstimate: return "mc_estimate";
  }
  return "nu_minus_one_over_h";
}

std::string to_string(VxTailSource source) {
  return source == VxTailSource::McEstimate ? "mc_estimate" : "analytic_log";
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') fail(where, "malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (section != "model" && section != "run")
        fail(where, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(where, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) fail(where, "expected key = value");
    if (section.empty())
      fail(where, "key '" + key + "' appears before any section");
    const std::string qual = section + "." + key;
    if (!seen.insert(qual).second) fail(where, "duplicate key '" + qual + "'");
    apply_key(cfg, section, key, value, where + " (" + qual + ")");
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[model]\n"
      << "gaussian = " << cfg.gaussian_text << "\n"
      << "onoff = " << cfg.onoff_text << "\n"
      << "c = " << fmt_double(cfg.drain) << "\n"
      << "\n"
      << "[run]\n"
      << "mode = " << to_string(cfg.mode) << "\n"
      << "u = " << cfg.u_text << "\n"
      << "n_paths = " << cfg.n_paths << "\n"
      << "n_steps = " << cfg.n_steps << "\n"
      << "horizon_factor = " << fmt_double(cfg.horizon_factor) << "\n"
      << "seed = " << cfg.seed << "\n"
      << "stratify = " << (cfg.stratify ? "true" : "false") << "\n"
      << "prefactor_source = " << to_string(cfg.prefactor_source) << "\n"
      << "vx_tail_source = " << to_string(cfg.vx_tail_source) << "\n"
      << "suites = " << suites_text(cfg.suites) << "\n";
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

gauss::GaussianSpec parse_gaussian_value(const std::string& text) {
  return parse_gaussian_internal(text, "gaussian").spec;
}

std::optional<onoff::OnOffSpec> parse_onoff_value(const std::string& text) {
  return parse_onoff_internal(text, "onoff").spec;
}

tails::TailModel parse_dist_value(const std::string& text) {
  return parse_dist_internal(text, "dist").model;
}

std::vector<double> parse_u_value(const std::string& text) {
  return parse_u_internal(text, "u").values;
}

fluid::HybridModel build_model(const ExperimentConfig& cfg) {
  return rewrap("model", [&] {
    return fluid::HybridModel::make(cfg.gaussian, cfg.source, cfg.drain);
  });
}

std::string csv_header() {
  return "u,mc_estimate,ci_low,ci_high,asymptote,log_asymptote,ratio,regime,"
         "n_paths,n_steps,horizon,seed,bias_indicator";
}

namespace {
std::string cell(const std::optional<double>& v) {
  return v ? fmt17(*v) : std::string();
}
}  // namespace

std::string to_csv_row(const ReportRow& r) {
  std::ostringstream out;
  out << fmt17(r.u) << ',' << cell(r.mc_estimate) << ',' << cell(r.ci_low)
      << ',' << cell(r.ci_high) << ',' << cell(r.asymptote) << ','
      << cell(r.log_asymptote) << ',' << cell(r.ratio) << ',' << r.regime
      << ',' << r.n_paths << ',' << r.n_steps << ',' << fmt17(r.horizon) << ','
      << r.seed << ',' << cell(r.bias_indicator);
  return out.str();
}

RvIndexFit fit_rv_index(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4)
    throw RangeError("fit_rv_index: needs at least 4 points");
  RvIndexFit out;
  std::vector<double> xs, ys;
  for (const auto& [u, p] : points) {
    if (!(p > 0) || !(u > 0)) {
      ++out.n_dropped;
      out.warnings.push_back("dropped point u=" + fmt_double(u) +
                             " with nonpositive coordinate");
      continue;
    }
    xs.push_back(std::log(u));
    ys.push_back(std::log(p));
  }
  if (xs.size() < 2)
    throw RangeError("fit_rv_index: fewer than 2 positive points survive");
  const auto fit = num::fit_line(xs.begin(), xs.end(), ys.begin());
  out.slope = fit.slope;
  out.slope_se = fit.slope_se;
  out.n_used = static_cast<int>(xs.size());
  return out;
}

namespace {

void emit(RunResult& res, const RunOptions& opts, std::string line) {
  if (opts.echo) (*opts.echo) << line << '\n';
  res.summary.push_back(std::move(line));
}

// The critical-regime constant per the configured source.  Closed forms need
// H = 1/2; anything else falls back to the Monte Carlo moment at the
// requested exponent, with the fallback recorded in the provenance.
asympt::CriticalPrefactor resolve_prefactor(const ExperimentConfig& cfg,
                                            const fluid::HybridModel& model) {
  const double h = model.gaussian().hurst();
  const double nu = model.source()->on().rv_index();
  const auto which = cfg.prefactor_source == PrefactorSource::HTimesNuMinusOne
                         ? asympt::CriticalExponent::HTimesNuMinusOne
                         : asympt::CriticalExponent::NuMinusOneOverH;
  const bool closed_ok = std::abs(h - 0.5) <= 1e-12;
  if (cfg.prefactor_source != PrefactorSource::McEstimate && closed_ok)
    return asympt::make_critical_prefactor(which, h, nu);
  const double q = asympt::critical_exponent(which, h, nu);
  const long n_pref = 20000;
  const int steps_pref = 4096;
  const std::uint64_t pseed = mix64(cfg.seed ^ 0x707265666d6f6dULL);
  const auto est =
      gauss::estimate_prefactor_moment(h, q, n_pref, steps_pref, pseed);
  if (est.flagged || !(est.value > 0))
    throw RangeError("prefactor moment estimate is unusable (nonfinite or "
                     "nonpositive sample moment)");
  asympt::CriticalPrefactor out;
  out.value = est.value;
  out.provenance = "mc moment: q=" + fmt_double(q) +
                   ", n_paths=" + std::to_string(n_pref) +
                   ", n_steps=" + std::to_string(steps_pref) +
                   ", ci=[" + fmt_double(est.ci_low) + ", " +
                   fmt_double(est.ci_high) + "]";
  if (cfg.prefactor_source != PrefactorSource::McEstimate)
    out.provenance += "; closed form needs H=1/2, fell back to the MC moment";
  return out;
}

std::optional<asympt::Asymptote> evaluate_asymptote(
    const ExperimentConfig& cfg, const fluid::HybridModel& model,
    const asympt::RegimeDecision& decision, double u, std::size_t u_index,
    int workers, const std::optional<asympt::CriticalPrefactor>& prefactor,
    std::vector<std::string>& notes) {
  switch (decision.regime) {
    case asympt::Regime::ModerateDeviation:
      return asympt::supercritical_tail(model, u);
    case asympt::Regime::Oscillatory:
      return asympt::critical_tail(model, u, *prefactor);
    case asympt::Regime::ReducedPeak: {
      std::optional<double> glog;
      if (cfg.vx_tail_source == VxTailSource::McEstimate) {
        const auto model_x = fluid::HybridModel::make(
            cfg.gaussian, std::nullopt, model.drain() - model.peak_rate());
        fluid::SimOptions so;
        so.n_steps = cfg.n_steps;
        so.horizon_factor = cfg.horizon_factor;
        const auto mc = fluid::estimate_tail(
            model_x, u, cfg.n_paths, so, cfg.seed,
            (1ULL << 32) | static_cast<std::uint64_t>(u_index), workers);
        if (mc.p_hat > 0) {
          glog = std::log(mc.p_hat);
        } else {
          notes.push_back("u=" + fmt_double(u) +
                          ": gaussian-factor MC saw no exceedances; analytic "
                          "log form used instead");
        }
      }
      return asympt::subcritical_tail(model, u, glog);
    }
    default:
      return std::nullopt;
  }
}

std::string gnuplot_script(const std::string& csv_path, RunMode mode) {
  const std::string base = basename_of(csv_path);
  std::string out;
  out += "# gnuplot script; run:  gnuplot -p " + base + ".gp\n";
  out += "set datafile separator ','\n";
  out += "set logscale y\n";
  out += "set xlabel 'u'\n";
  out += "set ylabel 'tail probability'\n";
  std::vector<std::string> plots;
  if (mode != RunMode::Asymptote)
    plots.push_back("'" + base +
                    "' skip 1 using 1:2:3:4 with yerrorbars title 'monte carlo'");
  if (mode != RunMode::Simulate)
    plots.push_back("'" + base + "' skip 1 using 1:5 with lines title 'asymptote'");
  out += "plot ";
  for (std::size_t i = 0; i < plots.size(); ++i) {
    if (i) out += ", \\\n     ";
    out += plots[i];
  }
  out += "\n";
  return out;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunResult res;
  const int workers = std::max(1, opts.workers);
  emit(res, opts, std::string("# hybridtail ") + kVersion);
  emit(res, opts,
       "# mode=" + to_string(cfg.mode) + " config_hash=" +
           hex16(config_hash(cfg)) + " seed=" + std::to_string(cfg.seed) +
           " workers=" + std::to_string(workers));

  if (cfg.mode == RunMode::Validate) {
    const auto names = cfg.suites.empty() ? suite_names() : cfg.suites;
    int passed = 0;
    for (const std::string& name : names) {
      const SuiteResult sr = run_suite_by_name(name, cfg.seed, workers);
      emit(res, opts,
           "suite=" + sr.name + " status=" + (sr.pass ? "PASS" : "FAIL"));
      for (const std::string& l : sr.lines) emit(res, opts, "  " + l);
      if (sr.pass) ++passed;
    }
    emit(res, opts, "validate: " + std::to_string(passed) + "/" +
                        std::to_string(names.size()) + " suites passed");
    res.exit_code =
        (opts.strict && passed != static_cast<int>(names.size())) ? 1 : 0;
    res.csv = csv_header() + "\n";
    if (!opts.out_path.empty()) write_text_file(opts.out_path, res.csv);
    return res;
  }

  const auto model = build_model(cfg);
  const auto decision = asympt::classify_regime(model);
  emit(res, opts, "# regime=" + asympt::to_string(decision.regime) + ": " +
                      decision.explanation);

  const bool want_asympt = cfg.mode != RunMode::Simulate;
  const bool has_evaluator = decision.regime != asympt::Regime::ReducedLoad &&
                             decision.regime != asympt::Regime::Unsupported;
  bool unsupported_rows = false;
  std::optional<asympt::CriticalPrefactor> prefactor;
  if (want_asympt && decision.regime == asympt::Regime::Oscillatory) {
    prefactor = resolve_prefactor(cfg, model);
    emit(res, opts, "# prefactor: value=" + fmt_double(prefactor->value) +
                        " (" + prefactor->provenance + ")");
  }

  std::string csv = csv_header() + "\n";
  std::vector<std::string> notes;
  std::string validity_note;
  for (std::size_t i = 0; i < cfg.u.size(); ++i) {
    const double u = cfg.u[i];
    ReportRow row;
    row.u = u;
    row.regime = asympt::to_string(decision.regime);
    row.n_paths = cfg.n_paths;
    row.n_steps = cfg.n_steps;
    row.seed = cfg.seed;
    row.horizon = fluid::horizon_for(model, u, cfg.horizon_factor);
    if (cfg.mode != RunMode::Asymptote) {
      fluid::SimOptions so;
      so.n_steps = cfg.n_steps;
      so.horizon_factor = cfg.horizon_factor;
      so.stratify = cfg.stratify;
      const auto mc = fluid::estimate_tail(model, u, cfg.n_paths, so, cfg.seed,
                                           i, workers);
      row.mc_estimate = mc.p_hat;
      row.ci_low = mc.ci_low;
      row.ci_high = mc.ci_high;
      row.bias_indicator = mc.bias_indicator;
    }
    if (want_asympt) {
      if (!has_evaluator) {
        unsupported_rows = decision.regime == asympt::Regime::Unsupported;
      } else {
        try {
          const auto a = evaluate_asymptote(cfg, model, decision, u, i,
                                            workers, prefactor, notes);
          if (a) {
            row.log_asymptote = a->log_value;
            if (a->value) row.asymptote = *a->value;
            if (!a->validity.empty()) validity_note = a->validity;
          }
        } catch (const RangeError& e) {
          notes.push_back("u=" + fmt_double(u) + ": " + e.what());
        }
      }
    }
    if (row.mc_estimate && row.asymptote && *row.asymptote > 0)
      row.ratio = *row.mc_estimate / *row.asymptote;

    std::string line = "u=" + fmt_double(u);
    if (row.mc_estimate)
      line += " mc=" + fmt_double(*row.mc_estimate) + " ci=[" +
              fmt_double(*row.ci_low) + ", " + fmt_double(*row.ci_high) + "]";
    if (row.log_asymptote)
      line += " log_asymptote=" + fmt_double(*row.log_asymptote);
    if (row.asymptote) line += " asymptote=" + fmt_double(*row.asymptote);
    if (row.ratio) line += " ratio=" + fmt_double(*row.ratio);
    emit(res, opts, line);

    csv += to_csv_row(row) + "\n";
    res.rows.push_back(row);
  }
  if (!validity_note.empty()) emit(res, opts, "# validity: " + validity_note);
  for (const std::string& n : notes) emit(res, opts, "# note: " + n);

  if (cfg.mode == RunMode::Compare &&
      decision.regime == asympt::Regime::Oscillatory) {
    std::vector<std::pair<double, double>> pts;
    for (const ReportRow& row : res.rows)
      if (row.mc_estimate && *row.mc_estimate > 0)
        pts.emplace_back(row.u, *row.mc_estimate);
    if (pts.size() >= 4) {
      const auto fit = fit_rv_index(pts);
      emit(res, opts, "# rv slope of mc tail: " + fmt_double(fit.slope) +
                          " +/- " + fmt_double(fit.slope_se) + " over " +
                          std::to_string(fit.n_used) + " points");
    }
  }

  res.csv = csv;
  if (!opts.out_path.empty()) {
    write_text_file(opts.out_path, res.csv);
    write_text_file(opts.out_path + ".gp", gnuplot_script(opts.out_path, cfg.mode));
    emit(res, opts, "# wrote " + opts.out_path + " and " + opts.out_path + ".gp");
  }
  res.exit_code = (opts.strict && want_asympt && unsupported_rows) ? 1 : 0;
  return res;
}

}  // namespace hybridtail::harness
