#include "config.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

namespace sfb::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string where(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value, int line) {
  fail(Err::Parse, where(line) + "invalid number for key '" + key + "': '" + value + "'");
}

double parse_real(const std::string& key, const std::string& value, int line) {
  std::string body = value;
  double factor = 1.0;
  if (body.size() > 2 && body.compare(body.size() - 2, 2, "pi") == 0) {
    body = trim(body.substr(0, body.size() - 2));
    factor = M_PI;
  }
  double x = 0.0;
  const char* begin = body.data();
  const char* end = begin + body.size();
  auto [ptr, ec] = std::from_chars(begin, end, x);
  if (ec != std::errc() || ptr != end) bad_value(key, value, line);
  return x * factor;
}

long parse_integer(const std::string& key, const std::string& value, int line, long lo, long hi) {
  long x = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, x);
  if (ec != std::errc() || ptr != end) bad_value(key, value, line);
  if (x < lo || x > hi)
    fail(Err::Range, where(line) + "key '" + key + "': must lie in [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value, int line) {
  std::uint64_t x = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, x);
  if (ec != std::errc() || ptr != end) bad_value(key, value, line);
  return x;
}

double parse_positive(const std::string& key, const std::string& value, int line) {
  const double x = parse_real(key, value, line);
  if (!(x > 0.0)) fail(Err::Range, where(line) + "key '" + key + "': must be > 0");
  return x;
}

double parse_nonnegative(const std::string& key, const std::string& value, int line) {
  const double x = parse_real(key, value, line);
  if (!(x >= 0.0)) fail(Err::Range, where(line) + "key '" + key + "': must be >= 0");
  return x;
}

[[noreturn]] void bad_choice(const std::string& key, const std::string& allowed, int line) {
  fail(Err::Range, where(line) + "key '" + key + "': must be one of " + allowed);
}

analysis::SweepAxis parse_axis(const std::string& key, const std::string& v, int line) {
  using analysis::SweepAxis;
  if (v == "Omega_over_Gamma") return SweepAxis::OmegaOverGamma;
  if (v == "omega_fb") return SweepAxis::OmegaFb;
  if (v == "gamma") return SweepAxis::Gamma;
  if (v == "kappa") return SweepAxis::Kappa;
  if (v == "eta") return SweepAxis::Eta;
  bad_choice(key, "Omega_over_Gamma|omega_fb|gamma|kappa|eta", line);
}

}  // namespace

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value, int line) {
  auto& p = cfg.params;
  if (key == "mode") {
    if (value == "steady") cfg.mode = RunMode::Steady;
    else if (value == "evolve") cfg.mode = RunMode::Evolve;
    else if (value == "sweep") cfg.mode = RunMode::Sweep;
    else if (value == "traj") cfg.mode = RunMode::Traj;
    else if (value == "oracle") cfg.mode = RunMode::Oracle;
    else bad_choice(key, "steady|evolve|sweep|traj|oracle", line);
  } else if (key == "model") {
    if (value == "effective") cfg.model = ModelKind::Effective;
    else if (value == "cavity") cfg.model = ModelKind::Cavity;
    else if (value == "full") cfg.model = ModelKind::Full;
    else bad_choice(key, "effective|cavity|full", line);
  } else if (key == "strategy") {
    if (value == "none") cfg.strategy = FeedbackKind::None;
    else if (value == "nonlocal") cfg.strategy = FeedbackKind::Nonlocal;
    else if (value == "local") cfg.strategy = FeedbackKind::LocalRandom;
    else bad_choice(key, "none|nonlocal|local", line);
  } else if (key == "g") {
    p.g = parse_positive(key, value, line);
  } else if (key == "Delta") {
    p.delta = parse_positive(key, value, line);
  } else if (key == "J") {
    p.j_hop = parse_positive(key, value, line);
  } else if (key == "G") {
    p.big_g = parse_positive(key, value, line);
  } else if (key == "Omega") {
    p.omega = parse_nonnegative(key, value, line);
  } else if (key == "Omega_over_Gamma") {
    cfg.omega_over_gamma = parse_nonnegative(key, value, line);
  } else if (key == "kappa") {
    p.kappa = parse_positive(key, value, line);
  } else if (key == "gamma") {
    p.gamma = parse_nonnegative(key, value, line);
  } else if (key == "omega_fb") {
    p.omega_fb = parse_nonnegative(key, value, line);
  } else if (key == "eta") {
    p.eta = parse_real(key, value, line);
    if (!(p.eta >= 0.0 && p.eta <= 1.0))
      fail(Err::Range, where(line) + "key 'eta': must lie in [0, 1]");
  } else if (key == "n_max") {
    p.n_max = int(parse_integer(key, value, line, 1, 12));
  } else if (key == "lambda_a") {
    p.lambda_a = parse_nonnegative(key, value, line);
  } else if (key == "lambda_b") {
    p.lambda_b = parse_nonnegative(key, value, line);
  } else if (key == "Omega_a") {
    p.omega_a = parse_nonnegative(key, value, line);
  } else if (key == "Omega_b") {
    p.omega_b = parse_nonnegative(key, value, line);
  } else if (key == "Omega_c") {
    p.omega_c = parse_nonnegative(key, value, line);
  } else if (key == "t_end") {
    cfg.t_end = parse_positive(key, value, line);
  } else if (key == "time_unit") {
    cfg.time_unit_set = true;
    if (value == "Gamma") cfg.time_unit = TimeUnit::Gamma;
    else if (value == "G") cfg.time_unit = TimeUnit::BigG;
    else if (value == "g") cfg.time_unit = TimeUnit::SmallG;
    else bad_choice(key, "Gamma|G|g", line);
  } else if (key == "n_out") {
    cfg.n_out = int(parse_integer(key, value, line, 2, 100001));
  } else if (key == "rtol") {
    cfg.rtol = parse_positive(key, value, line);
  } else if (key == "atol") {
    cfg.atol = parse_positive(key, value, line);
  } else if (key == "init") {
    if (value == "111") cfg.init = InitState::Ket111;
    else if (value == "mixed") cfg.init = InitState::Mixed;
    else if (value == "singlet") cfg.init = InitState::Singlet;
    else bad_choice(key, "111|mixed|singlet", line);
  } else if (key == "ss_tol") {
    cfg.ss_tol = parse_positive(key, value, line);
  } else if (key == "t_long") {
    cfg.t_long = parse_positive(key, value, line);
  } else if (key == "sweep_x") {
    cfg.sweep_x = parse_axis(key, value, line);
  } else if (key == "sweep_y") {
    cfg.sweep_y = parse_axis(key, value, line);
  } else if (key == "x_min") {
    cfg.x_min = parse_real(key, value, line);
  } else if (key == "x_max") {
    cfg.x_max = parse_real(key, value, line);
  } else if (key == "x_count") {
    cfg.x_count = int(parse_integer(key, value, line, 1, 100000));
  } else if (key == "y_min") {
    cfg.y_min = parse_real(key, value, line);
  } else if (key == "y_max") {
    cfg.y_max = parse_real(key, value, line);
  } else if (key == "y_count") {
    cfg.y_count = int(parse_integer(key, value, line, 1, 100000));
  } else if (key == "sweep_mode") {
    if (value == "steady") cfg.sweep_kind = RunConfig::SweepKind::Steady;
    else if (value == "finite") cfg.sweep_kind = RunConfig::SweepKind::Finite;
    else if (value == "contour") cfg.sweep_kind = RunConfig::SweepKind::Contour;
    else bad_choice(key, "steady|finite|contour", line);
  } else if (key == "t_finite") {
    cfg.t_finite = parse_positive(key, value, line);
  } else if (key == "n_traj") {
    cfg.n_traj = int(parse_integer(key, value, line, 1, 10000000));
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value, line);
  } else if (key == "threads") {
    cfg.threads = int(parse_integer(key, value, line, 1, 512));
  } else if (key == "oracle") {
    if (value == "appendix") cfg.oracle = OracleKind::Appendix;
    else if (value == "elimination") cfg.oracle = OracleKind::Elimination;
    else if (value == "fullvseff") cfg.oracle = OracleKind::FullVsEff;
    else bad_choice(key, "appendix|elimination|fullvseff", line);
  } else if (key == "oracle_lambda_a") {
    cfg.oracle_lambda_a = parse_nonnegative(key, value, line);
  } else if (key == "oracle_lambda_b") {
    cfg.oracle_lambda_b = parse_nonnegative(key, value, line);
  } else if (key == "oracle_gamma1") {
    cfg.oracle_gamma1 = parse_nonnegative(key, value, line);
  } else if (key == "oracle_gamma2") {
    cfg.oracle_gamma2 = parse_nonnegative(key, value, line);
  } else if (key == "oracle_delta") {
    cfg.oracle_delta = parse_positive(key, value, line);
  } else if (key == "oracle_t_end") {
    cfg.oracle_t_end = parse_positive(key, value, line);
  } else if (key == "out") {
    cfg.out = value;
  } else {
    fail(Err::UnknownKey, where(line) + "unknown key '" + key + "'");
  }
  cfg.keys_seen.insert(key);
}

RunConfig parse_config(const std::string& text, bool require_complete) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(Err::Parse, where(line_no) + "expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail(Err::Parse, where(line_no) + "empty key before '='");
    if (value.empty()) fail(Err::Parse, where(line_no) + "empty value for key '" + key + "'");
    apply_key(cfg, key, value, line_no);
  }
  if (require_complete) finalize(cfg);
  return cfg;
}

void finalize(RunConfig& cfg) {
  std::vector<std::string> missing;
  for (const char* req : {"mode", "model", "strategy"})
    if (!cfg.has(req)) missing.emplace_back(req);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i)
      list += (i ? ", " : "") + missing[i];
    fail(Err::Parse, "missing required key" + std::string(missing.size() > 1 ? "s" : "") + ": " +
                         list);
  }

  auto& p = cfg.params;
  if (!cfg.has("n_max")) p.n_max = cfg.model == ModelKind::Cavity ? 2 : 1;
  if (cfg.model == ModelKind::Full && !cfg.has("J")) p.j_hop = p.delta / std::sqrt(2.0);
  if (!cfg.time_unit_set)
    cfg.time_unit = cfg.model == ModelKind::Full ? TimeUnit::BigG : TimeUnit::Gamma;
  if (cfg.omega_over_gamma) p.omega = *cfg.omega_over_gamma * p.gamma_total();
  if (cfg.t_end == 0.0) {
    if (cfg.mode == RunMode::Traj) cfg.t_end = 50.0;
    else cfg.t_end = cfg.model == ModelKind::Full ? 1500.0 : 200.0;
  }

  if (cfg.mode == RunMode::Traj && cfg.model != ModelKind::Effective)
    fail(Err::Range, "mode 'traj' requires model = effective");
  if (cfg.mode == RunMode::Sweep && cfg.model != ModelKind::Effective)
    fail(Err::Range, "mode 'sweep' requires model = effective");
  if (cfg.mode == RunMode::Sweep) {
    if (!(cfg.x_max >= cfg.x_min) || !(cfg.y_max >= cfg.y_min))
      fail(Err::Range, "sweep bounds: need x_max >= x_min and y_max >= y_min");
    if (cfg.sweep_kind == RunConfig::SweepKind::Contour &&
        (cfg.x_min <= 0.0 || cfg.y_min <= 0.0))
      fail(Err::Range, "contour sweep: gamma and kappa ranges must be positive");
  }
  p.validate();
}

double unit_rate(const RunConfig& cfg) {
  switch (cfg.time_unit) {
    case TimeUnit::Gamma: return cfg.params.gamma_total();
    case TimeUnit::BigG: return cfg.params.big_g;
    case TimeUnit::SmallG: return cfg.params.g;
  }
  return 1.0;
}

FeedbackStrategy strategy_of(const RunConfig& cfg) {
  return {cfg.strategy, cfg.params.omega_fb, cfg.params.eta};
}

namespace {

const std::map<std::string, std::string>& preset_map() {
  static const std::map<std::string, std::string> presets = {
      {"fig2a", R"(# Steady-state singlet fidelity vs drive and kick angle, nonlocal feedback.
mode = sweep
model = effective
strategy = nonlocal
eta = 1
sweep_mode = steady
sweep_x = Omega_over_Gamma
x_min = 0
x_max = 2
x_count = 41
sweep_y = omega_fb
y_min = 0
y_max = 1pi
y_count = 41
out = fig2a.csv
)"},
      {"fig2b", R"(# Steady-state singlet fidelity vs drive and kick angle, local random feedback.
mode = sweep
model = effective
strategy = local
eta = 1
sweep_mode = steady
sweep_x = Omega_over_Gamma
x_min = 0
x_max = 2
x_count = 41
sweep_y = omega_fb
y_min = 0
y_max = 1pi
y_count = 41
out = fig2b.csv
)"},
      {"fig3a", R"(# Finite-time singlet fidelity (Gamma*t = 1500) from |111>, nonlocal feedback.
mode = sweep
model = effective
strategy = nonlocal
eta = 1
sweep_mode = finite
t_finite = 1500
sweep_x = Omega_over_Gamma
x_min = 0
x_max = 2
x_count = 41
sweep_y = omega_fb
y_min = 0
y_max = 1pi
y_count = 41
out = fig3a.csv
)"},
      {"fig3b", R"(# Finite-time singlet fidelity (Gamma*t = 1500) from |111>, local random feedback.
mode = sweep
model = effective
strategy = local
eta = 1
sweep_mode = finite
t_finite = 1500
sweep_x = Omega_over_Gamma
x_min = 0
x_max = 2
x_count = 41
sweep_y = omega_fb
y_min = 0
y_max = 1pi
y_count = 41
out = fig3b.csv
)"},
      {"fig4a", R"(# Steady-state fidelity against spontaneous emission, nonlocal feedback.
# Grid of (gamma, kappa) in units of g; drive re-bound per point as
# Omega = 0.5 * G^2/kappa; cooperativity C = g^2/(gamma*kappa).
mode = sweep
model = effective
strategy = nonlocal
omega_fb = 0.3pi
Omega_over_Gamma = 0.5
sweep_mode = contour
sweep_x = gamma
x_min = 0.002
x_max = 0.05
x_count = 21
sweep_y = kappa
y_min = 0.005
y_max = 0.1
y_count = 21
out = fig4a.csv
)"},
      {"fig4b", R"(# Steady-state fidelity against spontaneous emission, local random feedback.
mode = sweep
model = effective
strategy = local
omega_fb = 0.5pi
Omega_over_Gamma = 0.5
sweep_mode = contour
sweep_x = gamma
x_min = 0.002
x_max = 0.05
x_count = 21
sweep_y = kappa
y_min = 0.005
y_max = 0.1
y_count = 21
out = fig4b.csv
)"},
      {"fig5", R"(# Three-cavity model vs effective model from |111>, nonlocal feedback,
# at the reduced scale Delta = 50 g (G = 20 g^2/Delta = 0.4 g, kappa = 10 G).
mode = oracle
oracle = fullvseff
model = full
strategy = nonlocal
omega_fb = 0.3pi
Delta = 50
G = 0.4
Omega = 0.04
kappa = 4
n_max = 1
t_end = 1500
time_unit = G
n_out = 301
out = fig5.csv
)"},
      {"fig5_200g", R"(# Three-cavity model vs effective model at the publication scale
# Delta = 200 g. Runtime is hours; fig5 (Delta = 50 g) shows the same physics.
mode = oracle
oracle = fullvseff
model = full
strategy = nonlocal
omega_fb = 0.3pi
Delta = 200
G = 0.1
Omega = 0.01
kappa = 1
n_max = 1
t_end = 1500
time_unit = G
n_out = 301
out = fig5_200g.csv
)"},
  };
  return presets;
}

}  // namespace

const std::string& preset(const std::string& name) {
  const auto& m = preset_map();
  const auto it = m.find(name);
  if (it == m.end()) {
    std::string names;
    for (const auto& [k, v] : m) names += (names.empty() ? "" : "|") + k;
    fail(Err::Invalid, "unknown preset '" + name + "'; available: " + names);
  }
  return it->second;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : preset_map()) names.push_back(k);
  return names;
}

}  // namespace sfb::config
