#pragma once

// Line-based `key = value` run configuration ('#' comments). Angles accept a
// "pi" suffix ("0.3pi"). Unknown keys, malformed lines and out-of-range values
// are hard errors; missing required keys (mode, model, strategy) are reported
// together when the config is finalized.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "model.hpp"

namespace sfb {

enum class RunMode { Steady, Evolve, Sweep, Traj, Oracle };
enum class ModelKind { Effective, Cavity, Full };
enum class OracleKind { Appendix, Elimination, FullVsEff };
enum class InitState { Ket111, Mixed, Singlet };
enum class TimeUnit { Gamma, BigG, SmallG };

struct RunConfig {
  RunMode mode = RunMode::Steady;
  ModelKind model = ModelKind::Effective;
  FeedbackKind strategy = FeedbackKind::None;
  SystemParams params;
  std::optional<double> omega_over_gamma;  // resolved into params.omega on finalize

  double t_end = 0.0;  // 0 = per-model default; expressed in time_unit
  TimeUnit time_unit = TimeUnit::Gamma;
  bool time_unit_set = false;
  int n_out = 201;
  double rtol = 1e-8, atol = 1e-10;
  InitState init = InitState::Ket111;
  double ss_tol = 1e-9;
  double t_long = 3000.0;  // steady-by-evolution horizon, in time_unit

  analysis::SweepAxis sweep_x = analysis::SweepAxis::OmegaOverGamma;
  analysis::SweepAxis sweep_y = analysis::SweepAxis::OmegaFb;
  double x_min = 0.0, x_max = 2.0;
  int x_count = 41;
  double y_min = 0.0, y_max = M_PI;
  int y_count = 41;
  enum class SweepKind { Steady, Finite, Contour } sweep_kind = SweepKind::Steady;
  double t_finite = 1500.0;  // finite-time sweep horizon, units of 1/Gamma

  int n_traj = 2000;
  std::uint64_t seed = 1;
  int threads = 1;

  OracleKind oracle = OracleKind::Appendix;
  double oracle_lambda_a = 1.0, oracle_lambda_b = 1.0;
  double oracle_gamma1 = 0.025, oracle_gamma2 = 0.025;
  double oracle_delta = 100.0;
  double oracle_t_end = 0.0;  // 0 = auto (covers ~1.25 Raman periods)

  std::string out;  // output path; per-mode default when empty

  std::set<std::string> keys_seen;
  bool has(const std::string& key) const { return keys_seen.count(key) != 0; }
};

namespace config {

// Parse config text. With require_complete, missing required keys fail
// immediately (the CLI parses leniently, injects the subcommand as mode, then
// finalizes).
RunConfig parse_config(const std::string& text, bool require_complete = true);

// Apply one key/value pair (the C API's set operation); line <= 0 means "not
// from a file" and drops the line prefix from error messages.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value, int line = 0);

// Check required keys, fill per-model defaults (n_max, J, time unit, t_end),
// resolve Omega_over_Gamma, and cross-validate mode/model combinations.
void finalize(RunConfig& cfg);

// Named figure presets as config text; Invalid on unknown name.
const std::string& preset(const std::string& name);
std::vector<std::string> preset_names();

double unit_rate(const RunConfig& cfg);      // time_unit expressed as a rate
FeedbackStrategy strategy_of(const RunConfig& cfg);

}  // namespace config
}  // namespace sfb
