#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "../src/config.hpp"

using namespace sfb;
using config::parse_config;

namespace {

Err code_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return Err{};  // 0: no error
}

std::string message_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a minimal steady-state config parses and resolves the drive ratio") {
  const auto cfg = parse_config(
      "mode = steady\n"
      "model = effective\n"
      "strategy = nonlocal\n"
      "omega_fb = 0.3pi\n"
      "Omega_over_Gamma = 0.5\n");
  CHECK(cfg.mode == RunMode::Steady);
  CHECK(cfg.model == ModelKind::Effective);
  CHECK(cfg.strategy == FeedbackKind::Nonlocal);
  CHECK(cfg.params.omega_fb == doctest::Approx(0.3 * M_PI).epsilon(1e-15));
  // Defaults G = 0.1, kappa = 1: Gamma = 0.01, so Omega = 0.005.
  CHECK(cfg.params.omega == doctest::Approx(0.5 * cfg.params.gamma_total()).epsilon(1e-15));
  CHECK(cfg.params.omega == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(cfg.t_end == doctest::Approx(200.0));  // per-model default
}

TEST_CASE("missing required keys are reported together") {
  CHECK(code_of("") == Err::Parse);
  const std::string msg = message_of("Omega = 0.1\n");
  CHECK(msg.find("mode") != std::string::npos);
  CHECK(msg.find("model") != std::string::npos);
  CHECK(msg.find("strategy") != std::string::npos);

  // Only 'mode' missing.
  const std::string msg2 = message_of("model = effective\nstrategy = none\n");
  CHECK(msg2.find("mode") != std::string::npos);
  CHECK(msg2.find("strategy") == std::string::npos);
}

TEST_CASE("line-level parse failures carry the line number") {
  CHECK(code_of("mode = steady\nnot a key value line\n") == Err::Parse);
  CHECK(message_of("mode = steady\nnot a key value line\n").find("line 2") != std::string::npos);

  CHECK(code_of("= 3\n") == Err::Parse);           // empty key
  CHECK(code_of("Omega =\n") == Err::Parse);       // empty value
  CHECK(code_of("Omega = abc\n") == Err::Parse);   // not a number
  CHECK(code_of("Omega = 1.5x\n") == Err::Parse);  // trailing junk
  CHECK(code_of("omega_fb = pi\n") == Err::Parse); // bare "pi" is not a number
}

TEST_CASE("unknown keys are rejected with their location") {
  const std::string text = "mode = steady\nmodel = effective\nstrategy = none\nOmegaa = 1\n";
  CHECK(code_of(text) == Err::UnknownKey);
  CHECK(message_of(text).find("line 4") != std::string::npos);
  CHECK(message_of(text).find("Omegaa") != std::string::npos);
}

TEST_CASE("range checks") {
  const std::string head = "mode = steady\nmodel = effective\nstrategy = nonlocal\n";
  CHECK(code_of(head + "eta = 1.5\n") == Err::Range);
  CHECK(code_of(head + "eta = -0.1\n") == Err::Range);
  CHECK(code_of(head + "kappa = 0\n") == Err::Range);
  CHECK(code_of(head + "kappa = -1\n") == Err::Range);
  CHECK(code_of(head + "n_max = 0\n") == Err::Range);
  CHECK(code_of(head + "n_max = 13\n") == Err::Range);
  CHECK(code_of(head + "t_end = -5\n") == Err::Range);
  CHECK(code_of(head + "mode = nonsense\n") == Err::Range);
  CHECK(code_of(head + "threads = 0\n") == Err::Range);
}

TEST_CASE("pi-suffixed angles, comments, and duplicate keys") {
  const auto cfg = parse_config(
      "mode = steady\n"
      "model = effective\n"
      "# a full-line comment\n"
      "strategy = local\n"
      "omega_fb = 0.5 pi   # trailing comment\n"
      "\n"
      "Omega = 0.1\n"
      "Omega = 0.2\n");  // last one wins
  CHECK(cfg.params.omega_fb == doctest::Approx(0.5 * M_PI).epsilon(1e-15));
  CHECK(cfg.params.omega == doctest::Approx(0.2));
  CHECK(cfg.strategy == FeedbackKind::LocalRandom);
}

TEST_CASE("Omega_over_Gamma wins over an absolute Omega") {
  const auto cfg = parse_config(
      "mode = steady\nmodel = effective\nstrategy = nonlocal\n"
      "Omega_over_Gamma = 1.0\n"
      "Omega = 123.0\n"
      "G = 1\nkappa = 2\n");  // Gamma = 0.5
  CHECK(cfg.params.omega == doctest::Approx(0.5));
}

TEST_CASE("per-model defaults") {
  const auto cavity = parse_config("mode = steady\nmodel = cavity\nstrategy = nonlocal\n");
  CHECK(cavity.params.n_max == 2);
  CHECK(cavity.time_unit == TimeUnit::Gamma);

  const auto full = parse_config("mode = evolve\nmodel = full\nstrategy = nonlocal\n");
  CHECK(full.params.n_max == 1);
  CHECK(full.params.j_hop == doctest::Approx(full.params.delta / std::sqrt(2.0)));
  CHECK(full.time_unit == TimeUnit::BigG);
  CHECK(full.t_end == doctest::Approx(1500.0));

  const auto traj = parse_config("mode = traj\nmodel = effective\nstrategy = nonlocal\n");
  CHECK(traj.t_end == doctest::Approx(50.0));

  const auto explicit_nmax =
      parse_config("mode = steady\nmodel = cavity\nstrategy = nonlocal\nn_max = 1\n");
  CHECK(explicit_nmax.params.n_max == 1);
}

TEST_CASE("mode/model cross-restrictions") {
  CHECK(code_of("mode = traj\nmodel = cavity\nstrategy = nonlocal\n") == Err::Range);
  CHECK(code_of("mode = sweep\nmodel = full\nstrategy = nonlocal\n") == Err::Range);
  CHECK(code_of("mode = sweep\nmodel = effective\nstrategy = nonlocal\n"
                "x_min = 1\nx_max = 0\n") == Err::Range);
  CHECK(code_of("mode = sweep\nmodel = effective\nstrategy = nonlocal\n"
                "sweep_mode = contour\nsweep_x = gamma\nsweep_y = kappa\n"
                "x_min = 0\nx_max = 0.05\ny_min = 0.005\ny_max = 0.1\n") == Err::Range);
}

TEST_CASE("time units and feedback strategy accessors") {
  auto cfg = parse_config(
      "mode = evolve\nmodel = effective\nstrategy = nonlocal\n"
      "G = 0.2\nkappa = 2\nomega_fb = 0.3pi\neta = 0.7\n");
  CHECK(config::unit_rate(cfg) == doctest::Approx(0.02));  // Gamma = G^2/kappa

  const auto fb = config::strategy_of(cfg);
  CHECK(fb.kind == FeedbackKind::Nonlocal);
  CHECK(fb.omega_fb == doctest::Approx(0.3 * M_PI));
  CHECK(fb.eta == doctest::Approx(0.7));

  auto small_g = parse_config(
      "mode = evolve\nmodel = effective\nstrategy = none\ntime_unit = g\ng = 2\n");
  CHECK(config::unit_rate(small_g) == doctest::Approx(2.0));
}

TEST_CASE("presets parse, finalize, and cover the named figures") {
  const auto names = config::preset_names();
  for (const char* expected :
       {"fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5", "fig5_200g"}) {
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
  }
  for (const auto& name : names) {
    CAPTURE(name);
    const auto cfg = parse_config(config::preset(name));  // finalizes
    CHECK(!cfg.out.empty());
  }

  CHECK_THROWS_AS((void)config::preset("nope"), Error);
  try {
    (void)config::preset("nope");
  } catch (const Error& e) {
    CHECK(e.code() == Err::Invalid);
  }
}

TEST_CASE("apply_key without a line number drops the location prefix") {
  RunConfig cfg;
  try {
    config::apply_key(cfg, "eta", "7", 0);
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line") == std::string::npos);
    CHECK(e.code() == Err::Range);
  }
  config::apply_key(cfg, "eta", "0.25", 0);
  CHECK(cfg.params.eta == doctest::Approx(0.25));
  CHECK(cfg.has("eta"));
}
