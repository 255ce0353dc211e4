#pragma once

// Executes a finalized RunConfig: builds the model, runs the requested
// computation, writes CSV output (17 significant digits, '.' decimal, '\n'
// line ends) and returns a one-line summary.

#include <string>

#include "config.hpp"
#include "dynamics.hpp"

namespace sfb::runner {

// CSV-stable number formatting via std::to_chars (locale-independent).
std::string format17(double x);

Generator build_generator(const RunConfig& cfg);
Mat initial_state(const RunConfig& cfg, Index dim);

// Steady state per model: Liouvillian kernel for the effective model,
// long-time integration for cavity/full.
Mat compute_steady(const RunConfig& cfg, const Generator& gen);

dynamics::EvolutionResult compute_evolve(const RunConfig& cfg, const Generator& gen);

// Full dispatch; out_override (when non-empty) replaces cfg.out. Returns the
// summary line. Throws sfb::Error on any failure.
std::string run(const RunConfig& cfg, const std::string& out_override = "");

}  // namespace sfb::runner
