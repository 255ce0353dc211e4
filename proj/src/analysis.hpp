#pragma once

// Fidelity measures, parameter sweeps and model cross-comparisons.

#include <string>
#include <vector>

#include "dynamics.hpp"

namespace sfb::analysis {

// sqrt(<target|rho|target>), clamped into [0, 1]. Target must be normalized.
double fidelity(const Vec& target, const Mat& rho);

// Mixed-state fidelity tr sqrt(sqrt(rho) sigma sqrt(rho)), clamped into [0, 1].
double fidelity_mixed(const Mat& rho, const Mat& sigma);

// First sampled time with fidelity >= threshold; +infinity if never reached.
double convergence_time(const dynamics::EvolutionResult& res, double threshold);

enum class SweepAxis { OmegaOverGamma, OmegaFb, Gamma, Kappa, Eta };
enum class SweepMode { Steady, FiniteTime };

struct SweepGrid {
  std::string x_name, y_name;
  RVec xs, ys;
  Eigen::MatrixXd fidelities;         // ys.size() rows, xs.size() cols; NaN = failed point
  std::vector<std::string> failures;  // "<x_name>=..., <y_name>=...: message", index order
};

// Singlet fidelity of the effective feedback model over a 2-D parameter grid.
// Steady mode solves the Liouvillian kernel per point; FiniteTime evolves from
// |111> for t_finite (in units of 1/Gamma at that point) and takes the final
// fidelity. Points where the solve fails legitimately (e.g. a degenerate
// kernel on a zero-drive or zero-kick line) become NaN and are logged, not
// fatal. Spontaneous-emission channels are included whenever gamma > 0.
SweepGrid sweep_fidelity_2d(const SystemParams& base, const FeedbackStrategy& fb, SweepAxis x_axis,
                            const RVec& xs, SweepAxis y_axis, const RVec& ys, SweepMode mode,
                            double t_finite = 0.0, int threads = 1);

// Steady-state singlet fidelity against spontaneous emission: a (gamma, kappa)
// grid with the drive re-bound per point as Omega = 0.5 * Gamma(kappa).
// Cooperativity per point is C = g^2 / (gamma * kappa).
struct ContourGrid {
  RVec gammas, kappas;
  Eigen::MatrixXd fidelities;      // kappas.size() rows, gammas.size() cols
  Eigen::MatrixXd cooperativities;
  std::vector<std::string> failures;
};
ContourGrid decoherence_contour(const SystemParams& base, const FeedbackStrategy& fb,
                                const RVec& gammas, const RVec& kappas, int threads = 1);

struct CompareResult {
  RVec times;  // in units of G*t
  RVec fidelity_full, fidelity_effective;
  double max_gap = 0.0;  // max |full - effective| over the grid
  double final_full = 0.0, final_effective = 0.0;
};

// Evolve the three-cavity model and the effective feedback model from |111>
// (modes in vacuum) over the same horizon and compare singlet fidelities; the
// full model's fidelity is taken on the atom-reduced state.
CompareResult compare_full_vs_effective(const SystemParams& p, const FeedbackStrategy& fb,
                                        double t_end_gt, const dynamics::IntegratorOptions& opt);

}  // namespace sfb::analysis
