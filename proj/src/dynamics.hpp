#pragma once

// Time evolution and steady states for Lindblad generators, plus quantum-jump
// Monte Carlo unfoldings of the effective feedback master equation.

#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <vector>

#include "model.hpp"
#include "opalg.hpp"
#include "parallel.hpp"

namespace sfb {

using SpMat = Eigen::SparseMatrix<cxd>;

namespace dynamics {

struct IntegratorOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  int n_out = 201;           // uniform output grid size, including t = 0
  bool store_states = false; // keep rho at every grid point (small dims only)
  long max_steps = 200000000;
  int threads = 1;  // column-block lanes for the sparse generator path; the
                    // result is bitwise independent of this value
};

struct ObservableSet {
  Vec target;                // empty: fidelity series stays level 0
  Index mode_dim = 1;        // > 1: fidelity on the atom-reduced state
  bool track_min_eig = true;
};

struct EvolutionResult {
  RVec times;
  RVec fidelities;  // sqrt(<t|rho|t>), clamped to [0, 1]
  RVec traces;
  RVec purities;    // tr rho^2
  RVec min_eigs;    // smallest eigenvalue of rho (0 when not tracked)
  Mat final_rho;
  std::vector<Mat> states;  // populated when store_states
  long n_steps = 0;
  long n_rejected = 0;
};

// Matrix-free action of a Generator on a density matrix. Dense storage below
// kSparseDim, sparse above (the large models are >99% zeros). With threads > 1
// the sparse path splits density-matrix columns over a persistent lane pool;
// every column is still produced by the same serial kernel, so results are
// bitwise identical for any thread count. Not safe for concurrent apply calls
// on one instance.
class GeneratorAction {
 public:
  static constexpr Index kSparseDim = 64;

  explicit GeneratorAction(const Generator& gen, int threads = 1);

  Index dim() const { return dim_; }
  double fast_scale() const { return fast_scale_; }  // ~ max generator frequency
  double slow_scale() const { return slow_scale_; }  // ~ min channel rate
  parallel::WorkerPool* pool() const { return pool_.get(); }

  // drho = L(rho) assuming rho Hermitian (uses -i X + i X†, X = H_nh rho).
  void apply_hermitian(const Mat& rho, Mat& drho, Mat& scratch) const;
  // drho = L(rho) for arbitrary rho.
  void apply_general(const Mat& rho, Mat& drho, Mat& scratch) const;

  double residual_norm(const Mat& rho) const;  // ||L(rho)||_F, rho Hermitian

 private:
  void apply_pooled(const Mat& rho, Mat& drho, bool hermitian) const;

  Index dim_ = 0;
  bool sparse_ = false;
  double fast_scale_ = 0.0;
  double slow_scale_ = 0.0;
  Mat hnh_, hnh_adj_;
  std::vector<Mat> c_, c_adj_;  // sqrt(rate) * op
  SpMat s_hnh_, s_hnh_adj_;
  std::vector<SpMat> s_c_, s_c_adj_;
  // Lane-sliced copies of the right-hand factors (pooled path only).
  std::vector<std::vector<SpMat>> s_c_adj_cols_;
  std::vector<SpMat> s_hnh_adj_cols_;
  std::unique_ptr<parallel::WorkerPool> pool_;
  mutable Mat x_, y_;                // H_nh rho / rho H_nh†
  mutable std::vector<Mat> chan_x_;  // c_k rho
};

// Adaptive embedded Runge-Kutta 5(4) integration of rho' = L(rho) from a
// Hermitian, unit-trace, PSD rho0, sampling observables on a uniform grid and
// re-Hermitizing after every accepted step. Throws Stiff if the controller
// collapses the step size.
EvolutionResult evolve(const Generator& gen, const Mat& rho0, double t_end,
                       const ObservableSet& obs = {}, const IntegratorOptions& opt = {});

// Unique steady state of the vectorized generator. Dims <= 27 go through the
// kernel of the d^2 x d^2 superoperator, which detects (and reports) a
// degenerate kernel; dims up to 90 use a direct LU solve with the trace row
// pinned, where non-uniqueness instead surfaces as a residual failure
// (NotConverged). Beyond that the dense superoperator no longer fits;
// use steady_state_by_evolution.
Mat steady_state(const Generator& gen, double tol = 1e-9);

// Steady state by long integration from the maximally mixed state, stopping
// when ||L(rho)||_F < tol. For dims where the superoperator route is barred.
Mat steady_state_by_evolution(const Generator& gen, double t_long, double tol,
                              const IntegratorOptions& opt = {});

struct TrajectoryEnsemble {
  int n_traj = 0;
  std::uint64_t seed = 0;
  RVec times;
  RVec mean_projection;  // mean |<target|psi>|^2 over trajectories
  RVec mean_fidelity;    // sqrt(mean_projection)
  std::vector<long> jump_counts;
};

// Quantum-jump unfolding of the effective feedback master equation (27-dim
// only): deterministic drift under H - (i/2) Gamma J1+ J1-, collective jumps
// with probability Gamma <J1+ J1-> dt, detected jumps (prob. eta) followed by
// the feedback kick. RNG stream: one uniform deviate per step for the jump
// decision; on a jump, one for detection, plus one site index for the local
// strategy. Trajectory k uses mt19937_64 seeded with seed + k, so the result
// is independent of the thread count.
TrajectoryEnsemble run_trajectories(const SystemParams& p, const FeedbackStrategy& fb,
                                    const Vec& psi0, const Vec& target, double t_end, int n_traj,
                                    std::uint64_t seed, int n_out = 201, int threads = 1);

struct AppendixOracle {
  RVec times;
  RVec p0_full, p1_full, pe_full;  // three-level populations
  RVec p0_eff, p1_eff;             // eliminated two-level populations
  double max_deviation = 0.0;      // max |p_full - p_eff| over levels 0,1 and times
  double raman_freq_measured = 0.0;   // angular, from the first peak of p1_full
  double raman_freq_expected = 0.0;   // 2 lambda_a lambda_b / Delta
};

// Dual-route check of adiabatic elimination on a driven three-level atom
// {0, 1, e}: H = lambda_a(|e><0| + h.c.) + lambda_b(|e><1| + h.c.) - Delta|e><e|
// with decay gamma1 D[|0><e|] + gamma2 D[|1><e|], against the eliminated
// two-level model H_eff = (1/Delta)(lambda_a|0> + lambda_b|1>)(h.c.) with jump
// operators (sqrt(gamma_i)/Delta)|s>(lambda_a<0| + lambda_b<1|).
AppendixOracle appendix_oracle(double lambda_a, double lambda_b, double gamma1, double gamma2,
                               double delta, double t_end, int n_out = 801);

}  // namespace dynamics
}  // namespace sfb
