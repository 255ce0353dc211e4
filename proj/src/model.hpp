#pragma once

// Builders for the three-qutrit singlet stabilization models. Each atom has
// levels {0, 1, 2}; the joint basis is |a b c> with atom 1 the slowest index
// (index = 9a + 3b + c). Cavity modes, when present, are appended as trailing
// tensor factors in normal-mode order c1, c2, c3.

#include <array>
#include <vector>

#include "opalg.hpp"

namespace sfb {

// Physical inputs. g is the reference single-atom cavity coupling; everything
// else is expressed in units of g unless stated otherwise. The effective
// collective coupling G and Raman drive Omega come from large-detuning
// two-photon processes: G = g*Omega_a/Delta, Omega = Omega_b*Omega_c/Delta =
// lambda_a*lambda_b/Delta. The effective jump rate Gamma = G^2/kappa is always
// recomputed, never stored.
struct SystemParams {
  double g = 1.0;           // reference cavity coupling
  double delta = 200.0;     // single-photon detuning Delta
  double j_hop = 0.0;       // cavity-chain hopping J (full model; 0 = unset)
  double big_g = 0.1;       // effective collective coupling G
  double omega = 0.05;      // effective Raman drive Omega
  double kappa = 1.0;       // cavity linewidth
  double gamma = 0.0;       // excited-level decay rate (gamma' assumed equal)
  double omega_fb = 0.0;    // feedback kick angle
  double eta = 1.0;         // detection efficiency
  int n_max = 1;            // per-mode Fock truncation

  // Raw drive amplitudes for the spontaneous-emission channels. Zero means
  // "derive from (G, Omega, Delta)": Omega_a = G*Delta/g (atom 2 gets
  // Omega_a/sqrt(2) so all three effective couplings equal G), and
  // lambda_a = lambda_b = Omega_b = Omega_c = sqrt(Omega*Delta).
  double lambda_a = 0.0;
  double lambda_b = 0.0;
  double omega_a = 0.0;
  double omega_b = 0.0;
  double omega_c = 0.0;

  double gamma_total() const { return big_g * big_g / kappa; }  // effective jump rate
  double resolved_omega_a(int atom) const;  // atom in {0,1,2}
  double resolved_lambda_a() const;
  double resolved_lambda_b() const;
  double resolved_omega_b() const;
  double resolved_omega_c() const;

  void validate() const;  // throws Err::Range on nonsense
};

enum class FeedbackKind { None, Nonlocal, LocalRandom };

struct FeedbackStrategy {
  FeedbackKind kind = FeedbackKind::None;
  double omega_fb = 0.0;
  double eta = 1.0;
};

// A master equation in operator form: rho' = -i[H, rho] + sum rate*D[op].
struct Generator {
  Index dim = 0;
  Mat hamiltonian;
  std::vector<LindbladTerm> terms;
};

namespace model {

inline constexpr Index kAtomDim = 27;

// Basis index of |abc>, levels in {0,1,2}.
constexpr Index basis_index(int a, int b, int c) { return 9 * a + 3 * b + c; }

// Embed a single-atom 3x3 operator at atom site in {0,1,2} (atom 0 slowest).
Mat embed_atom_op(const Mat& op3, int atom);

// |S3> = (|012> - |102> - |210> + |120> + |201> - |021>)/sqrt(6).
Vec singlet_state();

struct CollectiveOps {
  Mat j1_minus;  // sum_i |1><0|_i
  Mat j1_plus;
  Mat j2_minus;  // sum_i |1><2|_i
  Mat j2_plus;
};
CollectiveOps collective_ops();

// rho' = -i[Omega(J1+ + J1- + J2+ + J2-), rho] + Gamma D[J1-],  Gamma = G^2/kappa.
Generator build_effective_me(const SystemParams& p);

// U = exp[-i w (|1><0|+|0><1|)_1 - 2i w (|1><0|+|0><1|)_2], atom 3 untouched.
Mat feedback_unitary_nonlocal(double omega_fb);

// U_i = exp[-i w (|1><0|+|0><1|)_i] for each atom (Hermitized generator).
std::array<Mat, 3> feedback_unitaries_local(double omega_fb);

// Effective ME with the detected fraction of jumps dressed by feedback:
//   nonlocal:      eta*Gamma D[U J1-]        + (1-eta)*Gamma D[J1-]
//   local random:  eta*Gamma/3 sum_i D[U_i J1-] + (1-eta)*Gamma D[J1-]
// Zero-rate terms are dropped, so eta=0 (or kind None) reproduces
// build_effective_me exactly.
Generator build_feedback_me(const SystemParams& p, const FeedbackStrategy& fb);

// Raman-scattering channels from adiabatic elimination of the excited levels,
// six per atom, every rate proportional to gamma/Delta^2:
//   sqrt(gamma/2)/Delta * (lambda_a|s><0| + lambda_b|s><1|)      for s in {0,1}
//   sqrt(gamma/2)/Delta * Omega_a_i |s><0|                        for s in {0,1}
//   sqrt(gamma/2)/Delta * (Omega_b|s><1| + Omega_c|s><2|)         for s in {1,2}
// Empty when gamma == 0.
std::vector<LindbladTerm> build_spontaneous_channels(const SystemParams& p);

// One explicit cavity mode (dimension 27*(n_max+1)):
//   H = Omega(J1+ + J1- + J2+ + J2-) + (G/2)(J1+ c + J1- c†),
// loss channel kappa D[c], dressed by the feedback strategy.
Generator build_cavity_me(const SystemParams& p, const FeedbackStrategy& fb);

// Three coupled cavities in the normal-mode frame (dimension 27*(n_max+1)^3):
// atom-mode couplings with site-dependent normal-mode weights, mode detunings
// -sqrt(2) J n1 - 2 sqrt(2) J n2, collective Raman drive, and loss through the
// three physical modes a, b, c reconstructed from the normal modes; detected
// jumps are dressed by the feedback strategy.
Generator build_full_me(const SystemParams& p, const FeedbackStrategy& fb);

// Annihilation operator on an (n_max+1)-dimensional Fock space.
Mat boson_annihilation(int n_max);

}  // namespace model
}  // namespace sfb
