#include "model.hpp"

#include <cmath>

namespace sfb {

namespace {

using opalg::kron;

const double kSqrt2 = std::sqrt(2.0);

Mat ket_bra3(int a, int b) {
  Mat m = Mat::Zero(3, 3);
  m(a, b) = 1.0;
  return m;
}

// 3x3 rotation exp[-i w (|1><0| + |0><1|)]: a 0<->1 x-rotation, |2> untouched.
Mat kick3(double w) {
  Mat u = Mat::Identity(3, 3);
  u(0, 0) = std::cos(w);
  u(1, 1) = std::cos(w);
  u(0, 1) = cxd(0.0, -std::sin(w));
  u(1, 0) = cxd(0.0, -std::sin(w));
  return u;
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) fail(Err::Range, std::string(name) + " must be > 0");
}

void check_nonnegative(double v, const char* name) {
  if (!(v >= 0.0)) fail(Err::Range, std::string(name) + " must be >= 0");
}

}  // namespace

double SystemParams::resolved_omega_a(int atom) const {
  const double base = omega_a > 0.0 ? omega_a : big_g * delta / g;
  return atom == 1 ? base / kSqrt2 : base;
}

double SystemParams::resolved_lambda_a() const {
  return lambda_a > 0.0 ? lambda_a : std::sqrt(omega * delta);
}

double SystemParams::resolved_lambda_b() const {
  return lambda_b > 0.0 ? lambda_b : std::sqrt(omega * delta);
}

double SystemParams::resolved_omega_b() const {
  return omega_b > 0.0 ? omega_b : std::sqrt(omega * delta);
}

double SystemParams::resolved_omega_c() const {
  return omega_c > 0.0 ? omega_c : std::sqrt(omega * delta);
}

void SystemParams::validate() const {
  check_positive(g, "g");
  check_positive(kappa, "kappa");
  check_positive(big_g, "G");
  check_nonnegative(omega, "Omega");
  check_nonnegative(gamma, "gamma");
  check_nonnegative(omega_fb, "omega_fb");
  if (!(eta >= 0.0 && eta <= 1.0)) fail(Err::Range, "eta must lie in [0, 1]");
  if (n_max < 1) fail(Err::Range, "n_max must be >= 1");
  if (gamma > 0.0 && !(delta > 0.0)) fail(Err::Range, "Delta must be > 0 when gamma > 0");
  check_nonnegative(lambda_a, "lambda_a");
  check_nonnegative(lambda_b, "lambda_b");
  check_nonnegative(omega_a, "Omega_a");
  check_nonnegative(omega_b, "Omega_b");
  check_nonnegative(omega_c, "Omega_c");
  check_nonnegative(j_hop, "J");
}

namespace model {

Mat embed_atom_op(const Mat& op3, int atom) {
  if (op3.rows() != 3 || op3.cols() != 3) fail(Err::Dim, "embed_atom_op: operator must be 3x3");
  if (atom < 0 || atom > 2) fail(Err::Range, "embed_atom_op: atom index out of range");
  const Mat id = Mat::Identity(3, 3);
  const Mat& a = atom == 0 ? op3 : id;
  const Mat& b = atom == 1 ? op3 : id;
  const Mat& c = atom == 2 ? op3 : id;
  return kron(kron(a, b), c);
}

Vec singlet_state() {
  Vec s = Vec::Zero(kAtomDim);
  const double w = 1.0 / std::sqrt(6.0);
  s(basis_index(0, 1, 2)) = w;
  s(basis_index(1, 0, 2)) = -w;
  s(basis_index(2, 1, 0)) = -w;
  s(basis_index(1, 2, 0)) = w;
  s(basis_index(2, 0, 1)) = w;
  s(basis_index(0, 2, 1)) = -w;
  return s;
}

CollectiveOps collective_ops() {
  CollectiveOps ops;
  ops.j1_minus = Mat::Zero(kAtomDim, kAtomDim);
  ops.j2_minus = Mat::Zero(kAtomDim, kAtomDim);
  for (int atom = 0; atom < 3; ++atom) {
    ops.j1_minus += embed_atom_op(ket_bra3(1, 0), atom);
    ops.j2_minus += embed_atom_op(ket_bra3(1, 2), atom);
  }
  ops.j1_plus = ops.j1_minus.adjoint();
  ops.j2_plus = ops.j2_minus.adjoint();
  return ops;
}

Generator build_effective_me(const SystemParams& p) {
  p.validate();
  const auto ops = collective_ops();
  Generator gen;
  gen.dim = kAtomDim;
  gen.hamiltonian = p.omega * (ops.j1_plus + ops.j1_minus + ops.j2_plus + ops.j2_minus);
  gen.terms.push_back({p.gamma_total(), ops.j1_minus});
  return gen;
}

Mat feedback_unitary_nonlocal(double omega_fb) {
  return kron(kron(kick3(omega_fb), kick3(2.0 * omega_fb)), Mat::Identity(3, 3));
}

std::array<Mat, 3> feedback_unitaries_local(double omega_fb) {
  return {embed_atom_op(kick3(omega_fb), 0), embed_atom_op(kick3(omega_fb), 1),
          embed_atom_op(kick3(omega_fb), 2)};
}

Generator build_feedback_me(const SystemParams& p, const FeedbackStrategy& fb) {
  Generator gen = build_effective_me(p);
  if (fb.kind == FeedbackKind::None) return gen;
  if (!(fb.eta >= 0.0 && fb.eta <= 1.0)) fail(Err::Range, "eta must lie in [0, 1]");

  const double gamma_jump = p.gamma_total();
  const Mat j1m = gen.terms[0].op;
  gen.terms.clear();
  if (fb.kind == FeedbackKind::Nonlocal) {
    if (fb.eta > 0.0)
      gen.terms.push_back({fb.eta * gamma_jump, feedback_unitary_nonlocal(fb.omega_fb) * j1m});
  } else {
    if (fb.eta > 0.0) {
      const auto us = feedback_unitaries_local(fb.omega_fb);
      for (const auto& u : us) gen.terms.push_back({fb.eta * gamma_jump / 3.0, u * j1m});
    }
  }
  if (fb.eta < 1.0) gen.terms.push_back({(1.0 - fb.eta) * gamma_jump, j1m});
  return gen;
}

std::vector<LindbladTerm> build_spontaneous_channels(const SystemParams& p) {
  p.validate();
  std::vector<LindbladTerm> terms;
  if (p.gamma == 0.0) return terms;

  const double rate = p.gamma / (2.0 * p.delta * p.delta);
  const double la = p.resolved_lambda_a();
  const double lb = p.resolved_lambda_b();
  const double ob = p.resolved_omega_b();
  const double oc = p.resolved_omega_c();
  for (int atom = 0; atom < 3; ++atom) {
    const double oa = p.resolved_omega_a(atom);
    // Raman decay of the lambda system (drives the 0/1 sector).
    for (int s : {0, 1}) {
      terms.push_back({rate, embed_atom_op(la * ket_bra3(s, 0) + lb * ket_bra3(s, 1), atom)});
      terms.push_back({rate, embed_atom_op(oa * ket_bra3(s, 0), atom)});
    }
    // Raman decay of the 1/2 sector through the second excited level.
    for (int s : {1, 2}) {
      terms.push_back({rate, embed_atom_op(ob * ket_bra3(s, 1) + oc * ket_bra3(s, 2), atom)});
    }
  }
  return terms;
}

Mat boson_annihilation(int n_max) {
  if (n_max < 1) fail(Err::Range, "boson_annihilation: n_max must be >= 1");
  const Index m = n_max + 1;
  Mat c = Mat::Zero(m, m);
  for (Index n = 1; n < m; ++n) c(n - 1, n) = std::sqrt(double(n));
  return c;
}

namespace {

// Dress a loss channel by the feedback strategy: detected jumps pick up the
// kick unitary, undetected ones stay bare. u27s are atom-space unitaries; the
// mode op is already embedded in the full space.
void push_dressed_loss(std::vector<LindbladTerm>& terms, double rate, const Mat& mode_op_full,
                       const FeedbackStrategy& fb, Index mode_dim) {
  if (fb.kind == FeedbackKind::None) {
    terms.push_back({rate, mode_op_full});
    return;
  }
  const Mat id_modes = Mat::Identity(mode_dim, mode_dim);
  if (fb.kind == FeedbackKind::Nonlocal) {
    if (fb.eta > 0.0) {
      const Mat u = kron(feedback_unitary_nonlocal(fb.omega_fb), id_modes);
      terms.push_back({fb.eta * rate, u * mode_op_full});
    }
  } else {
    if (fb.eta > 0.0) {
      for (const auto& u3 : feedback_unitaries_local(fb.omega_fb))
        terms.push_back({fb.eta * rate / 3.0, kron(u3, id_modes) * mode_op_full});
    }
  }
  if (fb.eta < 1.0) terms.push_back({(1.0 - fb.eta) * rate, mode_op_full});
}

}  // namespace

Generator build_cavity_me(const SystemParams& p, const FeedbackStrategy& fb) {
  p.validate();
  const Index m = p.n_max + 1;
  const Mat id_atoms = Mat::Identity(kAtomDim, kAtomDim);
  const Mat id_mode = Mat::Identity(m, m);
  const Mat c = boson_annihilation(p.n_max);
  const auto ops = collective_ops();

  Generator gen;
  gen.dim = kAtomDim * m;
  gen.hamiltonian =
      p.omega * kron(ops.j1_plus + ops.j1_minus + ops.j2_plus + ops.j2_minus, id_mode) +
      0.5 * p.big_g * (kron(ops.j1_plus, c) + kron(ops.j1_minus, Mat(c.adjoint())));
  push_dressed_loss(gen.terms, p.kappa, kron(id_atoms, c), fb, m);
  if (p.gamma > 0.0)
    for (auto& t : build_spontaneous_channels(p)) gen.terms.push_back({t.rate, kron(t.op, id_mode)});
  return gen;
}

Generator build_full_me(const SystemParams& p, const FeedbackStrategy& fb) {
  p.validate();
  if (!(p.j_hop > 0.0)) fail(Err::Range, "full model requires cavity hopping J > 0");
  if (p.n_max > 2) fail(Err::Range, "full model supports n_max <= 2 (dense operators)");
  const Index m = p.n_max + 1;
  const Index mode_dim = m * m * m;
  const Mat id_atoms = Mat::Identity(kAtomDim, kAtomDim);
  const Mat id_m = Mat::Identity(m, m);
  const Mat cm = boson_annihilation(p.n_max);

  // Normal modes c1, c2, c3 on the mode factor (c1 slowest index).
  const Mat c1 = kron(kron(cm, id_m), id_m);
  const Mat c2 = kron(kron(id_m, cm), id_m);
  const Mat c3 = kron(kron(id_m, id_m), cm);

  // Per-site normal-mode weight patterns (all three effective couplings equal
  // G once atom 2's weaker drive is folded in): site 1 -> c3 + c2 + sqrt(2)c1,
  // site 2 -> c3 - c2, site 3 -> c3 + c2 - sqrt(2)c1, each with prefactor G/2.
  const std::array<Mat, 3> site_modes = {c3 + c2 + kSqrt2 * c1, c3 - c2, c3 + c2 - kSqrt2 * c1};

  Generator gen;
  gen.dim = kAtomDim * mode_dim;
  const auto ops = collective_ops();
  Mat h = p.omega * kron(ops.j1_plus + ops.j1_minus + ops.j2_plus + ops.j2_minus,
                         Mat::Identity(mode_dim, mode_dim));
  for (int atom = 0; atom < 3; ++atom) {
    const Mat lower = embed_atom_op(ket_bra3(0, 1), atom);  // |0><1| at this site
    Mat coupling = 0.5 * p.big_g * kron(lower, site_modes[atom]);
    h += coupling + Mat(coupling.adjoint());
  }
  // Normal-mode detunings from the hopping J.
  h += kron(id_atoms, -kSqrt2 * p.j_hop * Mat(c1.adjoint() * c1) -
                          2.0 * kSqrt2 * p.j_hop * Mat(c2.adjoint() * c2));
  gen.hamiltonian = std::move(h);

  // Physical loss modes reconstructed from the normal modes.
  const Mat mode_a = 0.5 * (kSqrt2 * c1 + c2 + c3);
  const Mat mode_b = (c3 - c2) / kSqrt2;
  const Mat mode_c = 0.5 * (-kSqrt2 * c1 + c2 + c3);
  for (const Mat* mode : {&mode_a, &mode_b, &mode_c})
    push_dressed_loss(gen.terms, p.kappa, kron(id_atoms, *mode), fb, mode_dim);

  if (p.gamma > 0.0) {
    const Mat id_modes = Mat::Identity(mode_dim, mode_dim);
    for (auto& t : build_spontaneous_channels(p)) gen.terms.push_back({t.rate, kron(t.op, id_modes)});
  }
  return gen;
}

}  // namespace model
}  // namespace sfb
