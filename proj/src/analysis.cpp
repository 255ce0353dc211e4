#include "analysis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "parallel.hpp"

namespace sfb::analysis {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::OmegaOverGamma: return "Omega_over_Gamma";
    case SweepAxis::OmegaFb: return "omega_fb";
    case SweepAxis::Gamma: return "gamma";
    case SweepAxis::Kappa: return "kappa";
    case SweepAxis::Eta: return "eta";
  }
  return "?";
}

// Axis application is two-phase: plain fields first, then the drive binding
// Omega = (Omega/Gamma) * G^2/kappa, so the ratio never sees a stale kappa.
void apply_axis(SystemParams& p, FeedbackStrategy& fb, SweepAxis axis, double v,
                double& omega_over_gamma) {
  switch (axis) {
    case SweepAxis::OmegaOverGamma: omega_over_gamma = v; break;
    case SweepAxis::OmegaFb:
      p.omega_fb = v;
      fb.omega_fb = v;
      break;
    case SweepAxis::Gamma: p.gamma = v; break;
    case SweepAxis::Kappa: p.kappa = v; break;
    case SweepAxis::Eta:
      p.eta = v;
      fb.eta = v;
      break;
  }
}

Generator build_point_generator(const SystemParams& p, const FeedbackStrategy& fb) {
  Generator gen = model::build_feedback_me(p, fb);
  if (p.gamma > 0.0)
    for (auto& t : model::build_spontaneous_channels(p)) gen.terms.push_back(std::move(t));
  return gen;
}

}  // namespace

double fidelity(const Vec& target, const Mat& rho) {
  if (rho.rows() != target.size() || rho.cols() != target.size())
    fail(Err::Dim, "fidelity: target/state dimension mismatch");
  if (std::abs(target.norm() - 1.0) > 1e-9) fail(Err::Range, "fidelity: target must be normalized");
  return std::sqrt(clamp01((target.adjoint() * rho * target)(0, 0).real()));
}

double fidelity_mixed(const Mat& rho, const Mat& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    fail(Err::Dim, "fidelity_mixed: dimension mismatch");
  auto [lam, v] = opalg::herm_eig(rho);
  RVec root = lam.cwiseMax(0.0).cwiseSqrt();
  const Mat sqrt_rho = v * root.asDiagonal() * v.adjoint();
  const Mat inner = sqrt_rho * sigma * sqrt_rho;
  auto [mu, w] = opalg::herm_eig(0.5 * (inner + Mat(inner.adjoint())));
  // Rank-deficient inputs leave eigenvalues that are pure rounding noise; their
  // square roots are ~1e-8 each and would pollute the sum, so drop them.
  const double cutoff =
      std::max(mu.maxCoeff(), 0.0) * double(mu.size()) * std::numeric_limits<double>::epsilon();
  double f = 0.0;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu(i) > cutoff) f += std::sqrt(mu(i));
  return clamp01(f);
}

double convergence_time(const dynamics::EvolutionResult& res, double threshold) {
  for (Index i = 0; i < res.times.size(); ++i)
    if (res.fidelities(i) >= threshold) return res.times(i);
  return std::numeric_limits<double>::infinity();
}

SweepGrid sweep_fidelity_2d(const SystemParams& base, const FeedbackStrategy& fb,
                            SweepAxis x_axis, const RVec& xs, SweepAxis y_axis, const RVec& ys,
                            SweepMode mode, double t_finite, int threads) {
  if (xs.size() == 0 || ys.size() == 0) fail(Err::Range, "sweep: empty axis");
  if (mode == SweepMode::FiniteTime && !(t_finite > 0.0))
    fail(Err::Range, "sweep: finite-time mode needs t_finite > 0");

  SweepGrid grid;
  grid.x_name = axis_name(x_axis);
  grid.y_name = axis_name(y_axis);
  grid.xs = xs;
  grid.ys = ys;
  grid.fidelities.resize(ys.size(), xs.size());

  const Vec target = model::singlet_state();
  const Index i111 = model::basis_index(1, 1, 1);
  const long n_points = long(xs.size()) * long(ys.size());
  std::vector<std::string> point_failure(n_points);

  parallel_for(n_points, threads, [&](long idx) {
    const Index ix = idx % xs.size();
    const Index iy = idx / xs.size();
    SystemParams p = base;
    FeedbackStrategy fbs = fb;
    double omega_over_gamma = std::numeric_limits<double>::quiet_NaN();
    apply_axis(p, fbs, x_axis, xs(ix), omega_over_gamma);
    apply_axis(p, fbs, y_axis, ys(iy), omega_over_gamma);
    if (!std::isnan(omega_over_gamma)) p.omega = omega_over_gamma * p.gamma_total();
    try {
      const Generator gen = build_point_generator(p, fbs);
      double f;
      if (mode == SweepMode::Steady) {
        f = fidelity(target, dynamics::steady_state(gen));
      } else {
        Mat rho0 = Mat::Zero(gen.dim, gen.dim);
        rho0(i111, i111) = 1.0;
        dynamics::IntegratorOptions opt;
        opt.n_out = 2;
        dynamics::ObservableSet obs;
        obs.target = target;
        obs.track_min_eig = false;
        const double t_phys = t_finite / p.gamma_total();
        f = dynamics::evolve(gen, rho0, t_phys, obs, opt).fidelities(1);
      }
      grid.fidelities(iy, ix) = f;
    } catch (const Error& e) {
      grid.fidelities(iy, ix) = std::numeric_limits<double>::quiet_NaN();
      std::ostringstream os;
      os << grid.x_name << "=" << xs(ix) << ", " << grid.y_name << "=" << ys(iy) << ": ["
         << e.code_name() << "] " << e.what();
      point_failure[idx] = os.str();
    }
  });

  for (auto& msg : point_failure)
    if (!msg.empty()) grid.failures.push_back(std::move(msg));
  return grid;
}

ContourGrid decoherence_contour(const SystemParams& base, const FeedbackStrategy& fb,
                                const RVec& gammas, const RVec& kappas, int threads) {
  if (gammas.size() == 0 || kappas.size() == 0) fail(Err::Range, "contour: empty axis");
  ContourGrid grid;
  grid.gammas = gammas;
  grid.kappas = kappas;
  grid.fidelities.resize(kappas.size(), gammas.size());
  grid.cooperativities.resize(kappas.size(), gammas.size());

  const Vec target = model::singlet_state();
  const double omega_over_gamma = base.omega > 0.0 && base.gamma_total() > 0.0
                                      ? base.omega / base.gamma_total()
                                      : 0.5;
  const long n_points = long(gammas.size()) * long(kappas.size());
  std::vector<std::string> point_failure(n_points);

  parallel_for(n_points, threads, [&](long idx) {
    const Index ig = idx % gammas.size();
    const Index ik = idx / gammas.size();
    SystemParams p = base;
    FeedbackStrategy fbs = fb;
    p.gamma = gammas(ig);
    p.kappa = kappas(ik);
    p.omega = omega_over_gamma * p.gamma_total();
    grid.cooperativities(ik, ig) = p.g * p.g / (p.gamma * p.kappa);
    try {
      grid.fidelities(ik, ig) = fidelity(target, dynamics::steady_state(build_point_generator(p, fbs)));
    } catch (const Error& e) {
      grid.fidelities(ik, ig) = std::numeric_limits<double>::quiet_NaN();
      std::ostringstream os;
      os << "gamma=" << gammas(ig) << ", kappa=" << kappas(ik) << ": [" << e.code_name() << "] "
         << e.what();
      point_failure[idx] = os.str();
    }
  });

  for (auto& msg : point_failure)
    if (!msg.empty()) grid.failures.push_back(std::move(msg));
  return grid;
}

CompareResult compare_full_vs_effective(const SystemParams& p, const FeedbackStrategy& fb,
                                        double t_end_gt, const dynamics::IntegratorOptions& opt) {
  if (!(t_end_gt > 0.0)) fail(Err::Range, "compare: horizon must be > 0");
  const double t_phys = t_end_gt / p.big_g;
  const Vec target = model::singlet_state();
  const Index i111 = model::basis_index(1, 1, 1);

  const Generator full = model::build_full_me(p, fb);
  const Index mode_dim = full.dim / model::kAtomDim;
  Mat rho0_full = Mat::Zero(full.dim, full.dim);
  rho0_full(i111 * mode_dim, i111 * mode_dim) = 1.0;  // |111> x vacuum
  dynamics::ObservableSet obs_full;
  obs_full.target = target;
  obs_full.mode_dim = mode_dim;
  obs_full.track_min_eig = full.dim <= 256;
  const auto res_full = dynamics::evolve(full, rho0_full, t_phys, obs_full, opt);

  const Generator eff = model::build_feedback_me(p, fb);
  Mat rho0_eff = Mat::Zero(eff.dim, eff.dim);
  rho0_eff(i111, i111) = 1.0;
  dynamics::ObservableSet obs_eff;
  obs_eff.target = target;
  const auto res_eff = dynamics::evolve(eff, rho0_eff, t_phys, obs_eff, opt);

  CompareResult out;
  out.times = res_full.times * p.big_g;
  out.fidelity_full = res_full.fidelities;
  out.fidelity_effective = res_eff.fidelities;
  out.max_gap = (res_full.fidelities - res_eff.fidelities).cwiseAbs().maxCoeff();
  out.final_full = res_full.fidelities(res_full.fidelities.size() - 1);
  out.final_effective = res_eff.fidelities(res_eff.fidelities.size() - 1);
  return out;
}

}  // namespace sfb::analysis
