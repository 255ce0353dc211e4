#include "runner.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sfb::runner {

namespace {

std::string default_out(const RunConfig& cfg) {
  switch (cfg.mode) {
    case RunMode::Steady: return "steady.csv";
    case RunMode::Evolve: return "evolve.csv";
    case RunMode::Sweep: return "sweep.csv";
    case RunMode::Traj: return "traj.csv";
    case RunMode::Oracle: return "oracle.csv";
  }
  return "out.csv";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary: keep '\n' on every platform
  if (!f) fail(Err::Io, "cannot open output file '" + path + "'");
  return f;
}

void finish_out(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) fail(Err::Io, "write failed for output file '" + path + "'");
}

Index model_mode_dim(const RunConfig& cfg) {
  const Index m = cfg.params.n_max + 1;
  switch (cfg.model) {
    case ModelKind::Effective: return 1;
    case ModelKind::Cavity: return m;
    case ModelKind::Full: return m * m * m;
  }
  return 1;
}

void write_series_csv(std::ofstream& f, const RunConfig& cfg,
                      const dynamics::EvolutionResult& res) {
  const double unit = config::unit_rate(cfg);
  f << "t,fidelity,trace,purity,min_eig\n";
  for (Index i = 0; i < res.times.size(); ++i)
    f << format17(res.times(i) * unit) << ',' << format17(res.fidelities(i)) << ','
      << format17(res.traces(i)) << ',' << format17(res.purities(i)) << ','
      << format17(res.min_eigs(i)) << '\n';
}

}  // namespace

std::string format17(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

Generator build_generator(const RunConfig& cfg) {
  const FeedbackStrategy fb = config::strategy_of(cfg);
  switch (cfg.model) {
    case ModelKind::Effective: {
      Generator gen = model::build_feedback_me(cfg.params, fb);
      if (cfg.params.gamma > 0.0)
        for (auto& t : model::build_spontaneous_channels(cfg.params))
          gen.terms.push_back(std::move(t));
      return gen;
    }
    case ModelKind::Cavity: return model::build_cavity_me(cfg.params, fb);
    case ModelKind::Full: return model::build_full_me(cfg.params, fb);
  }
  fail(Err::Internal, "unhandled model kind");
}

Mat initial_state(const RunConfig& cfg, Index dim) {
  const Index mode_dim = model_mode_dim(cfg);
  if (dim != model::kAtomDim * mode_dim) fail(Err::Internal, "initial_state: dim mismatch");
  Mat rho = Mat::Zero(dim, dim);
  switch (cfg.init) {
    case InitState::Ket111: {
      const Index i = model::basis_index(1, 1, 1) * mode_dim;  // modes in vacuum
      rho(i, i) = 1.0;
      break;
    }
    case InitState::Mixed:
      rho = Mat::Identity(dim, dim) / double(dim);
      break;
    case InitState::Singlet: {
      const Vec s3 = model::singlet_state();
      Vec s = Vec::Zero(dim);  // singlet ⊗ mode vacuum
      for (Index a = 0; a < model::kAtomDim; ++a) s(a * mode_dim) = s3(a);
      rho = s * s.adjoint();
      break;
    }
  }
  return rho;
}

Mat compute_steady(const RunConfig& cfg, const Generator& gen) {
  if (gen.dim <= 90) return dynamics::steady_state(gen, cfg.ss_tol);
  dynamics::IntegratorOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  opt.threads = cfg.threads;
  const double t_long = cfg.t_long / config::unit_rate(cfg);
  return dynamics::steady_state_by_evolution(gen, t_long, cfg.ss_tol, opt);
}

dynamics::EvolutionResult compute_evolve(const RunConfig& cfg, const Generator& gen) {
  dynamics::IntegratorOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  opt.n_out = cfg.n_out;
  opt.threads = cfg.threads;
  dynamics::ObservableSet obs;
  obs.target = model::singlet_state();
  obs.mode_dim = model_mode_dim(cfg);
  obs.track_min_eig = gen.dim <= 256;
  const double t_phys = cfg.t_end / config::unit_rate(cfg);
  return dynamics::evolve(gen, initial_state(cfg, gen.dim), t_phys, obs, opt);
}

namespace {

std::string run_steady(const RunConfig& cfg, const std::string& path) {
  const Generator gen = build_generator(cfg);
  const Mat rho = compute_steady(cfg, gen);
  const Index mode_dim = model_mode_dim(cfg);
  const Mat atoms = mode_dim > 1 ? opalg::partial_trace_right(rho, model::kAtomDim, mode_dim) : rho;
  const double f = analysis::fidelity(model::singlet_state(), atoms);
  const double purity = rho.squaredNorm();
  const double min_eig = opalg::min_eigenvalue(rho);

  auto f_out = open_out(path);
  f_out << "observable,value\n";
  f_out << "fidelity_singlet," << format17(f) << '\n';
  f_out << "purity," << format17(purity) << '\n';
  f_out << "min_eig," << format17(min_eig) << '\n';
  f_out << "trace," << format17(rho.trace().real()) << '\n';
  finish_out(f_out, path);

  std::ostringstream os;
  os << "steady: F_ss=" << format17(f) << " purity=" << format17(purity) << " -> " << path;
  return os.str();
}

std::string run_evolve(const RunConfig& cfg, const std::string& path) {
  const Generator gen = build_generator(cfg);
  const auto res = compute_evolve(cfg, gen);
  auto f_out = open_out(path);
  write_series_csv(f_out, cfg, res);
  finish_out(f_out, path);
  std::ostringstream os;
  os << "evolve: F(singlet) at t_end = " << format17(res.fidelities(res.fidelities.size() - 1))
     << ", steps = " << res.n_steps << " -> " << path;
  return os.str();
}

std::string run_sweep(const RunConfig& cfg, const std::string& path) {
  const FeedbackStrategy fb = config::strategy_of(cfg);
  auto linspace = [](double lo, double hi, int n) {
    RVec v(n);
    for (int i = 0; i < n; ++i) v(i) = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    return v;
  };
  const RVec xs = linspace(cfg.x_min, cfg.x_max, cfg.x_count);
  const RVec ys = linspace(cfg.y_min, cfg.y_max, cfg.y_count);

  std::string x_name, y_name;
  Eigen::MatrixXd fid;
  std::size_t n_failed = 0;
  if (cfg.sweep_kind == RunConfig::SweepKind::Contour) {
    const auto grid = analysis::decoherence_contour(cfg.params, fb, xs, ys, cfg.threads);
    x_name = "gamma";
    y_name = "kappa";
    fid = grid.fidelities;
    n_failed = grid.failures.size();
  } else {
    const auto mode = cfg.sweep_kind == RunConfig::SweepKind::Steady
                          ? analysis::SweepMode::Steady
                          : analysis::SweepMode::FiniteTime;
    const auto grid = analysis::sweep_fidelity_2d(cfg.params, fb, cfg.sweep_x, xs, cfg.sweep_y, ys,
                                                  mode, cfg.t_finite, cfg.threads);
    x_name = grid.x_name;
    y_name = grid.y_name;
    fid = grid.fidelities;
    n_failed = grid.failures.size();
  }

  auto f_out = open_out(path);
  f_out << x_name << ',' << y_name << ",fidelity\n";
  for (Index iy = 0; iy < ys.size(); ++iy)
    for (Index ix = 0; ix < xs.size(); ++ix)
      f_out << format17(xs(ix)) << ',' << format17(ys(iy)) << ',' << format17(fid(iy, ix))
            << '\n';
  finish_out(f_out, path);

  std::ostringstream os;
  os << "sweep: " << xs.size() << "x" << ys.size() << " grid (" << x_name << " x " << y_name
     << "), " << n_failed << " failed point(s) -> " << path;
  return os.str();
}

std::string run_traj(const RunConfig& cfg, const std::string& path) {
  const FeedbackStrategy fb = config::strategy_of(cfg);
  Vec psi0 = Vec::Zero(model::kAtomDim);
  switch (cfg.init) {
    case InitState::Ket111: psi0(model::basis_index(1, 1, 1)) = 1.0; break;
    case InitState::Singlet: psi0 = model::singlet_state(); break;
    case InitState::Mixed: fail(Err::Range, "traj: init must be a pure state (111 or singlet)");
  }
  const double t_phys = cfg.t_end / cfg.params.gamma_total();
  const auto ens = dynamics::run_trajectories(cfg.params, fb, psi0, model::singlet_state(), t_phys,
                                              cfg.n_traj, cfg.seed, cfg.n_out, cfg.threads);

  auto f_out = open_out(path);
  const double unit = cfg.params.gamma_total();
  f_out << "t,mean_fidelity,mean_projection\n";
  for (Index i = 0; i < ens.times.size(); ++i)
    f_out << format17(ens.times(i) * unit) << ',' << format17(ens.mean_fidelity(i)) << ','
          << format17(ens.mean_projection(i)) << '\n';
  finish_out(f_out, path);

  const std::string jumps_path = path + ".jumps.csv";
  auto f_jumps = open_out(jumps_path);
  f_jumps << "trajectory,jumps\n";
  for (std::size_t k = 0; k < ens.jump_counts.size(); ++k)
    f_jumps << k << ',' << ens.jump_counts[k] << '\n';
  finish_out(f_jumps, jumps_path);

  std::ostringstream os;
  os << "traj: " << cfg.n_traj << " trajectories (seed " << cfg.seed << "), final F = "
     << format17(ens.mean_fidelity(ens.mean_fidelity.size() - 1)) << " -> " << path;
  return os.str();
}

std::string run_oracle(const RunConfig& cfg, const std::string& path) {
  std::ostringstream os;
  if (cfg.oracle == OracleKind::Appendix) {
    const double la = cfg.oracle_lambda_a, lb = cfg.oracle_lambda_b;
    double t_end = cfg.oracle_t_end;
    if (t_end == 0.0) {
      if (la * lb <= 0.0) fail(Err::Range, "oracle: need lambda_a*lambda_b > 0 or oracle_t_end");
      t_end = 1.25 * M_PI * cfg.oracle_delta / (la * lb);  // ~1.25 Raman periods
    }
    const auto r = dynamics::appendix_oracle(la, lb, cfg.oracle_gamma1, cfg.oracle_gamma2,
                                             cfg.oracle_delta, t_end, cfg.n_out);
    auto f_out = open_out(path);
    f_out << "t,p0_full,p1_full,pe_full,p0_eff,p1_eff\n";
    for (Index i = 0; i < r.times.size(); ++i)
      f_out << format17(r.times(i)) << ',' << format17(r.p0_full(i)) << ','
            << format17(r.p1_full(i)) << ',' << format17(r.pe_full(i)) << ','
            << format17(r.p0_eff(i)) << ',' << format17(r.p1_eff(i)) << '\n';
    finish_out(f_out, path);
    os << "oracle appendix: max_deviation=" << format17(r.max_deviation)
       << " raman_freq=" << format17(r.raman_freq_measured) << " expected="
       << format17(r.raman_freq_expected) << " -> " << path;
    return os.str();
  }

  if (cfg.oracle == OracleKind::Elimination) {
    // Cavity model vs effective model from |111>, same physical horizon.
    const FeedbackStrategy fb = config::strategy_of(cfg);
    const Generator cav = model::build_cavity_me(cfg.params, fb);
    const Generator eff = model::build_feedback_me(cfg.params, fb);
    dynamics::IntegratorOptions opt;
    opt.rtol = cfg.rtol;
    opt.atol = cfg.atol;
    opt.n_out = cfg.n_out;
    opt.threads = cfg.threads;
    const double t_phys = cfg.t_end / config::unit_rate(cfg);
    const Index m = cfg.params.n_max + 1;

    dynamics::ObservableSet obs_cav;
    obs_cav.target = model::singlet_state();
    obs_cav.mode_dim = m;
    Mat rho0c = Mat::Zero(model::kAtomDim * m, model::kAtomDim * m);
    rho0c(model::basis_index(1, 1, 1) * m, model::basis_index(1, 1, 1) * m) = 1.0;
    const auto rc = dynamics::evolve(cav, rho0c, t_phys, obs_cav, opt);

    dynamics::ObservableSet obs_eff;
    obs_eff.target = model::singlet_state();
    Mat rho0e = Mat::Zero(model::kAtomDim, model::kAtomDim);
    rho0e(model::basis_index(1, 1, 1), model::basis_index(1, 1, 1)) = 1.0;
    const auto re = dynamics::evolve(eff, rho0e, t_phys, obs_eff, opt);

    const double unit = config::unit_rate(cfg);
    auto f_out = open_out(path);
    f_out << "t,fidelity_cavity,fidelity_effective\n";
    double max_gap = 0.0;
    for (Index i = 0; i < rc.times.size(); ++i) {
      max_gap = std::max(max_gap, std::abs(rc.fidelities(i) - re.fidelities(i)));
      f_out << format17(rc.times(i) * unit) << ',' << format17(rc.fidelities(i)) << ','
            << format17(re.fidelities(i)) << '\n';
    }
    finish_out(f_out, path);
    os << "oracle elimination: max_gap=" << format17(max_gap) << " -> " << path;
    return os.str();
  }

  // FullVsEff
  const FeedbackStrategy fb = config::strategy_of(cfg);
  dynamics::IntegratorOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  opt.n_out = cfg.n_out;
  opt.threads = cfg.threads;
  const double t_end_gt =
      cfg.time_unit == TimeUnit::BigG ? cfg.t_end : cfg.t_end / config::unit_rate(cfg) * cfg.params.big_g;
  const auto r = analysis::compare_full_vs_effective(cfg.params, fb, t_end_gt, opt);
  auto f_out = open_out(path);
  f_out << "Gt,fidelity_full,fidelity_effective\n";
  for (Index i = 0; i < r.times.size(); ++i)
    f_out << format17(r.times(i)) << ',' << format17(r.fidelity_full(i)) << ','
          << format17(r.fidelity_effective(i)) << '\n';
  finish_out(f_out, path);
  os << "oracle fullvseff: max_gap=" << format17(r.max_gap) << " final_full="
     << format17(r.final_full) << " final_eff=" << format17(r.final_effective) << " -> " << path;
  return os.str();
}

}  // namespace

std::string run(const RunConfig& cfg_in, const std::string& out_override) {
  RunConfig cfg = cfg_in;
  config::finalize(cfg);
  const std::string path =
      !out_override.empty() ? out_override : (!cfg.out.empty() ? cfg.out : default_out(cfg));
  switch (cfg.mode) {
    case RunMode::Steady: return run_steady(cfg, path);
    case RunMode::Evolve: return run_evolve(cfg, path);
    case RunMode::Sweep: return run_sweep(cfg, path);
    case RunMode::Traj: return run_traj(cfg, path);
    case RunMode::Oracle: return run_oracle(cfg, path);
  }
  fail(Err::Internal, "unhandled run mode");
}

}  // namespace sfb::runner
