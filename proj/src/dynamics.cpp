#include "dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace sfb::dynamics {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa deviate; avoids the implementation-defined layout of
  // std::uniform_real_distribution so seeded runs are portable.
  return double(rng() >> 11) * 0x1.0p-53;
}

void check_state(const Mat& rho0, Index dim) {
  if (rho0.rows() != dim || rho0.cols() != dim)
    fail(Err::Dim, "evolve: initial state is " + std::to_string(rho0.rows()) + "x" +
                       std::to_string(rho0.cols()) + ", generator dim is " + std::to_string(dim));
  const double scale = 1.0 + rho0.cwiseAbs().maxCoeff();
  if ((rho0 - Mat(rho0.adjoint())).cwiseAbs().maxCoeff() > 1e-9 * scale)
    fail(Err::NotHermitian, "evolve: initial state is not Hermitian");
  if (std::abs(rho0.trace().real() - 1.0) > 1e-8 || std::abs(rho0.trace().imag()) > 1e-10)
    fail(Err::Range, "evolve: initial state must have unit trace");
  if (opalg::min_eigenvalue(rho0) < -1e-8)
    fail(Err::Range, "evolve: initial state is not positive semidefinite");
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double fidelity_sample(const Vec& target, const Mat& rho, Index mode_dim) {
  if (target.size() == 0) return 0.0;
  if (mode_dim > 1) {
    const Mat reduced = opalg::partial_trace_right(rho, target.size(), mode_dim);
    return std::sqrt(clamp01((target.adjoint() * reduced * target)(0, 0).real()));
  }
  return std::sqrt(clamp01((target.adjoint() * rho * target)(0, 0).real()));
}

}  // namespace

GeneratorAction::GeneratorAction(const Generator& gen, int threads) {
  if (gen.dim <= 0 || gen.hamiltonian.rows() != gen.dim || gen.hamiltonian.cols() != gen.dim)
    fail(Err::Dim, "GeneratorAction: Hamiltonian shape does not match generator dim");
  dim_ = gen.dim;

  Mat hnh = gen.hamiltonian;
  slow_scale_ = std::numeric_limits<double>::infinity();
  for (const auto& t : gen.terms) {
    if (t.rate < 0.0) fail(Err::Range, "GeneratorAction: negative channel rate");
    if (t.rate == 0.0) continue;
    if (t.op.rows() != dim_ || t.op.cols() != dim_)
      fail(Err::Dim, "GeneratorAction: channel op dimension mismatch");
    hnh -= cxd(0.0, 0.5) * t.rate * Mat(t.op.adjoint() * t.op);
    c_.push_back(std::sqrt(t.rate) * t.op);
    c_adj_.push_back(c_.back().adjoint());
    slow_scale_ = std::min(slow_scale_, t.rate);
  }
  if (!std::isfinite(slow_scale_)) slow_scale_ = 0.0;
  fast_scale_ = hnh.cwiseAbs().rowwise().sum().maxCoeff();
  hnh_ = std::move(hnh);
  hnh_adj_ = hnh_.adjoint();

  sparse_ = dim_ >= kSparseDim;
  if (sparse_) {
    auto to_sparse = [](const Mat& m) {
      SpMat s = m.sparseView(1.0, 1e-15);
      s.makeCompressed();
      return s;
    };
    s_hnh_ = to_sparse(hnh_);
    s_hnh_adj_ = to_sparse(hnh_adj_);
    for (std::size_t k = 0; k < c_.size(); ++k) {
      s_c_.push_back(to_sparse(c_[k]));
      s_c_adj_.push_back(to_sparse(c_adj_[k]));
    }
    c_.clear();
    c_adj_.clear();
    hnh_.resize(0, 0);
    hnh_adj_.resize(0, 0);

    if (threads > 1) {
      pool_ = std::make_unique<parallel::WorkerPool>(std::min<long>(threads, dim_));
      const Index nb = pool_->lanes();
      const Index bw = (dim_ + nb - 1) / nb;
      auto slice_cols = [&](const SpMat& s) {
        std::vector<SpMat> cols;
        for (Index lane = 0; lane < nb; ++lane) {
          const Index c0 = lane * bw;
          const Index cw = c0 < dim_ ? std::min(bw, dim_ - c0) : 0;
          SpMat piece = s.middleCols(std::min(c0, dim_), cw);
          piece.makeCompressed();
          cols.push_back(std::move(piece));
        }
        return cols;
      };
      s_hnh_adj_cols_ = slice_cols(s_hnh_adj_);
      for (const auto& c_adj : s_c_adj_) s_c_adj_cols_.push_back(slice_cols(c_adj));
      x_.resize(dim_, dim_);
      y_.resize(dim_, dim_);
      chan_x_.assign(s_c_.size(), Mat(dim_, dim_));
    }
  }
}

// Two-phase pooled evaluation: phase one fills X = H_nh rho (and, for the
// general case, Y = rho H_nh†) plus every c_k rho by column block; phase two
// assembles drho per block from those fully-written intermediates.
void GeneratorAction::apply_pooled(const Mat& rho, Mat& drho, bool hermitian) const {
  const cxd mi(0.0, -1.0), pi_(0.0, 1.0);
  const Index d = dim_;
  const Index nb = pool_->lanes();
  const Index bw = (d + nb - 1) / nb;

  pool_->run([&](int lane) {
    const Index c0 = Index(lane) * bw;
    if (c0 >= d) return;
    const Index cw = std::min(bw, d - c0);
    x_.middleCols(c0, cw).noalias() = s_hnh_ * rho.middleCols(c0, cw);
    if (!hermitian) y_.middleCols(c0, cw).noalias() = rho * s_hnh_adj_cols_[lane];
    for (std::size_t k = 0; k < s_c_.size(); ++k)
      chan_x_[k].middleCols(c0, cw).noalias() = s_c_[k] * rho.middleCols(c0, cw);
  });

  pool_->run([&](int lane) {
    const Index c0 = Index(lane) * bw;
    if (c0 >= d) return;
    const Index cw = std::min(bw, d - c0);
    if (hermitian)
      drho.middleCols(c0, cw) =
          mi * x_.middleCols(c0, cw) + pi_ * x_.middleRows(c0, cw).adjoint();
    else
      drho.middleCols(c0, cw) = mi * x_.middleCols(c0, cw) + pi_ * y_.middleCols(c0, cw);
    for (std::size_t k = 0; k < s_c_.size(); ++k)
      drho.middleCols(c0, cw).noalias() += chan_x_[k] * s_c_adj_cols_[k][lane];
  });
}

void GeneratorAction::apply_hermitian(const Mat& rho, Mat& drho, Mat& scratch) const {
  const cxd mi(0.0, -1.0), pi_(0.0, 1.0);
  if (pool_) {
    apply_pooled(rho, drho, /*hermitian=*/true);
    return;
  }
  if (sparse_) {
    scratch.noalias() = s_hnh_ * rho;
    drho = mi * scratch;
    drho.noalias() += pi_ * scratch.adjoint();
    for (std::size_t k = 0; k < s_c_.size(); ++k) {
      scratch.noalias() = s_c_[k] * rho;
      drho.noalias() += scratch * s_c_adj_[k];
    }
  } else {
    scratch.noalias() = hnh_ * rho;
    drho = mi * scratch;
    drho.noalias() += pi_ * scratch.adjoint();
    for (std::size_t k = 0; k < c_.size(); ++k) {
      scratch.noalias() = c_[k] * rho;
      drho.noalias() += scratch * c_adj_[k];
    }
  }
}

void GeneratorAction::apply_general(const Mat& rho, Mat& drho, Mat& scratch) const {
  const cxd mi(0.0, -1.0), pi_(0.0, 1.0);
  if (pool_) {
    apply_pooled(rho, drho, /*hermitian=*/false);
    return;
  }
  if (sparse_) {
    scratch.noalias() = s_hnh_ * rho;
    drho = mi * scratch;
    scratch.noalias() = rho * s_hnh_adj_;
    drho += pi_ * scratch;
    for (std::size_t k = 0; k < s_c_.size(); ++k) {
      scratch.noalias() = s_c_[k] * rho;
      drho.noalias() += scratch * s_c_adj_[k];
    }
  } else {
    scratch.noalias() = hnh_ * rho;
    drho = mi * scratch;
    scratch.noalias() = rho * hnh_adj_;
    drho += pi_ * scratch;
    for (std::size_t k = 0; k < c_.size(); ++k) {
      scratch.noalias() = c_[k] * rho;
      drho.noalias() += scratch * c_adj_[k];
    }
  }
}

double GeneratorAction::residual_norm(const Mat& rho) const {
  Mat drho(dim_, dim_), scratch(dim_, dim_);
  apply_hermitian(rho, drho, scratch);
  return drho.norm();
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

// Scaled squared error of one column: sum_i (|e_i| / (atol + rtol*|y|))^2.
// Column sums are accumulated serially afterwards, so the reduction order -
// and hence the accepted step sequence - never depends on the lane count.
double column_error_sq(const Mat& err, const Mat& y0, const Mat& y1, Index col, double atol,
                       double rtol) {
  double acc = 0.0;
  for (Index i = 0; i < err.rows(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0(i, col)), std::abs(y1(i, col)));
    const double e = std::abs(err(i, col)) / sc;
    acc += e * e;
  }
  return acc;
}

struct Recorder {
  const ObservableSet& obs;
  EvolutionResult& res;
  const IntegratorOptions& opt;
  int slot = 0;

  void operator()(double t, const Mat& rho) {
    res.times(slot) = t;
    res.traces(slot) = rho.trace().real();
    res.purities(slot) = rho.squaredNorm();
    res.fidelities(slot) = fidelity_sample(obs.target, rho, obs.mode_dim);
    res.min_eigs(slot) = obs.track_min_eig ? opalg::min_eigenvalue(rho) : 0.0;
    if (opt.store_states) res.states.push_back(rho);
    ++slot;
  }
};

}  // namespace

EvolutionResult evolve(const Generator& gen, const Mat& rho0, double t_end,
                       const ObservableSet& obs, const IntegratorOptions& opt) {
  if (!(t_end > 0.0)) fail(Err::Range, "evolve: t_end must be > 0");
  if (opt.n_out < 2) fail(Err::Range, "evolve: n_out must be >= 2");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) fail(Err::Range, "evolve: tolerances must be > 0");
  check_state(rho0, gen.dim);
  if (obs.target.size() != 0 && obs.target.size() * obs.mode_dim != gen.dim)
    fail(Err::Dim, "evolve: target size * mode_dim must equal generator dim");

  const GeneratorAction act(gen, opt.threads);
  const Index d = gen.dim;

  // Column-block runner for the elementwise stage updates. With a worker pool
  // present the blocks run on its lanes; otherwise the single block covers the
  // whole matrix. Each block is produced by the same scalar kernel regardless
  // of the partition, so results are bitwise independent of the lane count.
  parallel::WorkerPool* pool = act.pool();
  const Index bw = pool ? (d + pool->lanes() - 1) / pool->lanes() : d;
  const auto blocked = [&](const std::function<void(Index, Index)>& fn) {
    if (!pool) {
      fn(0, d);
      return;
    }
    pool->run([&](int lane) {
      const Index c0 = std::min(Index(lane) * bw, d);
      const Index cw = std::min(bw, d - c0);
      if (cw > 0) fn(c0, cw);
    });
  };

  EvolutionResult res;
  res.times.resize(opt.n_out);
  res.fidelities.resize(opt.n_out);
  res.traces.resize(opt.n_out);
  res.purities.resize(opt.n_out);
  res.min_eigs.resize(opt.n_out);
  Recorder record{obs, res, opt};

  Mat y = 0.5 * (rho0 + Mat(rho0.adjoint()));
  record(0.0, y);

  Mat k1(d, d), k2(d, d), k3(d, d), k4(d, d), k5(d, d), k6(d, d), k7(d, d);
  Mat ytmp(d, d), ynew(d, d), errm(d, d), scratch(d, d);
  Eigen::VectorXd col_err(d);
  act.apply_hermitian(y, k1, scratch);

  double t = 0.0;
  double h = std::min(0.1 / std::max(act.fast_scale(), 1e-30), t_end / double(opt.n_out - 1));
  const double hmin = 1e-14 * std::max(t_end, 1.0);
  const double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  double facold = 1e-4;
  bool rejected_last = false;

  for (int out = 1; out < opt.n_out; ++out) {
    const double t_target = t_end * double(out) / double(opt.n_out - 1);
    while (t < t_target - 1e-14 * t_end) {
      if (res.n_steps + res.n_rejected >= opt.max_steps)
        fail(Err::NotConverged, "evolve: step budget exhausted at t=" + std::to_string(t));
      const double hs = std::min(h, t_target - t);
      if (!std::isfinite(hs))
        fail(Err::Stiff, "evolve: step size became non-finite (non-finite generator or state)");
      const bool clamped = hs < h;

      blocked([&](Index c0, Index cw) {
        ytmp.middleCols(c0, cw) = y.middleCols(c0, cw) + (hs * kA21) * k1.middleCols(c0, cw);
      });
      act.apply_hermitian(ytmp, k2, scratch);
      blocked([&](Index c0, Index cw) {
        ytmp.middleCols(c0, cw) =
            y.middleCols(c0, cw) +
            hs * (kA31 * k1.middleCols(c0, cw) + kA32 * k2.middleCols(c0, cw));
      });
      act.apply_hermitian(ytmp, k3, scratch);
      blocked([&](Index c0, Index cw) {
        ytmp.middleCols(c0, cw) =
            y.middleCols(c0, cw) + hs * (kA41 * k1.middleCols(c0, cw) +
                                         kA42 * k2.middleCols(c0, cw) +
                                         kA43 * k3.middleCols(c0, cw));
      });
      act.apply_hermitian(ytmp, k4, scratch);
      blocked([&](Index c0, Index cw) {
        ytmp.middleCols(c0, cw) =
            y.middleCols(c0, cw) + hs * (kA51 * k1.middleCols(c0, cw) +
                                         kA52 * k2.middleCols(c0, cw) +
                                         kA53 * k3.middleCols(c0, cw) +
                                         kA54 * k4.middleCols(c0, cw));
      });
      act.apply_hermitian(ytmp, k5, scratch);
      blocked([&](Index c0, Index cw) {
        ytmp.middleCols(c0, cw) =
            y.middleCols(c0, cw) + hs * (kA61 * k1.middleCols(c0, cw) +
                                         kA62 * k2.middleCols(c0, cw) +
                                         kA63 * k3.middleCols(c0, cw) +
                                         kA64 * k4.middleCols(c0, cw) +
                                         kA65 * k5.middleCols(c0, cw));
      });
      act.apply_hermitian(ytmp, k6, scratch);
      blocked([&](Index c0, Index cw) {
        ynew.middleCols(c0, cw) =
            y.middleCols(c0, cw) + hs * (kB1 * k1.middleCols(c0, cw) +
                                         kB3 * k3.middleCols(c0, cw) +
                                         kB4 * k4.middleCols(c0, cw) +
                                         kB5 * k5.middleCols(c0, cw) +
                                         kB6 * k6.middleCols(c0, cw));
      });
      act.apply_hermitian(ynew, k7, scratch);
      blocked([&](Index c0, Index cw) {
        errm.middleCols(c0, cw) = hs * (kE1 * k1.middleCols(c0, cw) +
                                        kE3 * k3.middleCols(c0, cw) +
                                        kE4 * k4.middleCols(c0, cw) +
                                        kE5 * k5.middleCols(c0, cw) +
                                        kE6 * k6.middleCols(c0, cw) +
                                        kE7 * k7.middleCols(c0, cw));
        for (Index c = c0; c < c0 + cw; ++c)
          col_err(c) = column_error_sq(errm, y, ynew, c, opt.atol, opt.rtol);
      });
      const double err = std::sqrt(col_err.sum() / double(d * d));
      const double fac11 = std::pow(std::max(err, 1e-30), expo1);
      if (err <= 1.0) {
        t += hs;
        // Hermitize and refresh the first stage (first-same-as-last). The
        // adjoint reads ynew across all blocks, which is complete by now.
        blocked([&](Index c0, Index cw) {
          y.middleCols(c0, cw) =
              0.5 * (ynew.middleCols(c0, cw) + ynew.middleRows(c0, cw).adjoint());
          k1.middleCols(c0, cw) = k7.middleCols(c0, cw);
        });
        ++res.n_steps;
        facold = std::max(err, 1e-4);
        if (!clamped) {
          double fac = fac11 / std::pow(facold, beta);
          fac = std::max(0.1, std::min(5.0, fac / safe));
          double hnew = h / fac;
          if (rejected_last) hnew = std::min(hnew, h);
          h = hnew;
        }
        rejected_last = false;
      } else {
        const double hnew = hs / std::min(5.0, fac11 / safe);
        h = hnew;
        rejected_last = true;
        ++res.n_rejected;
        if (h < hmin) {
          std::ostringstream os;
          os << "evolve: step size collapsed at t=" << t << " (h=" << h
             << "); generator frequency/rate ratio ~ "
             << act.fast_scale() / std::max(act.slow_scale(), 1e-30);
          fail(Err::Stiff, os.str());
        }
      }
    }
    record(t_target, y);
  }
  res.final_rho = y;
  return res;
}

Mat steady_state(const Generator& gen, double tol) {
  if (gen.dim <= 27) {
    // Null-space route: costs an eigendecomposition of L†L but detects (and
    // reports) a degenerate kernel, which the boundary-parameter checks need.
    const SuperOp L = opalg::liouvillian_matrix(gen.hamiltonian, gen.terms);
    const auto basis = opalg::null_space(L, tol);
    if (basis.size() != 1)
      fail(Err::KernelDegenerate,
           "steady_state: Liouvillian kernel dimension " + std::to_string(basis.size()) +
               "; steady state is not unique");
    Mat rho = opalg::devectorize(basis[0], gen.dim);
    rho = 0.5 * (rho + Mat(rho.adjoint()));
    const double tr = rho.trace().real();
    if (std::abs(tr) < 1e-10)
      fail(Err::Internal, "steady_state: kernel vector has vanishing trace");
    rho /= tr;
    if (opalg::min_eigenvalue(rho) < -1e-8)
      fail(Err::Internal, "steady_state: kernel state is not positive semidefinite");
    return rho;
  }

  constexpr Index kDirectDimMax = 90;  // d^2 x d^2 dense superoperator, ~1 GB at d = 90
  if (gen.dim > kDirectDimMax)
    fail(Err::Dim, "steady_state: dense superoperator route capped at dim " +
                       std::to_string(kDirectDimMax) + " (got dim " + std::to_string(gen.dim) +
                       "); use steady_state_by_evolution");

  // Direct route: the generator conserves the trace, so the diagonal rows of L
  // are linearly dependent; replacing the first row with the unit-trace
  // constraint gives a nonsingular system whose solution is the fixed point
  // (assuming it is unique — a degenerate kernel surfaces as a residual
  // failure below). The LU factorization runs in place to halve peak memory.
  SuperOp L = opalg::liouvillian_matrix(gen.hamiltonian, gen.terms);
  const Index d = gen.dim;
  L.matrix.row(0).setZero();
  for (Index k = 0; k < d; ++k) L.matrix(0, k * (d + 1)) = 1.0;
  Vec rhs = Vec::Zero(d * d);
  rhs(0) = 1.0;
  Eigen::PartialPivLU<Eigen::Ref<Mat>> lu(L.matrix);
  Mat rho = opalg::devectorize(lu.solve(rhs), d);
  rho = 0.5 * (rho + Mat(rho.adjoint()));
  rho /= rho.trace().real();

  // Verify against the operator form, independently of the vectorized matrix.
  const GeneratorAction act(gen);
  const double resid = act.residual_norm(rho);
  const double bound = std::max(tol, 1e3 * std::numeric_limits<double>::epsilon()) *
                       std::max(act.fast_scale(), 1.0);
  if (!(resid < bound)) {
    std::ostringstream os;
    os << "steady_state: direct solve residual " << resid << " above " << bound
       << " (degenerate kernel or ill-conditioned generator)";
    fail(Err::NotConverged, os.str());
  }
  if (opalg::min_eigenvalue(rho) < -1e-8)
    fail(Err::Internal, "steady_state: solved state is not positive semidefinite");
  return rho;
}

Mat steady_state_by_evolution(const Generator& gen, double t_long, double tol,
                              const IntegratorOptions& opt) {
  if (!(t_long > 0.0)) fail(Err::Range, "steady_state_by_evolution: t_long must be > 0");
  if (!(tol > 0.0)) fail(Err::Range, "steady_state_by_evolution: tol must be > 0");
  const GeneratorAction act(gen, opt.threads);
  Mat rho = Mat::Identity(gen.dim, gen.dim) / double(gen.dim);
  const int n_chunks = 32;
  IntegratorOptions chunk_opt = opt;
  chunk_opt.n_out = 2;
  chunk_opt.store_states = false;
  ObservableSet silent;
  silent.track_min_eig = false;
  double residual = act.residual_norm(rho);
  for (int i = 0; i < n_chunks; ++i) {
    if (residual < tol) return rho;
    rho = evolve(gen, rho, t_long / n_chunks, silent, chunk_opt).final_rho;
    residual = act.residual_norm(rho);
  }
  if (residual < tol) return rho;
  std::ostringstream os;
  os << "steady_state_by_evolution: residual " << residual << " above tol " << tol << " after t="
     << t_long;
  fail(Err::NotConverged, os.str());
}

TrajectoryEnsemble run_trajectories(const SystemParams& p, const FeedbackStrategy& fb,
                                    const Vec& psi0, const Vec& target, double t_end, int n_traj,
                                    std::uint64_t seed, int n_out, int threads) {
  p.validate();
  if (psi0.size() != model::kAtomDim || target.size() != model::kAtomDim)
    fail(Err::Dim, "run_trajectories: states must be 27-dimensional");
  if (n_traj < 1) fail(Err::Range, "run_trajectories: n_traj must be >= 1");
  if (n_out < 2) fail(Err::Range, "run_trajectories: n_out must be >= 2");
  if (!(t_end > 0.0)) fail(Err::Range, "run_trajectories: t_end must be > 0");
  if (std::abs(psi0.norm() - 1.0) > 1e-9)
    fail(Err::Range, "run_trajectories: initial state must be normalized");

  const auto ops = model::collective_ops();
  const double gamma_jump = p.gamma_total();
  const Mat h =
      p.omega * (ops.j1_plus + ops.j1_minus + ops.j2_plus + ops.j2_minus);
  const Mat hnh = h - cxd(0.0, 0.5) * gamma_jump * Mat(ops.j1_plus * ops.j1_minus);
  const Mat& jump = ops.j1_minus;
  const Mat u_nonlocal = model::feedback_unitary_nonlocal(fb.omega_fb);
  const auto u_local = model::feedback_unitaries_local(fb.omega_fb);
  const bool kick = fb.kind != FeedbackKind::None;
  const bool local = fb.kind == FeedbackKind::LocalRandom;

  // Fixed step: first-order jump sampling wants Gamma*<J1+J1->*dt well under 1,
  // and the RK4 drift wants the coherent scale resolved.
  const double rate_scale = std::max({gamma_jump * 3.0, p.omega * 4.0, 1e-12});
  const double interval = t_end / double(n_out - 1);
  const long steps_per_interval = std::max(1L, long(std::ceil(interval * rate_scale / 0.002)));
  const double dt = interval / double(steps_per_interval);

  TrajectoryEnsemble ens;
  ens.n_traj = n_traj;
  ens.seed = seed;
  ens.times.resize(n_out);
  for (int i = 0; i < n_out; ++i) ens.times(i) = t_end * double(i) / double(n_out - 1);
  ens.jump_counts.assign(n_traj, 0);

  // Per-trajectory projection curves, combined in index order afterwards so
  // the ensemble mean does not depend on the thread partition.
  Eigen::MatrixXd proj(n_out, n_traj);

  auto run_one = [&](int k) {
    std::mt19937_64 rng(seed + std::uint64_t(k));
    Vec psi = psi0;
    Vec k1(psi.size()), k2(psi.size()), k3(psi.size()), k4(psi.size()), tmp(psi.size());
    long jumps = 0;
    proj(0, k) = std::norm(target.dot(psi));
    for (int out = 1; out < n_out; ++out) {
      for (long s = 0; s < steps_per_interval; ++s) {
        const double p_jump = gamma_jump * (jump * psi).squaredNorm() * dt;
        if (uniform01(rng) < p_jump) {
          psi = jump * psi;
          psi /= psi.norm();
          if (kick && uniform01(rng) < fb.eta) {
            if (local) {
              int site = int(uniform01(rng) * 3.0);
              if (site > 2) site = 2;
              psi = u_local[site] * psi;
            } else {
              psi = u_nonlocal * psi;
            }
          }
          ++jumps;
        } else {
          const cxd mi(0.0, -1.0);
          k1.noalias() = mi * (hnh * psi);
          tmp = psi + (0.5 * dt) * k1;
          k2.noalias() = mi * (hnh * tmp);
          tmp = psi + (0.5 * dt) * k2;
          k3.noalias() = mi * (hnh * tmp);
          tmp = psi + dt * k3;
          k4.noalias() = mi * (hnh * tmp);
          psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
          psi /= psi.norm();
        }
      }
      proj(out, k) = std::norm(target.dot(psi));
    }
    ens.jump_counts[k] = jumps;
  };

  const int n_workers = std::max(1, std::min(threads, n_traj));
  if (n_workers == 1) {
    for (int k = 0; k < n_traj; ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back([&, w] {
        for (int k = w; k < n_traj; k += n_workers) run_one(k);
      });
    for (auto& th : pool) th.join();
  }

  ens.mean_projection.resize(n_out);
  ens.mean_fidelity.resize(n_out);
  for (int i = 0; i < n_out; ++i) {
    double acc = 0.0;
    for (int k = 0; k < n_traj; ++k) acc += proj(i, k);  // fixed order: by index
    ens.mean_projection(i) = acc / double(n_traj);
    ens.mean_fidelity(i) = std::sqrt(clamp01(ens.mean_projection(i)));
  }
  return ens;
}

AppendixOracle appendix_oracle(double lambda_a, double lambda_b, double gamma1, double gamma2,
                               double delta, double t_end, int n_out) {
  if (!(delta > 0.0)) fail(Err::Range, "appendix_oracle: Delta must be > 0");
  if (!(lambda_a >= 0.0) || !(lambda_b >= 0.0) || !(gamma1 >= 0.0) || !(gamma2 >= 0.0))
    fail(Err::Range, "appendix_oracle: amplitudes and rates must be >= 0");
  if (!(t_end > 0.0)) fail(Err::Range, "appendix_oracle: t_end must be > 0");

  // Route 1: the bare three-level atom {0, 1, e}.
  Generator full;
  full.dim = 3;
  full.hamiltonian = Mat::Zero(3, 3);
  full.hamiltonian(2, 0) = lambda_a;
  full.hamiltonian(0, 2) = lambda_a;
  full.hamiltonian(2, 1) = lambda_b;
  full.hamiltonian(1, 2) = lambda_b;
  full.hamiltonian(2, 2) = -delta;
  Mat decay0 = Mat::Zero(3, 3), decay1 = Mat::Zero(3, 3);
  decay0(0, 2) = 1.0;
  decay1(1, 2) = 1.0;
  full.terms.push_back({gamma1, decay0});
  full.terms.push_back({gamma2, decay1});

  // Route 2: the excited level eliminated at large Delta.
  Generator eff;
  eff.dim = 2;
  eff.hamiltonian.resize(2, 2);
  eff.hamiltonian << lambda_a * lambda_a, lambda_a * lambda_b, lambda_a * lambda_b,
      lambda_b * lambda_b;
  eff.hamiltonian /= delta;
  Mat l0(2, 2), l1(2, 2);
  l0 << lambda_a, lambda_b, 0.0, 0.0;
  l1 << 0.0, 0.0, lambda_a, lambda_b;
  eff.terms.push_back({gamma1 / (delta * delta), l0});
  eff.terms.push_back({gamma2 / (delta * delta), l1});

  IntegratorOptions opt;
  opt.n_out = n_out;
  opt.store_states = true;
  Mat rho0_full = Mat::Zero(3, 3);
  rho0_full(0, 0) = 1.0;
  Mat rho0_eff = Mat::Zero(2, 2);
  rho0_eff(0, 0) = 1.0;
  const EvolutionResult rf = evolve(full, rho0_full, t_end, {}, opt);
  const EvolutionResult re = evolve(eff, rho0_eff, t_end, {}, opt);

  AppendixOracle out;
  out.times = rf.times;
  out.p0_full.resize(n_out);
  out.p1_full.resize(n_out);
  out.pe_full.resize(n_out);
  out.p0_eff.resize(n_out);
  out.p1_eff.resize(n_out);
  for (int i = 0; i < n_out; ++i) {
    out.p0_full(i) = rf.states[i](0, 0).real();
    out.p1_full(i) = rf.states[i](1, 1).real();
    out.pe_full(i) = rf.states[i](2, 2).real();
    out.p0_eff(i) = re.states[i](0, 0).real();
    out.p1_eff(i) = re.states[i](1, 1).real();
    out.max_deviation = std::max({out.max_deviation, std::abs(out.p0_full(i) - out.p0_eff(i)),
                                  std::abs(out.p1_full(i) - out.p1_eff(i))});
  }

  // Raman frequency from the first population peak of level 1, refined by a
  // parabola through the three samples around the discrete maximum.
  out.raman_freq_expected = 2.0 * lambda_a * lambda_b / delta;
  int im = 1;
  for (int i = 2; i < n_out - 1; ++i)
    if (out.p1_full(i) > out.p1_full(im)) im = i;
  const double dt_grid = out.times(1) - out.times(0);
  const double ym = out.p1_full(im - 1), y0 = out.p1_full(im), yp = out.p1_full(im + 1);
  const double denom = ym - 2.0 * y0 + yp;
  const double shift = std::abs(denom) > 1e-300 ? 0.5 * (ym - yp) / denom : 0.0;
  const double t_peak = out.times(im) + shift * dt_grid;
  if (t_peak > 0.0) out.raman_freq_measured = M_PI / t_peak;
  return out;
}

}  // namespace sfb::dynamics
