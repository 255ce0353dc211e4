#include "opalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sfb::opalg {

namespace {

void require_square(const Mat& a, const char* what) {
  if (a.rows() != a.cols())
    fail(Err::Dim, std::string(what) + ": matrix is " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + ", expected square");
}

void require_same_dim(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(Err::Dim, std::string(what) + ": dimension mismatch " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
}

}  // namespace

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat dag(const Mat& a) { return a.adjoint(); }

Mat commutator(const Mat& h, const Mat& rho) {
  require_square(h, "commutator");
  require_same_dim(h, rho, "commutator");
  return h * rho - rho * h;
}

Mat anticommutator(const Mat& a, const Mat& b) {
  require_square(a, "anticommutator");
  require_same_dim(a, b, "anticommutator");
  return a * b + b * a;
}

Mat dissipator(const Mat& c, const Mat& rho) {
  require_square(c, "dissipator");
  require_same_dim(c, rho, "dissipator");
  Mat cdc = c.adjoint() * c;
  return c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
}

Vec vectorize(const Mat& rho) {
  require_square(rho, "vectorize");
  return Eigen::Map<const Vec>(rho.data(), rho.size());
}

Mat devectorize(const Vec& v, Index d) {
  if (v.size() != d * d)
    fail(Err::Dim, "devectorize: vector length " + std::to_string(v.size()) +
                       " is not dim^2 = " + std::to_string(d * d));
  return Eigen::Map<const Mat>(v.data(), d, d);
}

namespace {

// out += scale * kron(a, b), accumulating block by block. Avoids materializing
// the d^2 x d^2 Kronecker product (which dominates memory at large dims) and
// skips zero blocks, which most model operators are full of.
void kron_acc(Mat& out, cxd scale, const Mat& a, const Mat& b) {
  const Index br = b.rows(), bc = b.cols();
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) {
      const cxd w = scale * a(i, j);
      if (w != cxd(0.0, 0.0)) out.block(i * br, j * bc, br, bc) += w * b;
    }
}

}  // namespace

SuperOp liouvillian_matrix(const Mat& h, const std::vector<LindbladTerm>& terms) {
  require_square(h, "liouvillian_matrix");
  const Index d = h.rows();
  if (d == 0) fail(Err::Dim, "liouvillian_matrix: empty Hamiltonian");
  const Mat id = Mat::Identity(d, d);
  const cxd mi(0.0, -1.0);

  SuperOp L;
  L.dim = d;
  L.matrix = Mat::Zero(d * d, d * d);
  kron_acc(L.matrix, mi, id, h);
  kron_acc(L.matrix, -mi, h.transpose(), id);
  for (const auto& t : terms) {
    require_square(t.op, "liouvillian_matrix: channel op");
    require_same_dim(t.op, h, "liouvillian_matrix: channel op");
    if (t.rate < 0.0) fail(Err::Range, "liouvillian_matrix: negative channel rate");
    if (t.rate == 0.0) continue;
    const Mat cdc = t.op.adjoint() * t.op;
    kron_acc(L.matrix, t.rate, t.op.conjugate(), t.op);
    kron_acc(L.matrix, -0.5 * t.rate, id, cdc);
    kron_acc(L.matrix, -0.5 * t.rate, cdc.transpose(), id);
  }
  return L;
}

std::vector<Vec> null_space(const SuperOp& L, double tol) {
  if (L.dim <= 0 || L.matrix.rows() != L.dim * L.dim || L.matrix.cols() != L.dim * L.dim)
    fail(Err::Dim, "null_space: superoperator shape does not match dim");
  if (tol <= 0.0) fail(Err::Range, "null_space: tol must be positive");

  Mat m = L.matrix.adjoint() * L.matrix;
  m = 0.5 * (m + Mat(m.adjoint()));  // clean up round-off asymmetry
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) fail(Err::Internal, "null_space: eigensolver failed");
  const RVec& lam = es.eigenvalues();  // ascending
  const double sigma_max = std::sqrt(std::max(lam(lam.size() - 1), 0.0));

  // Candidates: singular-value estimate below both an absolute and a
  // noise-floor-relative cutoff; each one is then confirmed by its residual.
  const double scan_cut = std::max(100.0 * tol, 1e-7 * sigma_max);
  std::vector<Vec> basis;
  for (Index i = 0; i < lam.size(); ++i) {
    const double sigma_est = std::sqrt(std::max(lam(i), 0.0));
    if (sigma_est > scan_cut) break;
    Vec v = es.eigenvectors().col(i);
    const double residual = (L.matrix * v).norm();
    if (residual < tol) basis.push_back(std::move(v));
  }
  if (basis.empty()) {
    std::ostringstream os;
    os << "null_space: no kernel vector at tol=" << tol << " (smallest residual estimate "
       << std::sqrt(std::max(lam(0), 0.0)) << ")";
    fail(Err::KernelNone, os.str());
  }
  return basis;
}

std::pair<RVec, Mat> herm_eig(const Mat& a) {
  require_square(a, "herm_eig");
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  const double asym = (a - Mat(a.adjoint())).cwiseAbs().maxCoeff();
  if (asym > kHermTol * scale)
    fail(Err::NotHermitian,
         "herm_eig: matrix is not Hermitian (max |a - a†| = " + std::to_string(asym) + ")");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + Mat(a.adjoint())));
  if (es.info() != Eigen::Success) fail(Err::Internal, "herm_eig: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

Mat expi_herm(const Mat& a, double scale) {
  auto [lam, v] = herm_eig(a);
  Vec phases(lam.size());
  for (Index i = 0; i < lam.size(); ++i) phases(i) = std::exp(cxd(0.0, -scale * lam(i)));
  return v * phases.asDiagonal() * v.adjoint();
}

Mat partial_trace_right(const Mat& rho, Index d_left, Index d_right) {
  if (rho.rows() != d_left * d_right || rho.cols() != d_left * d_right)
    fail(Err::Dim, "partial_trace_right: matrix is " + std::to_string(rho.rows()) + "x" +
                       std::to_string(rho.cols()) + ", expected " +
                       std::to_string(d_left * d_right) + " square");
  Mat out = Mat::Zero(d_left, d_left);
  for (Index i = 0; i < d_left; ++i)
    for (Index j = 0; j < d_left; ++j)
      for (Index m = 0; m < d_right; ++m) out(i, j) += rho(i * d_right + m, j * d_right + m);
  return out;
}

double min_eigenvalue(const Mat& herm) {
  require_square(herm, "min_eigenvalue");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (herm + Mat(herm.adjoint())),
                                        Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(Err::Internal, "min_eigenvalue: eigensolver failed");
  return es.eigenvalues()(0);
}

}  // namespace sfb::opalg
