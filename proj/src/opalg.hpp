#pragma once

// Dense complex linear algebra for open-system work: Kronecker embeddings,
// column-stacking vectorization, Liouvillian assembly, kernel extraction and
// Hermitian eigen-decompositions. Everything is dense MatrixXcd; callers that
// need sparsity convert on their side.

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace sfb {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

// One Lindblad channel: rate * D[op], D[c]rho = c rho c† - 1/2 {c†c, rho}.
struct LindbladTerm {
  double rate = 0.0;
  Mat op;
};

// Matrix representation of a Liouvillian acting on vec(rho), column-stacked.
struct SuperOp {
  Index dim = 0;  // Hilbert-space dimension d; matrix is d^2 x d^2
  Mat matrix;
};

namespace opalg {

inline constexpr double kHermTol = 1e-10;

Mat kron(const Mat& a, const Mat& b);
Mat dag(const Mat& a);
Mat commutator(const Mat& h, const Mat& rho);
Mat anticommutator(const Mat& a, const Mat& b);
Mat dissipator(const Mat& c, const Mat& rho);

// Column stacking: vec(rho)(i + d*j) = rho(i, j), so vec(A rho B) =
// (B^T ⊗ A) vec(rho).
Vec vectorize(const Mat& rho);
Mat devectorize(const Vec& v, Index d);

// L = -i(I⊗H - H^T⊗I) + sum_k rate_k [ conj(c)⊗c - 1/2 I⊗(c†c) - 1/2 (c†c)^T⊗I ].
SuperOp liouvillian_matrix(const Mat& h, const std::vector<LindbladTerm>& terms);

// Orthonormal basis of { v : ||L v|| < tol }, found by eigen-decomposing L†L
// and verifying each small-eigenvalue candidate by its explicit residual
// ||L v|| (the eigenvalues of L†L themselves bottom out at the solver's noise
// floor ~eps*||L||^2, which can exceed tol^2). Throws KernelNone if empty.
std::vector<Vec> null_space(const SuperOp& L, double tol = 1e-9);

// Ascending eigenvalues + eigenvector columns of a Hermitian matrix. Throws
// NotHermitian if max|a - a†| exceeds kHermTol * (1 + max|a|).
std::pair<RVec, Mat> herm_eig(const Mat& a);

// exp(-i * scale * a) for Hermitian a, via herm_eig.
Mat expi_herm(const Mat& a, double scale = 1.0);

// Trace out the trailing tensor factor: rho on H_left ⊗ H_right -> H_left.
Mat partial_trace_right(const Mat& rho, Index d_left, Index d_right);

double min_eigenvalue(const Mat& herm);

}  // namespace opalg
}  // namespace sfb
