#pragma once

// Deterministic random test fixtures (no reliance on global srand state).

#include <random>

#include "../src/opalg.hpp"

namespace testutil {

using sfb::cxd;
using sfb::Index;
using sfb::Mat;
using sfb::Vec;

inline double u01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline Mat random_mat(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = cxd(2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0);
  return m;
}

inline Mat random_herm(Index d, std::uint64_t seed) {
  const Mat a = random_mat(d, d, seed);
  return 0.5 * (a + Mat(a.adjoint()));
}

inline Mat random_density(Index d, std::uint64_t seed) {
  const Mat a = random_mat(d, d, seed);
  Mat rho = a * a.adjoint();
  rho /= rho.trace().real();
  return rho;
}

inline Vec random_ket(Index d, std::uint64_t seed) {
  Vec v = random_mat(d, 1, seed);
  return v / v.norm();
}

}  // namespace testutil
