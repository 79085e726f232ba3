#pragma once

#include <cmath>
#include <random>

#include "simop/models.hpp"
#include "simop/opmatrix.hpp"

namespace testutil {

using simop::cd;
using simop::Index;
using simop::Mat;

inline const double kPi = std::acos(-1.0);

inline Mat<cd> random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat<cd> m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = cd(nd(rng), nd(rng));
  return m;
}

// lambda_k = 2 pi i k on [-N, N]
inline simop::Spectrum<cd> periodic(int N, double frac = 0.5) {
  return simop::models::first_derivative_spectrum(0.0, simop::TruncationWindow{N, frac});
}

// the s+t kernel on [-N, N]
inline simop::BlockMatrix<cd> kernel_b(const simop::Spectrum<cd>& s) {
  return simop::models::integral_perturbation(s, simop::models::kernel_sum_coefficients(s.window().N));
}

// Spectrum from an explicit list; indices 0..n-1, no symmetry requirement.
inline simop::Spectrum<cd> listed(const std::vector<cd>& lambdas) {
  std::vector<simop::Spectrum<cd>::Entry> e;
  for (size_t i = 0; i < lambdas.size(); ++i) e.push_back({static_cast<int>(i), lambdas[i], 1});
  return simop::Spectrum<cd>(std::move(e), simop::TruncationWindow{static_cast<int>(lambdas.size()), 1.0});
}

}  // namespace testutil
