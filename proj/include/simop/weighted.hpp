#pragma once

#include <vector>

#include "simop/transforms.hpp"

namespace simop {

// Decay profile of a perturbation along its block rows and columns, indexed
// by |n| for the group labels n of the base partition.
template <typename Real>
struct WeightSequence {
  int L = 0;                      // labels range over [-L, L]
  std::vector<Real> alpha;        // [0..L]
  std::vector<Real> alpha_prime;  // [0..L+1], entry 0 unused
  std::vector<Real> alpha_tilde;  // [0..L+1], entry 0 unused
  std::vector<Real> row_tail;     // sum_{|k|>=n} ||P_k X||^2
  std::vector<Real> col_tail;     // sum_{|k|>=n} ||X P_k||^2
  Real source_norm = 0;           // ||X||_Sigma
  Real sqrt_eta = 0;
  Real edge_coupling = 0;         // alpha' contribution from one extrapolated index past the window
  bool finite_support = false;
  PartitionPtr base;

  Real a(int n) const {
    int k = n < 0 ? -n : n;
    return k <= L ? alpha[static_cast<size_t>(k)] : Real(0);
  }
};

template <typename Scalar>
struct WeightedFactorization {
  BlockMatrix<Scalar> x_left;
  BlockMatrix<Scalar> x_right;
  RealOf<Scalar> weighted_norm = 0;
};

// alpha_n(X) on the base partition ctx.part; alpha' and alpha~ use the
// couplings d_{jl} between label sets and sqrt(eta) of the context.
template <typename Scalar>
WeightSequence<RealOf<Scalar>> alpha_sequence(const BlockMatrix<Scalar>& x, const TransformContext<Scalar>& ctx);

// f(A) = sum alpha_n P_{sigma_n}
template <typename Scalar>
BlockMatrix<Scalar> weight_operator(const WeightSequence<RealOf<Scalar>>& w);

template <typename Scalar>
WeightedFactorization<Scalar> factorize(const BlockMatrix<Scalar>& x, const WeightSequence<RealOf<Scalar>>& w);

template <typename Scalar>
RealOf<Scalar> weighted_norm(const BlockMatrix<Scalar>& x, const WeightSequence<RealOf<Scalar>>& w) {
  return factorize(x, w).weighted_norm;
}

// sum_n (||X P_n||^2 + ||P_n X||^2) / alpha_n^2
template <typename Scalar>
RealOf<Scalar> weight_sum(const BlockMatrix<Scalar>& x, const WeightSequence<RealOf<Scalar>>& w);

// gamma_m = alpha~_{m+1}, m = 0..L
template <typename Real>
std::vector<Real> gamma_m_sequence(const WeightSequence<Real>& w);

struct CoarseningChoice {
  int m = 0;
  double product = 0;  // 4 gamma_m ||B||_{B,Sigma}
  double b_weighted = 0;
};

// Smallest m in [m_min, m_max] with 4 gamma_m ||B||_{B,Sigma} <= margin.
// m_max < 0 means L - 1, the last m that leaves more than one group.
template <typename Scalar>
CoarseningChoice select_coarsening(const BlockMatrix<Scalar>& b, const WeightSequence<RealOf<Scalar>>& w,
                                   double contraction_margin, int m_min = 0, int m_max = -1);

}  // namespace simop
