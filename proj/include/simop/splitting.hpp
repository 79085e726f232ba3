#pragma once

#include <array>

#include "simop/similarity.hpp"

namespace simop {

// Diagonal S with (lambda_k - lambda_j)^{-1} at every basis vector j outside
// index k and 0 on index k; on the two_part(k) partition.
BlockMatrix<cd> s_operator(const Spectrum<cd>& spec, int k);

// Projection onto the basis of index k, on the same partition as S.
BlockMatrix<cd> p_operator(const Spectrum<cd>& spec, int k);

// Gamma X = P X S - S X P
BlockMatrix<cd> gamma_via_s(const BlockMatrix<cd>& x, const BlockMatrix<cd>& s, const BlockMatrix<cd>& p);

struct SplitSystemResult {
  BlockMatrix<cd> X;
  BlockMatrix<cd> V;  // X11 + X22
  int iterations = 0;
  double certificate = 0;  // 4 s sqrt(2) ||B||_op
  std::array<double, 4> equation_residuals{};  // blocks 11, 12, 21, 22
};

// Two-block fixed point on two_part(k).  Throws contraction_violation
// unless ||B||_op < 1/(4 s sqrt 2).
SplitSystemResult split_system_solve(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol = 1e-12,
                                     int max_iter = 500);

struct Mt6Certificate {
  double s = 0;
  double b21 = 0;   // ||B21||
  double b12s = 0;  // ||B12 S||
  double m = 0;     // ||b1 S - B22 S||
  double n = 0;     // s ||B12 S|| ||B21||
  double lhs = 0;   // m + 2 sqrt(n)
  bool ok = false;      // lhs <= 1
  bool strict = false;  // lhs < 1
  double r = 0;
  double bound_e = 0;
  double bound_b2 = 0;
  // first-order expansion of r in n/(1-m)^2
  double taylor_e = 0;
  double taylor_b2 = 0;
};

Mt6Certificate mt6_certificate(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k);

struct PsiResult {
  Vec<cd> y;
  int iterations = 0;
  double max_iterate_norm = 0;
};

// y_{j+1} = Psi(y_j) from 0.  condition_violation when the certificate fails,
// not_supported on equality.
PsiResult psi_fixed_point(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol = 1e-14,
                          int max_iter = 1000);

struct SplittingResult {
  int k = 0;
  cd lambda;
  cd b1;
  cd b2;
  Vec<cd> y;
  cd lambda_prime;
  Vec<cd> e;
  Vec<cd> e_prime;
  Mt6Certificate cert;
  bool condvec_ok = false;
  int iterations = 0;
  double e_distance = 0;     // ||e - e'||
  double eigen_residual = 0; // ||(A-B)e' - lambda' e'||
  double residual_scale = 0; // ||A-B||_op ||e'||
};

SplittingResult split(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol = 1e-14,
                      int max_iter = 1000);

}  // namespace simop
