#pragma once

#include <cstdint>
#include <map>
#include <utility>

#include "simop/opmatrix.hpp"

namespace simop::models {

// Fourier data of a function on [0,1]: k -> hat v(k).  Missing keys are 0.
using Coeffs = std::map<int, cd>;
// Kernel data: (m, n) -> hat K(m, n).
using Coeffs2 = std::map<std::pair<int, int>, cd>;

cd coeff(const Coeffs& c, int k);

// lambda_k = pi i (2k - theta); theta = 0 gives 2 pi i k.
Spectrum<cd> first_derivative_spectrum(double theta, const TruncationWindow& w);

// hat K for K(s,t) = s + t over |m|, |n| <= N.
Coeffs2 kernel_sum_coefficients(int N);

// Entry (m, n) = hat K(-m, n), on the trivial partition of spec.
BlockMatrix<cd> integral_perturbation(const Spectrum<cd>& spec, const Coeffs2& khat);

// Fourier coefficient k of v(t) e^{2 pi i theta t}; exact for finite data.
cd tilde_coeff(const Coeffs& v, double theta, int k);

// Entry (m, n) = e^{-i pi theta} tilde v(m + n).
BlockMatrix<cd> involution_perturbation(const Spectrum<cd>& spec, const Coeffs& v, double theta);

// p_n = e^{-i pi theta} tilde v(2n)
cd involution_p(const Coeffs& v, double theta, int n);
// q_n = sum_{l != n, |l| <= N} e^{-2 pi i theta} tilde v(l+n)^2 / (2 pi i (l - n))
cd involution_q(const Coeffs& v, double theta, int n, int N);

struct InvolutionInequality {
  double lhs = 0;    // window sum over |m|, |n| <= W
  double rhs = 0;    // (9/4) ||v||^4
  double slack = 0;  // bound on the terms outside the window
  bool ok = false;
};

// (1/4pi^2) sum_{m,n} |sum_{l != n} v(l+m) v(l+n)/(l-n)|^2 against (9/4)||v||^4.
InvolutionInequality involution_inequality(const Coeffs& v, int W);

struct DiracModel {
  Spectrum<cd> spec;   // lambda_n = 2 pi n, multiplicity 2
  BlockMatrix<cd> b;
  BlockMatrix<cd> b_tilde;
  Coeffs u2;  // coefficients of v2 e^{ig}
  Coeffs u3;  // coefficients of v3 e^{-ig}
};

// Block (m, n) = [[v1(n-m), v2(-m-n)], [v3(m+n), v4(m-n)]] in the basis
// (e_n^1, e_n^2).  grid_points: power of two, >= 4N.
DiracModel build_dirac(const Coeffs& v1, const Coeffs& v2, const Coeffs& v3, const Coeffs& v4,
                       const TruncationWindow& w, int grid_points);

// g(t) for the gauge transform, from the coefficients of v1 + v4.
cd dirac_g(const Coeffs& v1, const Coeffs& v4, double t);

// lambda_n = (pi (2n - theta))^2, theta in (0,1).
Spectrum<cd> hill_spectrum(double theta, const TruncationWindow& w);
// Entry (m, n) = hat v(m - n).
BlockMatrix<cd> hill_perturbation(const Spectrum<cd>& spec, const Coeffs& v);
// q_n = (1/4pi^2) sum_{l != n, |l| <= N} v(n-l) v(l-n) / ((l-n)(l+n-theta))
cd hill_q(const Coeffs& v, double theta, int n, int N);

// Random real trigonometric polynomial of the given degree:
// hat v(-k) = conj hat v(k), components uniform in [-scale, scale].
Coeffs random_real_trig(int degree, std::uint64_t seed, double scale = 1.0);

// Closed-form splitting bounds for the s+t kernel at index k, in the form
// they are usually quoted (k = 0 uses ||B21|| = 1/(2 pi)).
struct KernelSplitDisplay {
  double bound_e = 0;
  double bound_b2 = 0;
};
KernelSplitDisplay kernel_split_display(int k);

// Bound on alpha_n(B) for the s+t kernel: (3 / (7 pi^2 (n-1)))^{1/4}, n > 1.
// The one-sided constant 14 in place of 7 is too small (alpha_2 ~ 0.409).
double kernel_alpha_bound(int n);

}  // namespace simop::models
