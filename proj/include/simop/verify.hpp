#pragma once

#include <vector>

#include "simop/weighted.hpp"

namespace simop {

// Ground truth for every estimate.  Nothing in here calls an Eigen
// decomposition; the QR sweep, the LU and the root finder are local.

struct OracleOptions {
  Index max_dim = 4096;
  int max_sweeps_per_eigenvalue = 60;
};

// Eigenvalues of a dense complex matrix: Householder reduction to
// Hessenberg form, then single-shift QR (Wilkinson shift, deflation when a
// subdiagonal drops below 1e-14 of its diagonal neighbours).
std::vector<cd> oracle_eigs(const Mat<cd>& m, const OracleOptions& opt = {});

// Second oracle for dimension <= 8: Faddeev-LeVerrier coefficients, Aberth
// iteration, Newton polishing on det(zI - M) through tr((zI - M)^{-1}).
std::vector<cd> poly_oracle_eigs(const Mat<cd>& m);

// Characteristic polynomial coefficients c_0..c_n of det(zI - M).
std::vector<cd> char_poly(const Mat<cd>& m);

// Eigenvector for an eigenvalue estimate by inverse iteration.
Vec<cd> oracle_eigvec(const Mat<cd>& m, cd lambda, int iterations = 3);

struct Pairing {
  std::vector<Index> match;  // reference i -> computed match[i]
  std::vector<double> dist;
  std::vector<bool> ambiguous;
  double max_dist = 0;
};

// Greedy nearest pairing on sorted distance, ties to the lower index.
Pairing match_spectra(const std::vector<cd>& reference, const std::vector<cd>& computed);

// Largest distance after pairing two multisets of equal size.
double multiset_distance(const std::vector<cd>& a, const std::vector<cd>& b);

struct TailSums {
  double weighted = 0;
  double plain = 0;
};

TailSums tail_weight_check(const std::vector<cd>& b, const std::vector<double>& w);

struct ProjectionComparison {
  double lhs = 0;          // ||P' - P||_Sigma, direct
  double lhs_formula = 0;  // same through (UP - PU)(I+U)^{-1}
  double rhs = 0;
  double alpha_sigma = 0;
  double u_sigma = 0;
  double u_weighted = 0;
  double lemma_lhs = 0;  // max(||U P||, ||P U||)
  double lemma_rhs = 0;  // alpha_sigma ||U||_{Q,Sigma}
  bool ok = false;
};

// sigma_basis: basis indices spanned by P.  wq: weights of Q on the base
// partition used for ||U||_{Q,Sigma}.
ProjectionComparison projection_compare(const BlockMatrix<cd>& u, const std::vector<Index>& sigma_basis,
                                        const WeightSequence<double>& wq);
ProjectionComparison projection_compare(const BlockMatrix<cd>& u, const std::vector<Index>& sigma_basis,
                                        const WeightSequence<double>& wq, double alpha_sigma);

struct SpectrumRow {
  int n = 0;
  cd lambda;
  cd estimate;
  cd p;
  cd q;
  cd oracle;
  cd b;
  double residual = 0;
  bool ambiguous = false;
};

struct SpectrumReport {
  std::vector<SpectrumRow> rows;
  double weighted_tail = 0;
  double plain_tail = 0;
  double matching_quality = 0;
};

// One row per interior index of a simple spectrum.  estimates and oracle
// are full multisets; p/q hold one value per spectrum entry, or are empty.
SpectrumReport build_spectrum_report(const Spectrum<cd>& spec, const std::vector<cd>& estimates,
                                     const std::vector<cd>& oracle, const std::vector<cd>& p, const std::vector<cd>& q,
                                     const WeightSequence<double>* w);

}  // namespace simop
