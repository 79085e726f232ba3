#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simop/weighted.hpp"

namespace simop {

enum class StageNorm { hs, sigma, weighted, op };

const char* to_string(StageNorm k);

// The normed space a fixed point runs in, with the bound gamma of Gamma on it.
struct StageSpace {
  StageNorm kind = StageNorm::hs;
  double gamma = 0;
  std::optional<WeightSequence<double>> weights;  // for the weighted space

  double norm(const BlockMatrix<cd>& x) const;
};

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 200;
  bool zero_diag = false;  // three-term map, needs J(Bq) = 0
};

struct FixedPointResult {
  BlockMatrix<cd> X;
  int iterations = 0;
  double contraction_q = 0;  // largest measured successive-difference ratio
  double certificate = 0;    // 4 gamma ||Bq|| (3 gamma ||Bq|| for the three-term map)
  double b_norm = 0;
  double ball_ratio = 0;     // ||X - Bq|| / (3 ||Bq||)
  double fixed_point_residual = 0;
  double diag_identity_residual = 0;  // ||JX - J(B Gamma X) - JB||_hs
  std::vector<double> ratios;
};

// Phi(X) = B Gamma X - (Gamma X)(J B) - (Gamma X) J(B Gamma X) + B
BlockMatrix<cd> phi_step(const BlockMatrix<cd>& x, const BlockMatrix<cd>& bq, const TransformContext<cd>& ctx);
// Phi(X) = B Gamma X - (Gamma X) J(B Gamma X) + B, for J(Bq) = 0.
BlockMatrix<cd> phi_step_zero_diag(const BlockMatrix<cd>& x, const BlockMatrix<cd>& bq,
                                   const TransformContext<cd>& ctx);

// X_0 = 0, X_{j+1} = Phi(X_j).  Throws contraction_violation when the
// certificate is >= 1 and non_convergence past max_iter.
FixedPointResult fixed_point(const BlockMatrix<cd>& bq, const TransformContext<cd>& ctx, const StageSpace& space,
                             const FixedPointOptions& opt = {});

struct Preliminary {
  int m = 0;
  BlockMatrix<cd> gamma_b;  // Gamma_m B
  BlockMatrix<cd> jm_b;     // J_m B
  BlockMatrix<cd> b0;
  double gamma_b_op = 0;
  double residual = 0;  // ||(A-B)(I+Gamma_m B) - (I+Gamma_m B)(A - J_m B - B0)||_hs
};

// Transform I + Gamma_m B on the given coarse context.
Preliminary preliminary_transform(const BlockMatrix<cd>& b, const TransformContext<cd>& ctx);

// Smallest m in [m_min, N_int] with ||Gamma_m B||_op < 1 on coarse(m).
Preliminary choose_preliminary(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int m_min = 0);

struct PipelineOptions {
  double tol = 1e-12;
  int max_iter = 200;
  double contraction_margin = 0.99;
};

struct StageReport {
  std::string name;
  std::string space;
  int coarsening = -1;
  double gamma = 0;
  double b_norm = 0;
  double certificate = 0;
  double contraction_q = 0;
  int iterations = 0;
  double ball_ratio = 0;
  double diag_identity_residual = 0;
  double residual = 0;
  std::string note;
};

struct SimilarityResult {
  std::string pipeline;
  BlockMatrix<cd> U;
  BlockMatrix<cd> V;  // on the stage partition
  BlockMatrix<cd> X_star;
  int m = -1;
  int k = -1;
  int iterations = 0;
  double contraction_q = 0;
  double residual_similarity = 0;
  double residual_similarity_interior = 0;
  double residual_offdiag_V = 0;
  double scale = 0;  // ||A||_op + ||B||_hs
  std::vector<StageReport> stages;
};

// p_n = (J_0 B)_nn, q_n = (J_0(B Gamma_0 B))_nn, c_n = b_n - p_n - q_n with
// b_n from the oracle (left empty when no oracle data is given).
struct AsymptoticSequences {
  std::vector<int> n;
  std::vector<cd> p;
  std::vector<cd> q;
  std::vector<cd> c;
};

SimilarityResult pipeline_mt1(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});
SimilarityResult pipeline_mt2(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});
// Weighted space on coarse(m) with gamma_m from the weights of B.
SimilarityResult pipeline_mt12(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});
SimilarityResult pipeline_mt3(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});
// Stage 1 as mt3, then rediagonalise A - J_m B and run stage 2 on the new basis.
SimilarityResult pipeline_mt4(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});
// mt1, mt2, mt12, mt3 in order; the first whose condition holds runs.
SimilarityResult pipeline_auto(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt = {});

AsymptoticSequences asymptotic_sequences(const Spectrum<cd>& spec, const BlockMatrix<cd>& b);

struct ResidualPair {
  double full = 0;
  double interior = 0;
};

// ||(A-B)(I+U) - (I+U)(A-V)||_hs on the whole window and on interior rows/columns.
ResidualPair similarity_residual(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const BlockMatrix<cd>& u,
                                 const BlockMatrix<cd>& v);

// hs norm of V outside the diagonal blocks of its partition.
double offdiag_residual(const BlockMatrix<cd>& v);

// Eigenvalues of A - V, one diagonal block at a time.
std::vector<cd> block_eigenvalues(const Spectrum<cd>& spec, const BlockMatrix<cd>& v);

}  // namespace simop
