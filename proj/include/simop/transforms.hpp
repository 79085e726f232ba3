#pragma once

#include <utility>

#include "simop/opmatrix.hpp"

namespace simop {

// The pair (A, Sigma): basis-level eigenvalues of the diagonal free
// operator together with the grouping that J and Gamma respect.
template <typename Scalar>
struct TransformContext {
  Vec<Scalar> eig;
  PartitionPtr part;

  static TransformContext from(const Spectrum<Scalar>& s, PartitionPtr p) {
    if (p->dim() != s.dim()) throw Error(ErrorKind::partition_mismatch, "partition and spectrum disagree in dimension");
    return {s.diagonal(), std::move(p)};
  }
  Index dim() const { return eig.size(); }
  Mat<Scalar> a_dense() const { return eig.asDiagonal(); }
};

// Keeps the diagonal blocks of ctx.part; idempotent.
template <typename Scalar>
BlockMatrix<Scalar> apply_J(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x);

// Entrywise X_ij / (lambda_i - lambda_j) across groups, zero within a group.
template <typename Scalar>
BlockMatrix<Scalar> apply_Gamma(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x);

// || A (Gamma X) - (Gamma X) A - (X - J X) ||_hs
template <typename Scalar>
RealOf<Scalar> commutator_residual(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x);

// d_{j l}: sup over eigenvalues of group l of the root-sum over group j of
// inverse-square gaps.  Groups are indices into ctx.part.
template <typename Scalar>
RealOf<Scalar> coupling_d(const TransformContext<Scalar>& ctx, Index j, Index l);

// sqrt(eta) and 1/delta over the distinct eigenvalues of the context.
template <typename Scalar>
std::pair<RealOf<Scalar>, RealOf<Scalar>> gamma_norm_certificates(const TransformContext<Scalar>& ctx);

// Largest 1/|lambda_i - lambda_j| over pairs in different groups: the exact
// norm of Gamma_Sigma on the Hilbert-Schmidt class.
template <typename Scalar>
RealOf<Scalar> gamma_hs_bound(const TransformContext<Scalar>& ctx);

}  // namespace simop
