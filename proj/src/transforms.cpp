#include "simop/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace simop {

namespace {

template <typename Scalar>
void require_refines(const BlockMatrix<Scalar>& x, const Partition& p) {
  if (!x.partition().refines(p))
    throw Error(ErrorKind::partition_mismatch, "operand is not on a partition finer than the context");
}

template <typename Scalar>
std::vector<Scalar> distinct_values(const Vec<Scalar>& eig) {
  std::vector<Scalar> out;
  for (Index i = 0; i < eig.size(); ++i)
    if (std::find(out.begin(), out.end(), eig(i)) == out.end()) out.push_back(eig(i));
  return out;
}

}  // namespace

template <typename Scalar>
BlockMatrix<Scalar> apply_J(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x) {
  require_refines(x, *ctx.part);
  const auto& g = ctx.part->group_of_vector();
  const Index d = x.dim();
  Mat<Scalar> y = Mat<Scalar>::Zero(d, d);
  const auto& m = x.dense();
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i)
      if (g[static_cast<size_t>(i)] == g[static_cast<size_t>(j)]) y(i, j) = m(i, j);
  return BlockMatrix<Scalar>(ctx.part, std::move(y));
}

template <typename Scalar>
BlockMatrix<Scalar> apply_Gamma(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x) {
  require_refines(x, *ctx.part);
  const auto& g = ctx.part->group_of_vector();
  const Index d = x.dim();
  Mat<Scalar> y(d, d);
  const auto& m = x.dense();
  for (Index j = 0; j < d; ++j) {
    const Index gj = g[static_cast<size_t>(j)];
    const Scalar lj = ctx.eig(j);
    for (Index i = 0; i < d; ++i)
      y(i, j) = g[static_cast<size_t>(i)] == gj ? Scalar(0) : m(i, j) / (ctx.eig(i) - lj);
  }
  return BlockMatrix<Scalar>(ctx.part, std::move(y));
}

template <typename Scalar>
RealOf<Scalar> commutator_residual(const TransformContext<Scalar>& ctx, const BlockMatrix<Scalar>& x) {
  auto gx = apply_Gamma(ctx, x);
  auto jx = apply_J(ctx, x);
  Mat<Scalar> lhs = ctx.eig.asDiagonal() * gx.dense() - gx.dense() * ctx.eig.asDiagonal();
  return (lhs - (x.dense() - jx.dense())).norm();
}

template <typename Scalar>
RealOf<Scalar> coupling_d(const TransformContext<Scalar>& ctx, Index j, Index l) {
  using Real = RealOf<Scalar>;
  if (j == l) throw Error(ErrorKind::invalid_input, "coupling_d needs two different groups");
  Vec<Scalar> ej(ctx.part->group_dim(j)), el(ctx.part->group_dim(l));
  for (Index a = 0; a < ej.size(); ++a) ej(a) = ctx.eig(ctx.part->members(j)[static_cast<size_t>(a)]);
  for (Index a = 0; a < el.size(); ++a) el(a) = ctx.eig(ctx.part->members(l)[static_cast<size_t>(a)]);
  auto lj = distinct_values(ej);
  auto ll = distinct_values(el);
  Real best = 0;
  for (const Scalar& mu : ll) {
    Real s = 0;
    for (const Scalar& nu : lj) {
      Real dd = std::abs(nu - mu);
      s += 1 / (dd * dd);
    }
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

template <typename Scalar>
std::pair<RealOf<Scalar>, RealOf<Scalar>> gamma_norm_certificates(const TransformContext<Scalar>& ctx) {
  using Real = RealOf<Scalar>;
  auto vals = distinct_values(ctx.eig);
  if (vals.size() < 2) throw Error(ErrorKind::invalid_input, "need at least two distinct eigenvalues");
  Real eta = 0;
  Real delta = std::numeric_limits<Real>::infinity();
  for (size_t a = 0; a < vals.size(); ++a) {
    Real s = 0;
    for (size_t b = 0; b < vals.size(); ++b) {
      if (a == b) continue;
      Real dd = std::abs(vals[a] - vals[b]);
      s += 1 / (dd * dd);
      delta = std::min(delta, dd);
    }
    eta = std::max(eta, s);
  }
  return {std::sqrt(eta), 1 / delta};
}

template <typename Scalar>
RealOf<Scalar> gamma_hs_bound(const TransformContext<Scalar>& ctx) {
  using Real = RealOf<Scalar>;
  const auto& g = ctx.part->group_of_vector();
  Real best = 0;
  for (Index i = 0; i < ctx.dim(); ++i)
    for (Index j = i + 1; j < ctx.dim(); ++j)
      if (g[static_cast<size_t>(i)] != g[static_cast<size_t>(j)])
        best = std::max(best, Real(1) / std::abs(ctx.eig(i) - ctx.eig(j)));
  return best;
}

template BlockMatrix<cd> apply_J(const TransformContext<cd>&, const BlockMatrix<cd>&);
template BlockMatrix<cd> apply_Gamma(const TransformContext<cd>&, const BlockMatrix<cd>&);
template double commutator_residual(const TransformContext<cd>&, const BlockMatrix<cd>&);
template double coupling_d(const TransformContext<cd>&, Index, Index);
template std::pair<double, double> gamma_norm_certificates(const TransformContext<cd>&);
template double gamma_hs_bound(const TransformContext<cd>&);

}  // namespace simop
