#include "simop/splitting.hpp"

#include <cmath>

namespace simop {

namespace {

Index basis_of(const Spectrum<cd>& spec, int k) {
  Index p = spec.position(k);
  if (p < 0) throw Error(ErrorKind::invalid_input, "split index outside the window", {{"k", k}});
  if (spec.entry(p).mult != 1)
    throw Error(ErrorKind::invalid_input, "splitting needs a simple eigenvalue", {{"k", k}, {"mult", spec.entry(p).mult}});
  return spec.offset(p);
}

struct Pieces {
  Index i;
  cd lambda;
  Vec<cd> sdiag;
  cd b1;
  Vec<cd> b21;         // Q B e
  Vec<cd> b12s;        // row of P B Q S, as a column
  Mat<cd> b22s;        // Q B Q S
  double s;
};

Pieces pieces(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k) {
  Pieces p;
  p.i = basis_of(spec, k);
  const Mat<cd>& m = b.dense();
  Vec<cd> lam = spec.diagonal();
  p.lambda = lam(p.i);
  const Index d = lam.size();
  p.sdiag = Vec<cd>::Zero(d);
  p.s = 0;
  for (Index j = 0; j < d; ++j)
    if (j != p.i) {
      p.sdiag(j) = 1.0 / (p.lambda - lam(j));
      p.s = std::max(p.s, std::abs(p.sdiag(j)));
    }
  p.b1 = m(p.i, p.i);
  p.b21 = m.col(p.i);
  p.b21(p.i) = 0;
  p.b12s = m.row(p.i).transpose().cwiseProduct(p.sdiag);
  Mat<cd> q = m;
  q.row(p.i).setZero();
  q.col(p.i).setZero();
  p.b22s = q * p.sdiag.asDiagonal();
  return p;
}

}  // namespace

BlockMatrix<cd> s_operator(const Spectrum<cd>& spec, int k) {
  Index i = basis_of(spec, k);
  Vec<cd> lam = spec.diagonal();
  Vec<cd> s = Vec<cd>::Zero(lam.size());
  for (Index j = 0; j < lam.size(); ++j)
    if (j != i) s(j) = 1.0 / (lam(i) - lam(j));
  return BlockMatrix<cd>(two_part_partition(spec, k), s.asDiagonal());
}

BlockMatrix<cd> p_operator(const Spectrum<cd>& spec, int k) {
  Index i = basis_of(spec, k);
  Mat<cd> p = Mat<cd>::Zero(spec.dim(), spec.dim());
  p(i, i) = 1;
  return BlockMatrix<cd>(two_part_partition(spec, k), p);
}

BlockMatrix<cd> gamma_via_s(const BlockMatrix<cd>& x, const BlockMatrix<cd>& s, const BlockMatrix<cd>& p) {
  auto xx = x.with_partition(s.partition_ptr());
  return p * xx * s - s * xx * p;
}

SplitSystemResult split_system_solve(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol,
                                     int max_iter) {
  auto part = two_part_partition(spec, k);
  auto ctx = TransformContext<cd>::from(spec, part);
  auto s = s_operator(spec, k);
  const double sn = op_norm<cd>(s.dense());
  StageSpace space{StageNorm::op, sn * std::sqrt(2.0), std::nullopt};
  auto fp = fixed_point(b.with_partition(part), ctx, space, {tol, max_iter, false});

  SplitSystemResult r;
  r.X = fp.X;
  r.V = apply_J(ctx, fp.X);
  r.iterations = fp.iterations;
  r.certificate = fp.certificate;

  // plug back through P X S - S X P, block by block
  auto p = p_operator(spec, k);
  auto bb = b.with_partition(part);
  auto q = BlockMatrix<cd>::identity(part) - p;
  auto j = [&](const BlockMatrix<cd>& x) { return p * x * p + q * x * q; };
  auto g = gamma_via_s(fp.X, s, p);
  auto bg = bb * g;
  auto phi = bg - g * j(bb) - g * j(bg) + bb;
  auto defect = phi - fp.X;
  r.equation_residuals = {hs_norm(p * defect * p), hs_norm(p * defect * q), hs_norm(q * defect * p),
                          hs_norm(q * defect * q)};
  return r;
}

Mt6Certificate mt6_certificate(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k) {
  auto pc = pieces(spec, b, k);
  Mt6Certificate c;
  c.s = pc.s;
  c.b21 = pc.b21.norm();
  c.b12s = pc.b12s.norm();
  Mat<cd> mm = pc.b1 * Mat<cd>(pc.sdiag.asDiagonal()) - pc.b22s;
  c.m = op_norm<cd>(mm);
  c.n = c.s * c.b12s * c.b21;
  c.lhs = c.m + 2 * std::sqrt(c.n);
  c.ok = c.lhs <= 1;
  c.strict = c.lhs < 1;
  if (c.ok) {
    double om = 1 - c.m;
    double disc = std::max(0.0, om * om - 4 * c.n);
    c.r = 2 / (om + std::sqrt(disc));
    c.bound_e = c.s * c.r * c.b21;
    c.bound_b2 = c.r * c.b12s * c.b21;
  }
  if (c.m < 1) {
    double om = 1 - c.m;
    double corr = 1 + c.n / (om * om);
    c.taylor_e = c.s * c.b21 / om * corr;
    c.taylor_b2 = c.b12s * c.b21 / om * corr;
  }
  return c;
}

PsiResult psi_fixed_point(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol, int max_iter) {
  auto c = mt6_certificate(spec, b, k);
  if (!c.ok)
    throw Error(ErrorKind::condition_violation, "m + 2 sqrt(n) <= 1 fails", {{"lhs", c.lhs}, {"rhs", 1.0}, {"m", c.m}, {"n", c.n}});
  if (!c.strict)
    throw Error(ErrorKind::not_supported, "equality case needs a Browder-type argument", {{"lhs", c.lhs}, {"rhs", 1.0}});
  auto pc = pieces(spec, b, k);
  PsiResult r;
  r.y = Vec<cd>::Zero(pc.sdiag.size());
  if (c.b21 == 0) {
    r.iterations = 0;
    return r;
  }
  Mat<cd> lin = pc.b1 * Mat<cd>(pc.sdiag.asDiagonal()) - pc.b22s;
  for (int it = 1; it <= max_iter; ++it) {
    Vec<cd> sy = pc.sdiag.cwiseProduct(r.y);
    cd coupling = pc.b12s.transpose() * r.y;  // <B12 S y, e>
    Vec<cd> yn = lin * r.y - coupling * sy + pc.b21;
    double step = (yn - r.y).norm();
    r.y = std::move(yn);
    r.iterations = it;
    r.max_iterate_norm = std::max(r.max_iterate_norm, r.y.norm());
    if (step <= tol * c.b21) return r;
  }
  throw Error(ErrorKind::non_convergence, "Psi iteration hit the cap", {{"iterations", max_iter}});
}

SplittingResult split(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int k, double tol, int max_iter) {
  SplittingResult r;
  r.k = k;
  r.cert = mt6_certificate(spec, b, k);
  auto psi = psi_fixed_point(spec, b, k, tol, max_iter);
  auto pc = pieces(spec, b, k);
  r.lambda = pc.lambda;
  r.b1 = pc.b1;
  r.y = psi.y;
  r.iterations = psi.iterations;
  r.b2 = pc.b12s.transpose() * psi.y;
  r.lambda_prime = r.lambda - r.b1 + r.b2;
  const Index d = spec.dim();
  r.e = Vec<cd>::Unit(d, pc.i);
  r.e_prime = r.e - pc.sdiag.cwiseProduct(psi.y);
  r.e_distance = (r.e - r.e_prime).norm();
  r.condvec_ok = r.cert.strict;
  Mat<cd> amb = spec.dense() - b.dense();
  r.eigen_residual = (amb * r.e_prime - r.lambda_prime * r.e_prime).norm();
  r.residual_scale = op_norm<cd>(amb) * r.e_prime.norm();
  return r;
}

}  // namespace simop
