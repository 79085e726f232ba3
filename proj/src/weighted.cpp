#include "simop/weighted.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace simop {

namespace {

template <typename Scalar>
Mat<RealOf<Scalar>> block_norms_squared(const BlockMatrix<Scalar>& x, const Partition& p) {
  using Real = RealOf<Scalar>;
  const Index G = p.groups();
  Mat<Real> out = Mat<Real>::Zero(G, G);
  const auto& m = x.dense();
  if (G == p.dim()) return m.cwiseAbs2();
  for (Index g = 0; g < G; ++g)
    for (Index h = 0; h < G; ++h) {
      const auto& rg = p.members(g);
      const auto& ch = p.members(h);
      if (rg.size() == 1 || ch.size() == 1) {
        Real s = 0;
        for (Index i : rg)
          for (Index j : ch) s += std::norm(m(i, j));
        out(g, h) = s;
      } else {
        Mat<Scalar> b = m(rg, ch);
        Real s = block_spectral_norm<Scalar>(b);
        out(g, h) = s * s;
      }
    }
  return out;
}

// Distinct eigenvalues of the union of groups carrying each label.
template <typename Scalar>
std::map<int, std::vector<Scalar>> label_values(const TransformContext<Scalar>& ctx) {
  std::map<int, std::vector<Scalar>> out;
  const Partition& p = *ctx.part;
  for (Index g = 0; g < p.groups(); ++g) {
    auto& v = out[p.label(g)];
    for (Index i : p.members(g))
      if (std::find(v.begin(), v.end(), ctx.eig(i)) == v.end()) v.push_back(ctx.eig(i));
  }
  return out;
}

template <typename Scalar>
RealOf<Scalar> d_between(const std::vector<Scalar>& sj, const std::vector<Scalar>& sl) {
  using Real = RealOf<Scalar>;
  Real best = 0;
  for (const Scalar& mu : sl) {
    Real s = 0;
    for (const Scalar& nu : sj) {
      Real dd = std::abs(nu - mu);
      s += 1 / (dd * dd);
    }
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

}  // namespace

template <typename Scalar>
WeightSequence<RealOf<Scalar>> alpha_sequence(const BlockMatrix<Scalar>& x, const TransformContext<Scalar>& ctx) {
  using Real = RealOf<Scalar>;
  const Partition& p = *ctx.part;
  if (!x.partition().refines(p)) throw Error(ErrorKind::partition_mismatch, "matrix is not on the weight partition");

  WeightSequence<Real> w;
  w.base = ctx.part;
  for (Index g = 0; g < p.groups(); ++g) w.L = std::max(w.L, std::abs(p.label(g)));
  const int L = w.L;

  Mat<Real> bn2 = block_norms_squared(x, p);
  const Real total = bn2.sum();
  if (!(total > 0)) throw Error(ErrorKind::invalid_input, "weights of the zero matrix are undefined");
  w.source_norm = std::sqrt(total);

  std::vector<Real> row(static_cast<size_t>(L) + 1, 0), col(static_cast<size_t>(L) + 1, 0);
  for (Index g = 0; g < p.groups(); ++g) {
    size_t k = static_cast<size_t>(std::abs(p.label(g)));
    row[k] += bn2.row(g).sum();
    col[k] += bn2.col(g).sum();
  }
  w.row_tail.assign(static_cast<size_t>(L) + 1, 0);
  w.col_tail.assign(static_cast<size_t>(L) + 1, 0);
  Real rt = 0, ct = 0;
  for (int n = L; n >= 0; --n) {
    rt += row[static_cast<size_t>(n)];
    ct += col[static_cast<size_t>(n)];
    w.row_tail[static_cast<size_t>(n)] = rt;
    w.col_tail[static_cast<size_t>(n)] = ct;
  }
  w.alpha.assign(static_cast<size_t>(L) + 1, 0);
  const Real pref = 1 / std::sqrt(w.source_norm);
  for (int n = 0; n <= L; ++n) {
    Real r = std::max(w.row_tail[static_cast<size_t>(n)], Real(0));
    Real c = std::max(w.col_tail[static_cast<size_t>(n)], Real(0));
    w.alpha[static_cast<size_t>(n)] = std::min(Real(1), pref * std::max(std::sqrt(std::sqrt(r)), std::sqrt(std::sqrt(c))));
    if (w.alpha[static_cast<size_t>(n)] == 0) w.finite_support = true;
  }

  auto vals = label_values(ctx);
  std::vector<int> labels;
  for (const auto& kv : vals) labels.push_back(kv.first);
  const size_t nl = labels.size();
  Mat<Real> dsym = Mat<Real>::Zero(static_cast<Index>(nl), static_cast<Index>(nl));
  for (size_t a = 0; a < nl; ++a)
    for (size_t b = 0; b < nl; ++b)
      if (a != b) {
        Real djl = d_between(vals[labels[a]], vals[labels[b]]);
        Real dlj = d_between(vals[labels[b]], vals[labels[a]]);
        dsym(static_cast<Index>(a), static_cast<Index>(b)) = std::max(djl, dlj);
      }

  w.alpha_prime.assign(static_cast<size_t>(L) + 2, 0);
  for (int n = 0; n < L; ++n) {
    Real best = 0;
    for (size_t a = 0; a < nl; ++a) {
      if (std::abs(labels[a]) > n) continue;
      Real al = w.a(labels[a]);
      for (size_t b = 0; b < nl; ++b)
        if (std::abs(labels[b]) > n) best = std::max(best, al * dsym(static_cast<Index>(a), static_cast<Index>(b)));
    }
    w.alpha_prime[static_cast<size_t>(n) + 1] = best;
  }

  // One index past each edge, extrapolated linearly from the last two.
  for (int sgn : {-1, 1}) {
    auto it1 = vals.find(sgn * L), it0 = vals.find(sgn * (L - 1));
    if (L < 1 || it1 == vals.end() || it0 == vals.end()) continue;
    std::vector<Scalar> ext;
    for (size_t i = 0; i < it1->second.size() && i < it0->second.size(); ++i)
      ext.push_back(Scalar(2) * it1->second[i] - it0->second[i]);
    for (size_t a = 0; a < nl; ++a)
      w.edge_coupling = std::max(w.edge_coupling, w.a(labels[a]) * d_between(ext, vals[labels[a]]));
  }

  auto cert = gamma_norm_certificates(ctx);
  w.sqrt_eta = cert.first;
  w.alpha_tilde.assign(static_cast<size_t>(L) + 2, 0);
  for (int n = 1; n <= L + 1; ++n)
    w.alpha_tilde[static_cast<size_t>(n)] = w.sqrt_eta * w.a(n) + w.alpha_prime[static_cast<size_t>(n)];
  return w;
}

template <typename Scalar>
BlockMatrix<Scalar> weight_operator(const WeightSequence<RealOf<Scalar>>& w) {
  const Partition& p = *w.base;
  Vec<Scalar> f(p.dim());
  for (Index i = 0; i < p.dim(); ++i) f(i) = Scalar(w.a(p.label(p.group_of(i))));
  return BlockMatrix<Scalar>(w.base, f.asDiagonal());
}

template <typename Scalar>
WeightedFactorization<Scalar> factorize(const BlockMatrix<Scalar>& x, const WeightSequence<RealOf<Scalar>>& w) {
  using Real = RealOf<Scalar>;
  const Partition& p = *w.base;
  if (x.dim() != p.dim()) throw Error(ErrorKind::partition_mismatch, "weights and matrix disagree in dimension");
  Vec<Scalar> inv(p.dim());
  for (Index i = 0; i < p.dim(); ++i) {
    Real a = w.a(p.label(p.group_of(i)));
    if (!(a > 0))
      throw Error(ErrorKind::degenerate_weight, "weight vanishes on a group; the weighted space is not available",
                  {{"label", p.label(p.group_of(i))}});
    inv(i) = Scalar(1 / a);
  }
  WeightedFactorization<Scalar> out{BlockMatrix<Scalar>(w.base, x.dense() * inv.asDiagonal()),
                                    BlockMatrix<Scalar>(w.base, inv.asDiagonal() * x.dense()), 0};
  out.weighted_norm = std::max(sigma_norm(out.x_left), sigma_norm(out.x_right));
  return out;
}

template <typename Scalar>
RealOf<Scalar> weight_sum(const BlockMatrix<Scalar>& x, const WeightSequence<RealOf<Scalar>>& w) {
  using Real = RealOf<Scalar>;
  const Partition& p = *w.base;
  Mat<Real> bn2 = block_norms_squared(x, p);
  Real s = 0;
  for (Index g = 0; g < p.groups(); ++g) {
    Real a = w.a(p.label(g));
    Real mass = bn2.row(g).sum() + bn2.col(g).sum();
    if (mass == 0) continue;
    if (!(a > 0)) throw Error(ErrorKind::degenerate_weight, "weight vanishes where the matrix does not");
    s += mass / (a * a);
  }
  return s;
}

template <typename Real>
std::vector<Real> gamma_m_sequence(const WeightSequence<Real>& w) {
  std::vector<Real> g(static_cast<size_t>(w.L) + 1);
  for (int m = 0; m <= w.L; ++m) g[static_cast<size_t>(m)] = w.alpha_tilde[static_cast<size_t>(m) + 1];
  return g;
}

template <typename Scalar>
CoarseningChoice select_coarsening(const BlockMatrix<Scalar>& b, const WeightSequence<RealOf<Scalar>>& w,
                                   double contraction_margin, int m_min, int m_max) {
  if (!(contraction_margin > 0 && contraction_margin < 1))
    throw Error(ErrorKind::invalid_input, "contraction margin must lie in (0,1)", {{"margin", contraction_margin}});
  const double nb = static_cast<double>(weighted_norm(b, w));
  auto gam = gamma_m_sequence(w);
  CoarseningChoice best{-1, std::numeric_limits<double>::infinity(), nb};
  const int last = m_max < 0 ? w.L - 1 : std::min(m_max, w.L - 1);
  for (int m = std::max(0, m_min); m <= last; ++m) {
    double prod = 4.0 * static_cast<double>(gam[static_cast<size_t>(m)]) * nb;
    if (prod < best.product) best = {m, prod, nb};
    if (prod <= contraction_margin) return {m, prod, nb};
  }
  throw Error(ErrorKind::window_too_small, "no coarsening in the window meets the contraction condition",
              {{"best_product", best.product}, {"best_m", best.m}, {"margin", contraction_margin}});
}

template WeightSequence<double> alpha_sequence(const BlockMatrix<cd>&, const TransformContext<cd>&);
template BlockMatrix<cd> weight_operator<cd>(const WeightSequence<double>&);
template WeightedFactorization<cd> factorize(const BlockMatrix<cd>&, const WeightSequence<double>&);
template double weight_sum(const BlockMatrix<cd>&, const WeightSequence<double>&);
template std::vector<double> gamma_m_sequence(const WeightSequence<double>&);
template CoarseningChoice select_coarsening(const BlockMatrix<cd>&, const WeightSequence<double>&, double, int, int);

}  // namespace simop
