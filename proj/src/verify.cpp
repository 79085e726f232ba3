#include "simop/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace simop {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Complex Givens rotation with real cosine: [c s; -conj(s) c] [a; b] = [r; 0].
void givens(cd a, cd b, double& c, cd& s, cd& r) {
  double aa = std::abs(a), bb = std::abs(b);
  if (bb == 0) {
    c = 1;
    s = 0;
    r = a;
    return;
  }
  if (aa == 0) {
    c = 0;
    s = std::conj(b) / bb;
    r = bb;
    return;
  }
  double nrm = std::hypot(aa, bb);
  cd phase = a / aa;
  c = aa / nrm;
  s = phase * std::conj(b) / nrm;
  r = phase * nrm;
}

void hessenberg_reduce(Mat<cd>& h) {
  const Index n = h.rows();
  for (Index k = 0; k + 2 < n; ++k) {
    const Index len = n - k - 1;
    Vec<cd> v = h.col(k).segment(k + 1, len);
    double alpha = v.norm();
    if (alpha == 0) continue;
    cd x0 = v(0);
    cd phase = std::abs(x0) == 0 ? cd(1) : x0 / std::abs(x0);
    v(0) += phase * alpha;
    double vn = v.norm();
    if (vn == 0) continue;
    v /= vn;
    Mat<cd> rows = h.bottomRows(len);
    Eigen::Matrix<cd, 1, Eigen::Dynamic> vr = v.adjoint() * rows;
    h.bottomRows(len) -= 2.0 * v * vr;
    Vec<cd> vc = h.rightCols(len) * v;
    h.rightCols(len) -= 2.0 * vc * v.adjoint();
    for (Index i = k + 2; i < n; ++i) h(i, k) = 0;
  }
}

void qr_sweep(Mat<cd>& h, Index l, Index hi, cd mu) {
  for (Index i = l; i <= hi; ++i) h(i, i) -= mu;
  const Index steps = hi - l;
  std::vector<double> cs(static_cast<size_t>(steps));
  std::vector<cd> sn(static_cast<size_t>(steps));
  for (Index k = l; k < hi; ++k) {
    double c;
    cd s, r;
    givens(h(k, k), h(k + 1, k), c, s, r);
    cs[static_cast<size_t>(k - l)] = c;
    sn[static_cast<size_t>(k - l)] = s;
    h(k, k) = r;
    h(k + 1, k) = 0;
    for (Index j = k + 1; j <= hi; ++j) {
      cd t1 = h(k, j), t2 = h(k + 1, j);
      h(k, j) = c * t1 + s * t2;
      h(k + 1, j) = -std::conj(s) * t1 + c * t2;
    }
  }
  for (Index k = l; k < hi; ++k) {
    double c = cs[static_cast<size_t>(k - l)];
    cd s = sn[static_cast<size_t>(k - l)];
    for (Index i = l; i <= k + 1; ++i) {
      cd t1 = h(i, k), t2 = h(i, k + 1);
      h(i, k) = c * t1 + std::conj(s) * t2;
      h(i, k + 1) = -s * t1 + c * t2;
    }
  }
  for (Index i = l; i <= hi; ++i) h(i, i) += mu;
}

struct LU {
  Mat<cd> a;
  std::vector<Index> piv;
};

LU lu_factor(Mat<cd> a) {
  const Index n = a.rows();
  LU f{std::move(a), std::vector<Index>(static_cast<size_t>(n))};
  const double floor = kEps * std::max(1.0, f.a.cwiseAbs().maxCoeff());
  for (Index k = 0; k < n; ++k) {
    Index p = k;
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(f.a(i, k)) > std::abs(f.a(p, k))) p = i;
    f.piv[static_cast<size_t>(k)] = p;
    if (p != k) f.a.row(k).swap(f.a.row(p));
    if (std::abs(f.a(k, k)) < floor) f.a(k, k) = floor;
    for (Index i = k + 1; i < n; ++i) {
      cd m = f.a(i, k) / f.a(k, k);
      f.a(i, k) = m;
      for (Index j = k + 1; j < n; ++j) f.a(i, j) -= m * f.a(k, j);
    }
  }
  return f;
}

Vec<cd> lu_solve(const LU& f, Vec<cd> b) {
  const Index n = f.a.rows();
  for (Index k = 0; k < n; ++k) std::swap(b(k), b(f.piv[static_cast<size_t>(k)]));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) b(i) -= f.a(i, j) * b(j);
  for (Index i = n - 1; i >= 0; --i) {
    for (Index j = i + 1; j < n; ++j) b(i) -= f.a(i, j) * b(j);
    b(i) /= f.a(i, i);
  }
  return b;
}

void horner(const std::vector<cd>& c, cd z, cd& p, cd& dp) {
  const size_t n = c.size() - 1;
  p = c[n];
  dp = 0;
  for (size_t k = n; k-- > 0;) {
    dp = dp * z + p;
    p = p * z + c[k];
  }
}

}  // namespace

std::vector<cd> oracle_eigs(const Mat<cd>& m, const OracleOptions& opt) {
  const Index n = m.rows();
  if (m.cols() != n) throw Error(ErrorKind::invalid_input, "oracle needs a square matrix");
  if (n > opt.max_dim)
    throw Error(ErrorKind::invalid_input, "matrix exceeds the oracle dimension cap",
                {{"dim", static_cast<double>(n)}, {"cap", static_cast<double>(opt.max_dim)}});
  if (n == 0) return {};
  if (!m.allFinite()) throw Error(ErrorKind::oracle_failure, "oracle input has non-finite entries");

  Mat<cd> h = m;
  hessenberg_reduce(h);
  const double anorm = std::max(h.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::vector<cd> ev(static_cast<size_t>(n));
  Index hi = n - 1;
  int iter = 0;
  while (hi >= 0) {
    Index l = hi;
    while (l > 0) {
      double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      double sub = std::abs(h(l, l - 1));
      if (sub <= 1e-14 * s || sub <= kEps * anorm) {
        h(l, l - 1) = 0;
        break;
      }
      --l;
    }
    if (l == hi) {
      ev[static_cast<size_t>(hi)] = h(hi, hi);
      --hi;
      iter = 0;
      continue;
    }
    if (++iter > opt.max_sweeps_per_eigenvalue)
      throw Error(ErrorKind::oracle_failure, "QR iteration did not converge",
                  {{"active_row", static_cast<double>(hi)}, {"subdiagonal", std::abs(h(hi, hi - 1))}});
    cd mu;
    if (iter % 11 == 0) {
      // exceptional shift
      double t = std::abs(h(hi, hi - 1)) + (hi - 1 > l ? std::abs(h(hi - 1, hi - 2)) : 0.0);
      mu = h(hi, hi) + cd(0.75 * t, 0.4 * t);
    } else {
      cd a = h(hi - 1, hi - 1), b = h(hi - 1, hi), c = h(hi, hi - 1), d = h(hi, hi);
      cd half = 0.5 * (a - d);
      cd disc = std::sqrt(half * half + b * c);
      cd e1 = 0.5 * (a + d) + disc, e2 = 0.5 * (a + d) - disc;
      mu = std::abs(e1 - d) < std::abs(e2 - d) ? e1 : e2;
    }
    qr_sweep(h, l, hi, mu);
  }
  return ev;
}

std::vector<cd> char_poly(const Mat<cd>& m) {
  const Index n = m.rows();
  std::vector<cd> c(static_cast<size_t>(n) + 1, 0);
  c[static_cast<size_t>(n)] = 1;
  Mat<cd> mk = Mat<cd>::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    mk = m * mk;
    mk.diagonal().array() += c[static_cast<size_t>(n - k + 1)];
    c[static_cast<size_t>(n - k)] = -(m * mk).trace() / static_cast<double>(k);
  }
  return c;
}

std::vector<cd> poly_oracle_eigs(const Mat<cd>& m) {
  const Index n = m.rows();
  if (m.cols() != n || n > 8) throw Error(ErrorKind::invalid_input, "polynomial oracle handles square dimension <= 8");
  if (n == 0) return {};
  auto c = char_poly(m);
  if (n == 1) return {-c[0]};

  double radius = 0;
  for (Index k = 1; k <= n; ++k)
    radius = std::max(radius, std::pow(std::abs(c[static_cast<size_t>(n - k)]), 1.0 / static_cast<double>(k)));
  radius = 2 * radius + 1e-3;
  std::vector<cd> z(static_cast<size_t>(n));
  const double pi = std::acos(-1.0);
  for (Index i = 0; i < n; ++i) z[static_cast<size_t>(i)] = std::polar(radius, 2 * pi * static_cast<double>(i) / static_cast<double>(n) + 0.4);

  for (int it = 0; it < 1000; ++it) {
    double worst = 0;
    for (Index i = 0; i < n; ++i) {
      cd p, dp;
      cd& zi = z[static_cast<size_t>(i)];
      horner(c, zi, p, dp);
      if (p == cd(0)) continue;
      cd ratio = p / dp;
      cd sum = 0;
      for (Index j = 0; j < n; ++j)
        if (j != i) sum += 1.0 / (zi - z[static_cast<size_t>(j)]);
      cd w = ratio / (1.0 - ratio * sum);
      zi -= w;
      worst = std::max(worst, std::abs(w) / std::max(1.0, std::abs(zi)));
    }
    if (worst < 4 * kEps) break;
  }

  // Newton on det(zI - M): f'/f = tr((zI - M)^{-1}).
  for (auto& zi : z) {
    for (int it = 0; it < 4; ++it) {
      Mat<cd> r = -m;
      r.diagonal().array() += zi;
      LU f = lu_factor(r);
      cd tr = 0;
      for (Index i = 0; i < n; ++i) {
        Vec<cd> e = Vec<cd>::Unit(n, i);
        tr += lu_solve(f, e)(i);
      }
      if (!std::isfinite(std::abs(tr)) || tr == cd(0)) break;
      cd step = 1.0 / tr;
      if (std::abs(step) > 1e-3 * (1 + std::abs(zi))) break;
      zi -= step;
      if (std::abs(step) <= kEps * std::max(1.0, std::abs(zi))) break;
    }
  }
  return z;
}

Vec<cd> oracle_eigvec(const Mat<cd>& m, cd lambda, int iterations) {
  const Index n = m.rows();
  Mat<cd> r = m;
  const double scale = std::max(1.0, std::abs(lambda));
  r.diagonal().array() -= lambda + cd(1e-10 * scale, 0);
  LU f = lu_factor(r);
  Vec<cd> x(n);
  for (Index i = 0; i < n; ++i) x(i) = cd(1.0, 0.1 * static_cast<double>(i % 7));
  x.normalize();
  for (int it = 0; it < iterations; ++it) {
    x = lu_solve(f, x);
    double nx = x.norm();
    if (!(nx > 0) || !std::isfinite(nx)) throw Error(ErrorKind::oracle_failure, "inverse iteration broke down");
    x /= nx;
  }
  return x;
}

Pairing match_spectra(const std::vector<cd>& reference, const std::vector<cd>& computed) {
  const size_t n = reference.size();
  if (computed.size() != n)
    throw Error(ErrorKind::invalid_input, "spectra to pair have different sizes",
                {{"reference", static_cast<double>(n)}, {"computed", static_cast<double>(computed.size())}});
  std::vector<std::tuple<double, size_t, size_t>> pairs;
  pairs.reserve(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) pairs.emplace_back(std::abs(reference[i] - computed[j]), i, j);
  std::sort(pairs.begin(), pairs.end());
  Pairing out;
  out.match.assign(n, -1);
  out.dist.assign(n, 0);
  out.ambiguous.assign(n, false);
  std::vector<bool> used(n, false);
  size_t assigned = 0;
  for (const auto& [d, i, j] : pairs) {
    if (assigned == n) break;
    if (out.match[i] >= 0 || used[j]) continue;
    out.match[i] = static_cast<Index>(j);
    out.dist[i] = d;
    used[j] = true;
    ++assigned;
  }
  for (size_t i = 0; i < n; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) nearest = std::min(nearest, std::abs(reference[i] - computed[j]));
    out.ambiguous[i] = out.dist[i] > nearest + 1e-12 * (1 + nearest);
    out.max_dist = std::max(out.max_dist, out.dist[i]);
  }
  return out;
}

double multiset_distance(const std::vector<cd>& a, const std::vector<cd>& b) {
  return match_spectra(a, b).max_dist;
}

TailSums tail_weight_check(const std::vector<cd>& b, const std::vector<double>& w) {
  if (w.size() != b.size()) throw Error(ErrorKind::invalid_input, "weights and sequence differ in length");
  TailSums t;
  for (size_t i = 0; i < b.size(); ++i) {
    double s = std::norm(b[i]);
    t.plain += s;
    t.weighted += s * w[i];
  }
  return t;
}

ProjectionComparison projection_compare(const BlockMatrix<cd>& u, const std::vector<Index>& sigma_basis,
                                        const WeightSequence<double>& wq) {
  const Partition& base = *wq.base;
  double a = 0;
  std::vector<bool> seen(static_cast<size_t>(base.groups()), false);
  for (Index i : sigma_basis) {
    Index g = base.group_of(i);
    if (seen[static_cast<size_t>(g)]) continue;
    seen[static_cast<size_t>(g)] = true;
    a = std::max(a, wq.a(base.label(g)));
  }
  return projection_compare(u, sigma_basis, wq, a);
}

ProjectionComparison projection_compare(const BlockMatrix<cd>& u, const std::vector<Index>& sigma_basis,
                                        const WeightSequence<double>& wq, double alpha_sigma) {
  const Index d = u.dim();
  BlockMatrix<cd> uu = u.with_partition(wq.base);
  Vec<cd> pd = Vec<cd>::Zero(d);
  for (Index i : sigma_basis) pd(i) = 1;
  BlockMatrix<cd> p(wq.base, pd.asDiagonal());
  BlockMatrix<cd> inv = solve_shift(uu);
  BlockMatrix<cd> ipu = BlockMatrix<cd>::identity(wq.base) + uu;

  ProjectionComparison r;
  r.alpha_sigma = alpha_sigma;
  BlockMatrix<cd> pp = ipu * p * inv;
  r.lhs = sigma_norm(pp - p);
  r.lhs_formula = sigma_norm((uu * p - p * uu) * inv);
  r.u_sigma = sigma_norm(uu);
  r.u_weighted = weighted_norm(uu, wq);
  r.lemma_lhs = std::max(sigma_norm(uu * p), sigma_norm(p * uu));
  r.lemma_rhs = alpha_sigma * r.u_weighted;
  if (r.u_sigma < 1) {
    r.rhs = 2 * r.u_weighted * alpha_sigma / (1 - r.u_sigma);
  } else if (wq.base->groups() == wq.base->dim()) {
    r.rhs = 2 * r.u_weighted * alpha_sigma * op_norm<cd>(inv.dense());
  } else {
    r.rhs = std::numeric_limits<double>::infinity();
    r.ok = false;
    return r;
  }
  r.ok = r.lhs <= r.rhs + 1e-12;
  return r;
}

SpectrumReport build_spectrum_report(const Spectrum<cd>& spec, const std::vector<cd>& estimates,
                                     const std::vector<cd>& oracle, const std::vector<cd>& p, const std::vector<cd>& q,
                                     const WeightSequence<double>* w) {
  const auto entries = static_cast<size_t>(spec.size());
  if ((!p.empty() && p.size() != entries) || (!q.empty() && q.size() != entries))
    throw Error(ErrorKind::invalid_input, "p and q need one value per spectrum entry",
                {{"entries", static_cast<double>(entries)}, {"p", static_cast<double>(p.size())},
                 {"q", static_cast<double>(q.size())}});
  std::vector<cd> ref;
  std::vector<int> label;
  std::vector<Index> entry_of;
  for (Index e = 0; e < spec.size(); ++e)
    for (int j = 0; j < spec.entry(e).mult; ++j) {
      ref.push_back(spec.entry(e).lambda);
      label.push_back(spec.entry(e).index);
      entry_of.push_back(e);
    }
  Pairing pe = match_spectra(ref, estimates);
  Pairing po = match_spectra(ref, oracle);
  const int nint = spec.window().interior();
  SpectrumReport rep;
  for (size_t i = 0; i < ref.size(); ++i) {
    if (std::abs(label[i]) > nint) continue;
    SpectrumRow row;
    row.n = label[i];
    row.lambda = ref[i];
    row.estimate = estimates[static_cast<size_t>(pe.match[i])];
    row.oracle = oracle[static_cast<size_t>(po.match[i])];
    size_t e = static_cast<size_t>(entry_of[i]);
    if (!p.empty()) row.p = p[e];
    if (!q.empty()) row.q = q[e];
    row.b = row.lambda - row.oracle;
    row.residual = std::abs(row.estimate - row.oracle);
    row.ambiguous = pe.ambiguous[i] || po.ambiguous[i];
    rep.matching_quality = std::max({rep.matching_quality, pe.dist[i], po.dist[i]});
    double s = std::norm(row.b);
    rep.plain_tail += s;
    if (w) {
      double a = w->a(row.n);
      rep.weighted_tail += a > 0 ? s / (a * a) : std::numeric_limits<double>::infinity();
    } else {
      rep.weighted_tail += s;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace simop
