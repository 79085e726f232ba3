#include "simop/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace simop {

const char* to_string(StageNorm k) {
  switch (k) {
    case StageNorm::hs: return "hs";
    case StageNorm::sigma: return "hs_sigma";
    case StageNorm::weighted: return "weighted";
    case StageNorm::op: return "op";
  }
  return "unknown";
}

double StageSpace::norm(const BlockMatrix<cd>& x) const {
  switch (kind) {
    case StageNorm::hs: return hs_norm(x);
    case StageNorm::sigma: return sigma_norm(x);
    case StageNorm::weighted:
      if (!weights) throw Error(ErrorKind::invalid_input, "weighted space without weights");
      return weighted_norm(x, *weights);
    case StageNorm::op: return op_norm<cd>(x.dense());
  }
  return 0;
}

namespace {

BlockMatrix<cd> on(const BlockMatrix<cd>& x, const TransformContext<cd>& ctx) {
  if (x.partition_ptr() == ctx.part) return x;
  if (!x.partition().refines(*ctx.part))
    throw Error(ErrorKind::partition_mismatch, "operand is not on a partition finer than the context");
  return x.with_partition(ctx.part);
}

std::vector<Index> interior_basis(const Spectrum<cd>& spec) {
  std::vector<Index> out;
  const int ni = spec.window().interior();
  for (Index p = 0; p < spec.size(); ++p)
    if (std::abs(spec.entry(p).index) <= ni)
      for (int j = 0; j < spec.entry(p).mult; ++j) out.push_back(spec.offset(p) + j);
  return out;
}

void finalize(SimilarityResult& r, const Spectrum<cd>& spec, const BlockMatrix<cd>& b) {
  auto res = similarity_residual(spec, b, r.U, r.V);
  r.residual_similarity = res.full;
  r.residual_similarity_interior = res.interior;
  r.residual_offdiag_V = offdiag_residual(r.V);
  r.scale = spec.diagonal().cwiseAbs().maxCoeff() + hs_norm(b);
}

StageReport report_of(const std::string& name, const StageSpace& space, int coarsening, const FixedPointResult& fp) {
  StageReport s;
  s.name = name;
  s.space = to_string(space.kind);
  s.coarsening = coarsening;
  s.gamma = space.gamma;
  s.b_norm = fp.b_norm;
  s.certificate = fp.certificate;
  s.contraction_q = fp.contraction_q;
  s.iterations = fp.iterations;
  s.ball_ratio = fp.ball_ratio;
  s.diag_identity_residual = fp.diag_identity_residual;
  s.residual = fp.fixed_point_residual;
  return s;
}

bool zero_diagonal(const BlockMatrix<cd>& b, const TransformContext<cd>& ctx) {
  return hs_norm(apply_J(ctx, on(b, ctx))) == 0.0;
}

struct Stage2 {
  FixedPointResult fp;
  TransformContext<cd> ctx;
  int k = 0;
  StageReport report;
  cd shift = 0;
};

// Fixed point for the perturbation q of diag(eig), coarse(k) with
// k_min <= k <= k_max.  A scalar c I is peeled off q first: it shifts the
// fixed point by c I and leaves Gamma X unchanged.  Weighted space first;
// the plain Hilbert-Schmidt space (gamma = exact norm of Gamma on
// coarse(k)) when the weights degenerate or no k fits.
Stage2 run_stage2(const Vec<cd>& eig, const std::vector<int>& labels, const std::vector<int>& mults,
                  const BlockMatrix<cd>& q, int k_min, int k_max, const PipelineOptions& opt) {
  auto triv = std::make_shared<Partition>(Partition::trivial(labels, mults));
  TransformContext<cd> ctx_t{eig, triv};
  BlockMatrix<cd> qt = q.with_partition(triv);
  const cd shift = qt.dense().diagonal().mean();
  qt.dense().diagonal().array() -= shift;
  FixedPointOptions fo{opt.tol, opt.max_iter, false};
  auto finish = [&](Stage2 s) {
    s.shift = shift;
    if (shift != cd(0)) {
      s.report.note += (s.report.note.empty() ? "" : "; ") + std::string("scalar part peeled");
    }
    return s;
  };

  std::string why;
  try {
    auto w = alpha_sequence(qt, ctx_t);
    auto choice = select_coarsening(qt, w, opt.contraction_margin, k_min, k_max);
    TransformContext<cd> ctx{eig, std::make_shared<Partition>(Partition::coarse(labels, mults, choice.m))};
    StageSpace space{StageNorm::weighted, gamma_m_sequence(w)[static_cast<size_t>(choice.m)], w};
    auto fp = fixed_point(qt, ctx, space, fo);
    return finish(Stage2{fp, ctx, choice.m, report_of("stage2", space, choice.m, fp)});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_weight && e.kind() != ErrorKind::window_too_small &&
        e.kind() != ErrorKind::contraction_violation && e.kind() != ErrorKind::non_convergence &&
        e.kind() != ErrorKind::invalid_input)
      throw;
    why = std::string("weighted space unavailable (") + to_string(e.kind()) + "); hs fallback";
  }

  const double qn = hs_norm(qt);
  double best = std::numeric_limits<double>::infinity();
  for (int k = std::max(0, k_min); k <= k_max; ++k) {
    TransformContext<cd> ctx{eig, std::make_shared<Partition>(Partition::coarse(labels, mults, k))};
    if (ctx.part->groups() < 2) break;
    double g = gamma_hs_bound(ctx);
    double prod = 4 * g * qn;
    best = std::min(best, prod);
    if (prod > opt.contraction_margin) continue;
    StageSpace space{StageNorm::hs, g, std::nullopt};
    auto fp = fixed_point(qt, ctx, space, fo);
    Stage2 s{fp, ctx, k, report_of("stage2", space, k, fp)};
    s.report.note = why;
    return finish(s);
  }
  throw Error(ErrorKind::window_too_small, "no second-stage coarsening in the interior window is contractive",
              {{"best_product", best}, {"margin", opt.contraction_margin}, {"k_max", k_max}});
}

SimilarityResult single_stage(const std::string& name, const Spectrum<cd>& spec, const BlockMatrix<cd>& b,
                              const TransformContext<cd>& ctx, const StageSpace& space, bool zero_diag, int m,
                              const PipelineOptions& opt) {
  FixedPointOptions fo{opt.tol, opt.max_iter, zero_diag};
  auto fp = fixed_point(b, ctx, space, fo);
  SimilarityResult r;
  r.pipeline = name;
  r.X_star = fp.X;
  r.U = apply_Gamma(ctx, fp.X);
  r.V = apply_J(ctx, fp.X);
  r.m = m;
  r.iterations = fp.iterations;
  r.contraction_q = fp.contraction_q;
  r.stages.push_back(report_of(name, space, m, fp));
  finalize(r, spec, b);
  return r;
}

}  // namespace

BlockMatrix<cd> phi_step(const BlockMatrix<cd>& x, const BlockMatrix<cd>& bq, const TransformContext<cd>& ctx) {
  auto b = on(bq, ctx);
  auto gx = apply_Gamma(ctx, on(x, ctx));
  auto bgx = b * gx;
  auto jsum = apply_J(ctx, b) + apply_J(ctx, bgx);
  return bgx - gx * jsum + b;
}

BlockMatrix<cd> phi_step_zero_diag(const BlockMatrix<cd>& x, const BlockMatrix<cd>& bq,
                                   const TransformContext<cd>& ctx) {
  auto b = on(bq, ctx);
  double jb = hs_norm(apply_J(ctx, b));
  if (jb > 1e-12 * std::max(1.0, hs_norm(b)))
    throw Error(ErrorKind::invalid_input, "three-term map needs a perturbation with zero block diagonal",
                {{"diag_norm", jb}});
  auto gx = apply_Gamma(ctx, on(x, ctx));
  auto bgx = b * gx;
  return bgx - gx * apply_J(ctx, bgx) + b;
}

FixedPointResult fixed_point(const BlockMatrix<cd>& bq, const TransformContext<cd>& ctx, const StageSpace& space,
                             const FixedPointOptions& opt) {
  if (!(opt.tol > 0) || opt.max_iter < 1) throw Error(ErrorKind::invalid_input, "tolerance and iteration cap must be positive");
  auto b = on(bq, ctx);
  auto step = [&](const BlockMatrix<cd>& x) { return opt.zero_diag ? phi_step_zero_diag(x, b, ctx) : phi_step(x, b, ctx); };

  FixedPointResult r;
  r.b_norm = space.norm(b);
  r.certificate = (opt.zero_diag ? 3.0 : 4.0) * space.gamma * r.b_norm;
  r.X = BlockMatrix<cd>::zero(ctx.part);
  if (r.b_norm == 0) {
    if (opt.zero_diag) step(r.X);  // still validates the diagonal
    r.iterations = 1;
    return r;
  }
  if (!(r.certificate < 1))
    throw Error(ErrorKind::contraction_violation, "contraction certificate fails",
                {{"certificate", r.certificate}, {"gamma", space.gamma}, {"b_norm", r.b_norm}});

  double prev = -1;
  bool done = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    auto xn = step(r.X);
    double diff = space.norm(xn - r.X);
    if (prev > 1e3 * opt.tol * r.b_norm) {
      double q = diff / prev;
      r.ratios.push_back(q);
      r.contraction_q = std::max(r.contraction_q, q);
    }
    r.X = std::move(xn);
    r.iterations = it;
    if (diff <= opt.tol * r.b_norm) {
      done = true;
      break;
    }
    prev = diff;
  }
  if (!done)
    throw Error(ErrorKind::non_convergence, "fixed-point iteration hit the iteration cap",
                {{"iterations", opt.max_iter}, {"last_ratio", r.ratios.empty() ? 0.0 : r.ratios.back()}});

  r.fixed_point_residual = space.norm(step(r.X) - r.X);
  r.ball_ratio = space.norm(r.X - b) / (3 * r.b_norm);
  auto gx = apply_Gamma(ctx, r.X);
  r.diag_identity_residual = hs_norm(apply_J(ctx, r.X) - apply_J(ctx, b * gx) - apply_J(ctx, b));
  return r;
}

Preliminary preliminary_transform(const BlockMatrix<cd>& bq, const TransformContext<cd>& ctx) {
  auto b = on(bq, ctx);
  Preliminary p;
  p.m = ctx.part->kind() == PartitionKind::coarse ? ctx.part->param() : 0;
  p.gamma_b = apply_Gamma(ctx, b);
  p.jm_b = apply_J(ctx, b);
  p.gamma_b_op = op_norm<cd>(p.gamma_b.dense());
  if (!(p.gamma_b_op < 1))
    throw Error(ErrorKind::contraction_violation, "||Gamma_m B|| must be below 1", {{"gamma_b_op", p.gamma_b_op}});
  auto inv = solve_shift(p.gamma_b);
  p.b0 = inv * (b * p.gamma_b - p.gamma_b * p.jm_b);

  BlockMatrix<cd> a(ctx.part, ctx.a_dense());
  auto ipu = BlockMatrix<cd>::identity(ctx.part) + p.gamma_b;
  p.residual = hs_norm((a - b) * ipu - ipu * (a - p.jm_b - p.b0));
  return p;
}

Preliminary choose_preliminary(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, int m_min) {
  double best = std::numeric_limits<double>::infinity();
  for (int m = std::max(0, m_min); m <= spec.window().interior(); ++m) {
    auto ctx = TransformContext<cd>::from(spec, coarse_partition(spec, m));
    if (ctx.part->groups() < 2) break;
    double g = op_norm<cd>(apply_Gamma(ctx, on(b, ctx)).dense());
    best = std::min(best, g);
    if (g < 1) return preliminary_transform(b, ctx);
  }
  throw Error(ErrorKind::window_too_small, "no coarsening in the window gives ||Gamma_m B|| < 1",
              {{"best_gamma_b_op", best}});
}

SimilarityResult pipeline_mt1(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  auto ctx = TransformContext<cd>::from(spec, trivial_partition(spec));
  bool zd = zero_diagonal(b, ctx) && hs_norm(b) > 0;
  StageSpace space{StageNorm::hs, gamma_hs_bound(ctx), std::nullopt};
  return single_stage(zd ? "mt11" : "mt1", spec, b, ctx, space, zd, 0, opt);
}

SimilarityResult pipeline_mt2(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  auto ctx = TransformContext<cd>::from(spec, trivial_partition(spec));
  bool zd = zero_diagonal(b, ctx) && hs_norm(b) > 0;
  StageSpace space{StageNorm::sigma, gamma_norm_certificates(ctx).first, std::nullopt};
  return single_stage(zd ? "mt21" : "mt2", spec, b, ctx, space, zd, 0, opt);
}

SimilarityResult pipeline_mt12(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  auto ctx_t = TransformContext<cd>::from(spec, trivial_partition(spec));
  auto bt = b.with_partition(ctx_t.part);
  auto w = alpha_sequence(bt, ctx_t);
  auto choice = select_coarsening(bt, w, opt.contraction_margin, 0, spec.window().interior());
  auto ctx = TransformContext<cd>::from(spec, coarse_partition(spec, choice.m));
  StageSpace space{StageNorm::weighted, gamma_m_sequence(w)[static_cast<size_t>(choice.m)], w};
  return single_stage("mt12", spec, b, ctx, space, false, choice.m, opt);
}

SimilarityResult pipeline_mt3(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  auto pre = choose_preliminary(spec, b);
  SimilarityResult r;
  r.pipeline = "mt3";
  r.m = pre.m;
  StageReport s1;
  s1.name = "stage1";
  s1.space = "op";
  s1.coarsening = pre.m;
  s1.certificate = pre.gamma_b_op;
  s1.residual = pre.residual;
  r.stages.push_back(s1);

  auto q = pre.jm_b + pre.b0;
  if (hs_norm(q) == 0) {
    r.k = pre.m;
    r.U = pre.gamma_b;
    r.V = pre.jm_b;
    r.X_star = BlockMatrix<cd>::zero(pre.jm_b.partition_ptr());
    finalize(r, spec, b);
    return r;
  }
  auto s2 = run_stage2(spec.diagonal(), spec.entry_labels(), spec.entry_mults(), q, pre.m, spec.window().interior(), opt);
  auto part_k = s2.ctx.part;
  auto gx = apply_Gamma(s2.ctx, s2.fp.X);
  auto gb = pre.gamma_b.with_partition(part_k);
  r.k = s2.k;
  r.X_star = s2.fp.X;
  r.U = gb + gx + gb * gx;
  r.V = apply_J(s2.ctx, s2.fp.X);
  r.V.dense().diagonal().array() += s2.shift;
  r.iterations = s2.fp.iterations;
  r.contraction_q = s2.fp.contraction_q;
  r.stages.push_back(s2.report);
  finalize(r, spec, b);
  return r;
}

SimilarityResult pipeline_mt4(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  auto pre = choose_preliminary(spec, b);
  SimilarityResult r;
  r.pipeline = "mt4";
  r.m = pre.m;
  StageReport s1;
  s1.name = "stage1";
  s1.space = "op";
  s1.coarsening = pre.m;
  s1.certificate = pre.gamma_b_op;
  s1.residual = pre.residual;
  r.stages.push_back(s1);

  const Partition& pm = pre.jm_b.partition();
  const Index d = spec.dim();
  Mat<cd> am = spec.dense() - pre.jm_b.dense();
  Mat<cd> w = Mat<cd>::Zero(d, d), winv = Mat<cd>::Zero(d, d);
  Vec<cd> mu(d);
  std::vector<int> basis_label(static_cast<size_t>(d));
  for (Index p = 0; p < spec.size(); ++p)
    for (int j = 0; j < spec.entry(p).mult; ++j) basis_label[static_cast<size_t>(spec.offset(p) + j)] = spec.entry(p).index;
  Vec<cd> lam = spec.diagonal();
  std::vector<int> labels(static_cast<size_t>(d));

  for (Index g = 0; g < pm.groups(); ++g) {
    const auto& idx = pm.members(g);
    const Index n = static_cast<Index>(idx.size());
    Mat<cd> blk = am(idx, idx);
    Eigen::ComplexEigenSolver<Mat<cd>> es(blk);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::separation_violation, "block of A - J_m B is not diagonalisable");
    Mat<cd> vecs = es.eigenvectors();
    Eigen::PartialPivLU<Mat<cd>> lu(vecs);
    Mat<cd> vinv = lu.inverse();
    double cond = op_norm<cd>(vecs) * op_norm<cd>(vinv);
    if (!std::isfinite(cond) || cond > 1e10)
      throw Error(ErrorKind::separation_violation, "eigenvectors of A - J_m B are ill-conditioned", {{"condition", cond}});
    w(idx, idx) = vecs;
    winv(idx, idx) = vinv;
    Vec<cd> ev = es.eigenvalues();
    // label each new eigenvalue by the nearest unused original one in the group
    std::vector<std::tuple<double, Index, Index>> pairs;
    for (Index a = 0; a < n; ++a)
      for (Index c = 0; c < n; ++c) pairs.emplace_back(std::abs(ev(a) - lam(idx[static_cast<size_t>(c)])), a, c);
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> ua(static_cast<size_t>(n), false), uc(static_cast<size_t>(n), false);
    for (const auto& [dist, a, c] : pairs) {
      if (ua[static_cast<size_t>(a)] || uc[static_cast<size_t>(c)]) continue;
      ua[static_cast<size_t>(a)] = uc[static_cast<size_t>(c)] = true;
      labels[static_cast<size_t>(idx[static_cast<size_t>(a)])] = basis_label[static_cast<size_t>(idx[static_cast<size_t>(c)])];
    }
    for (Index a = 0; a < n; ++a) mu(idx[static_cast<size_t>(a)]) = ev(a);
  }

  double scale = 1 + mu.cwiseAbs().maxCoeff();
  double gap = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < d; ++i)
    for (Index j = i + 1; j < d; ++j) gap = std::min(gap, std::abs(mu(i) - mu(j)));
  if (!(gap > 1e-8 * scale))
    throw Error(ErrorKind::separation_violation, "spectrum of A - J_m B is not separated", {{"min_gap", gap}});

  if (hs_norm(pre.b0) == 0) {
    r.k = pre.m;
    r.U = pre.gamma_b;
    r.V = pre.jm_b;
    r.X_star = BlockMatrix<cd>::zero(pre.jm_b.partition_ptr());
    finalize(r, spec, b);
    return r;
  }

  std::vector<int> ones(static_cast<size_t>(d), 1);
  BlockMatrix<cd> b0t(std::make_shared<Partition>(Partition::trivial(labels, ones)), winv * pre.b0.dense() * w);
  auto s2 = run_stage2(mu, labels, ones, b0t, pre.m, spec.window().interior(), opt);
  auto part_k = coarse_partition(spec, s2.k);
  BlockMatrix<cd> u2(part_k, w * apply_Gamma(s2.ctx, s2.fp.X).dense() * winv);
  Mat<cd> jx = apply_J(s2.ctx, s2.fp.X).dense();
  jx.diagonal().array() += s2.shift;
  BlockMatrix<cd> v2(part_k, w * jx * winv);
  auto gb = pre.gamma_b.with_partition(part_k);
  r.k = s2.k;
  r.X_star = s2.fp.X;
  r.U = gb + u2 + gb * u2;
  r.V = pre.jm_b.with_partition(part_k) + v2;
  r.iterations = s2.fp.iterations;
  r.contraction_q = s2.fp.contraction_q;
  s2.report.note += (s2.report.note.empty() ? "" : "; ") + std::string("rediagonalised basis");
  r.stages.push_back(s2.report);
  finalize(r, spec, b);
  return r;
}

SimilarityResult pipeline_auto(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const PipelineOptions& opt) {
  std::string tried;
  auto note = [&](const char* name, const Error& e) {
    tried += std::string(tried.empty() ? "" : "; ") + name + ": " + to_string(e.kind());
  };
  auto soft = [](const Error& e) {
    return e.kind() == ErrorKind::contraction_violation || e.kind() == ErrorKind::window_too_small ||
           e.kind() == ErrorKind::degenerate_weight || e.kind() == ErrorKind::non_convergence;
  };
  auto done = [&](SimilarityResult r) {
    if (!tried.empty() && !r.stages.empty()) r.stages.front().note = "skipped " + tried;
    return r;
  };
  try {
    return done(pipeline_mt1(spec, b, opt));
  } catch (const Error& e) {
    if (!soft(e)) throw;
    note("mt1", e);
  }
  try {
    return done(pipeline_mt2(spec, b, opt));
  } catch (const Error& e) {
    if (!soft(e)) throw;
    note("mt2", e);
  }
  try {
    return done(pipeline_mt12(spec, b, opt));
  } catch (const Error& e) {
    if (!soft(e) && e.kind() != ErrorKind::invalid_input) throw;
    note("mt12", e);
  }
  return done(pipeline_mt3(spec, b, opt));
}

AsymptoticSequences asymptotic_sequences(const Spectrum<cd>& spec, const BlockMatrix<cd>& bq) {
  auto ctx = TransformContext<cd>::from(spec, trivial_partition(spec));
  auto b = bq.with_partition(ctx.part);
  auto gb = apply_Gamma(ctx, b);
  AsymptoticSequences s;
  const int ni = spec.window().interior();
  for (Index p = 0; p < spec.size(); ++p) {
    if (std::abs(spec.entry(p).index) > ni) continue;
    for (int j = 0; j < spec.entry(p).mult; ++j) {
      Index i = spec.offset(p) + j;
      s.n.push_back(spec.entry(p).index);
      s.p.push_back(b.dense()(i, i));
      s.q.push_back(b.dense().row(i).transpose().cwiseProduct(gb.dense().col(i)).sum());
    }
  }
  return s;
}

ResidualPair similarity_residual(const Spectrum<cd>& spec, const BlockMatrix<cd>& b, const BlockMatrix<cd>& u,
                                 const BlockMatrix<cd>& v) {
  const Index d = spec.dim();
  Mat<cd> a = spec.dense();
  Mat<cd> ipu = Mat<cd>::Identity(d, d) + u.dense();
  Mat<cd> defect = (a - b.dense()) * ipu - ipu * (a - v.dense());
  auto idx = interior_basis(spec);
  return {defect.norm(), defect(idx, idx).norm()};
}

double offdiag_residual(const BlockMatrix<cd>& v) {
  const auto& g = v.partition().group_of_vector();
  double s = 0;
  for (Index j = 0; j < v.dim(); ++j)
    for (Index i = 0; i < v.dim(); ++i)
      if (g[static_cast<size_t>(i)] != g[static_cast<size_t>(j)]) s += std::norm(v.dense()(i, j));
  return std::sqrt(s);
}

std::vector<cd> block_eigenvalues(const Spectrum<cd>& spec, const BlockMatrix<cd>& v) {
  Mat<cd> m = spec.dense() - v.dense();
  const Partition& p = v.partition();
  std::vector<cd> out;
  out.reserve(static_cast<size_t>(m.rows()));
  for (Index g = 0; g < p.groups(); ++g) {
    const auto& idx = p.members(g);
    if (idx.size() == 1) {
      out.push_back(m(idx[0], idx[0]));
      continue;
    }
    Mat<cd> blk = m(idx, idx);
    Eigen::ComplexEigenSolver<Mat<cd>> es(blk, false);
    for (Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  }
  return out;
}

}  // namespace simop
