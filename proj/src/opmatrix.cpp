#include "simop/opmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace simop {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::partition_mismatch: return "partition_mismatch";
    case ErrorKind::not_invertible: return "not_invertible";
    case ErrorKind::contraction_violation: return "contraction_violation";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::window_too_small: return "window_too_small";
    case ErrorKind::condition_violation: return "condition_violation";
    case ErrorKind::not_supported: return "not_supported";
    case ErrorKind::degenerate_weight: return "degenerate_weight";
    case ErrorKind::separation_violation: return "separation_violation";
    case ErrorKind::oracle_failure: return "oracle_failure";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::invariant_breach: return "invariant_breach";
  }
  return "unknown";
}

int TruncationWindow::interior() const {
  return static_cast<int>(std::floor(interior_fraction * N));
}

void TruncationWindow::validate() const {
  if (N < 1) throw Error(ErrorKind::invalid_input, "window half-width N must be positive", {{"N", N}});
  if (!(interior_fraction > 0.0 && interior_fraction <= 1.0))
    throw Error(ErrorKind::invalid_input, "interior_fraction must lie in (0,1]", {{"interior_fraction", interior_fraction}});
  if (interior() < 1)
    throw Error(ErrorKind::invalid_input, "interior window is empty", {{"N", N}, {"interior_fraction", interior_fraction}});
}

// ---------------------------------------------------------------- Spectrum

template <typename Scalar>
Spectrum<Scalar>::Spectrum(std::vector<Entry> entries, TruncationWindow window)
    : entries_(std::move(entries)), window_(window) {
  start_.assign(entries_.size() + 1, 0);
  for (size_t p = 0; p < entries_.size(); ++p) {
    if (entries_[p].mult < 1)
      throw Error(ErrorKind::invalid_input, "multiplicity must be >= 1", {{"index", entries_[p].index}});
    start_[p + 1] = start_[p] + entries_[p].mult;
  }
}

template <typename Scalar>
Index Spectrum<Scalar>::position(int n) const {
  if (entries_.empty()) return -1;
  Index guess = n - entries_.front().index;
  if (guess >= 0 && guess < size() && entries_[static_cast<size_t>(guess)].index == n) return guess;
  for (Index p = 0; p < size(); ++p)
    if (entries_[static_cast<size_t>(p)].index == n) return p;
  return -1;
}

template <typename Scalar>
Vec<Scalar> Spectrum<Scalar>::diagonal() const {
  Vec<Scalar> d(dim());
  for (Index p = 0; p < size(); ++p)
    for (int j = 0; j < entry(p).mult; ++j) d(offset(p) + j) = entry(p).lambda;
  return d;
}

template <typename Scalar>
Mat<Scalar> Spectrum<Scalar>::dense() const {
  return diagonal().asDiagonal();
}

template <typename Scalar>
std::vector<int> Spectrum<Scalar>::entry_labels() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.index);
  return out;
}

template <typename Scalar>
std::vector<int> Spectrum<Scalar>::entry_mults() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.mult);
  return out;
}

template <typename Scalar>
void Spectrum<Scalar>::validate() const {
  window_.validate();
  if (size() != 2 * window_.N + 1)
    throw Error(ErrorKind::invalid_input, "spectrum must hold one entry per index in [-N, N]",
                {{"entries", static_cast<double>(size())}, {"N", window_.N}});
  for (Index p = 0; p < size(); ++p)
    if (entry(p).index != -window_.N + p)
      throw Error(ErrorKind::invalid_input, "spectrum indices must be contiguous and increasing",
                  {{"position", static_cast<double>(p)}});
  if (size() >= 2 && !(separation_delta(*this) > 0))
    throw Error(ErrorKind::invalid_input, "eigenvalues are not pairwise distinct");
}

template <typename Scalar>
RealOf<Scalar> separation_delta(const Spectrum<Scalar>& spec) {
  using Real = RealOf<Scalar>;
  if (spec.size() < 2) throw Error(ErrorKind::invalid_input, "separation needs at least two eigenvalues");
  Real best = std::numeric_limits<Real>::infinity();
  for (Index a = 0; a < spec.size(); ++a)
    for (Index b = a + 1; b < spec.size(); ++b)
      best = std::min(best, static_cast<Real>(std::abs(spec.entry(a).lambda - spec.entry(b).lambda)));
  return best;
}

template <typename Scalar>
RealOf<Scalar> eta_constant(const Spectrum<Scalar>& spec) {
  using Real = RealOf<Scalar>;
  if (spec.size() == 0) throw Error(ErrorKind::invalid_input, "empty spectrum");
  Real best = 0;
  for (Index j = 0; j < spec.size(); ++j) {
    Real s = 0;
    for (Index n = 0; n < spec.size(); ++n) {
      if (n == j) continue;
      Real d = std::abs(spec.entry(n).lambda - spec.entry(j).lambda);
      if (d == 0) throw Error(ErrorKind::invalid_input, "eigenvalues are not pairwise distinct");
      s += 1 / (d * d);
    }
    best = std::max(best, s);
  }
  return best;
}

// --------------------------------------------------------------- Partition

Partition Partition::from_entry_groups(const std::vector<std::vector<Index>>& groups, const std::vector<int>& mults,
                                       std::vector<int> labels, PartitionKind kind, int param) {
  const Index entries = static_cast<Index>(mults.size());
  std::vector<Index> start(mults.size() + 1, 0);
  for (size_t p = 0; p < mults.size(); ++p) start[p + 1] = start[p] + mults[p];

  Partition out;
  out.kind_ = kind;
  out.param_ = param;
  out.labels_ = std::move(labels);
  out.group_of_.assign(static_cast<size_t>(start.back()), -1);
  out.members_.resize(groups.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error(ErrorKind::invalid_input, "partition group is empty");
    std::vector<Index> ents = groups[g];
    std::sort(ents.begin(), ents.end());
    for (Index p : ents) {
      if (p < 0 || p >= entries) throw Error(ErrorKind::invalid_input, "partition refers to a missing entry");
      for (Index i = start[static_cast<size_t>(p)]; i < start[static_cast<size_t>(p) + 1]; ++i) {
        if (out.group_of_[static_cast<size_t>(i)] != -1)
          throw Error(ErrorKind::invalid_input, "partition groups overlap");
        out.group_of_[static_cast<size_t>(i)] = static_cast<Index>(g);
        out.members_[g].push_back(i);
      }
    }
  }
  for (Index g : out.group_of_)
    if (g < 0) throw Error(ErrorKind::invalid_input, "partition does not cover the window");
  return out;
}

Partition Partition::trivial(const std::vector<int>& labels, const std::vector<int>& mults) {
  std::vector<std::vector<Index>> g(labels.size());
  for (size_t p = 0; p < labels.size(); ++p) g[p] = {static_cast<Index>(p)};
  return from_entry_groups(g, mults, labels, PartitionKind::trivial, 0);
}

Partition Partition::coarse(const std::vector<int>& labels, const std::vector<int>& mults, int m) {
  if (m < 0) throw Error(ErrorKind::invalid_input, "coarse(m) needs m >= 0", {{"m", m}});
  std::vector<std::vector<Index>> g;
  std::vector<int> lab;
  Index merged = -1;
  for (size_t p = 0; p < labels.size(); ++p) {
    if (std::abs(labels[p]) <= m) {
      if (merged < 0) {
        merged = static_cast<Index>(g.size());
        g.emplace_back();
        lab.push_back(0);
      }
      g[static_cast<size_t>(merged)].push_back(static_cast<Index>(p));
    } else {
      g.push_back({static_cast<Index>(p)});
      lab.push_back(labels[p]);
    }
  }
  return from_entry_groups(g, mults, lab, PartitionKind::coarse, m);
}

Partition Partition::two_part(const std::vector<int>& labels, const std::vector<int>& mults, int k) {
  std::vector<std::vector<Index>> g(2);
  for (size_t p = 0; p < labels.size(); ++p) g[labels[p] == k ? 0 : 1].push_back(static_cast<Index>(p));
  if (g[0].empty()) throw Error(ErrorKind::invalid_input, "split index outside the window", {{"k", k}});
  if (g[1].empty()) throw Error(ErrorKind::invalid_input, "two_part needs a nonempty complement");
  return from_entry_groups(g, mults, {0, 1}, PartitionKind::two_part, k);
}

Partition Partition::custom(const std::vector<std::vector<Index>>& groups, const std::vector<int>& mults) {
  std::vector<int> lab(groups.size());
  for (size_t g = 0; g < groups.size(); ++g) lab[g] = static_cast<int>(g);
  return from_entry_groups(groups, mults, lab, PartitionKind::custom, 0);
}

Index Partition::find_label(int label) const {
  for (size_t g = 0; g < labels_.size(); ++g)
    if (labels_[g] == label) return static_cast<Index>(g);
  return -1;
}

bool Partition::same_as(const Partition& o) const {
  return this == &o || (group_of_ == o.group_of_ && members_.size() == o.members_.size());
}

bool Partition::refines(const Partition& coarser) const {
  if (dim() != coarser.dim()) return false;
  for (const auto& mem : members_) {
    Index target = coarser.group_of(mem.front());
    for (Index i : mem)
      if (coarser.group_of(i) != target) return false;
  }
  return true;
}

void require_same(const Partition& a, const Partition& b) {
  if (!a.same_as(b)) throw Error(ErrorKind::partition_mismatch, "operands live on different partitions");
}

// ------------------------------------------------------------- BlockMatrix

template <typename Scalar>
BlockMatrix<Scalar>::BlockMatrix(PartitionPtr p, Matrix dense) : part_(std::move(p)), m_(std::move(dense)) {
  if (!part_) throw Error(ErrorKind::invalid_input, "block matrix without partition");
  if (m_.rows() != part_->dim() || m_.cols() != part_->dim())
    throw Error(ErrorKind::invalid_input, "matrix shape does not match partition dimension",
                {{"rows", static_cast<double>(m_.rows())}, {"dim", static_cast<double>(part_->dim())}});
}

template <typename Scalar>
BlockMatrix<Scalar> BlockMatrix<Scalar>::zero(PartitionPtr p) {
  const Index d = p->dim();
  return BlockMatrix(std::move(p), Matrix::Zero(d, d));
}

template <typename Scalar>
BlockMatrix<Scalar> BlockMatrix<Scalar>::identity(PartitionPtr p) {
  const Index d = p->dim();
  return BlockMatrix(std::move(p), Matrix::Identity(d, d));
}

template <typename Scalar>
typename BlockMatrix<Scalar>::Matrix BlockMatrix<Scalar>::block(Index g, Index h) const {
  return m_(part_->members(g), part_->members(h));
}

template <typename Scalar>
bool BlockMatrix<Scalar>::block_is_zero(Index g, Index h) const {
  for (Index i : part_->members(g))
    for (Index j : part_->members(h))
      if (m_(i, j) != Scalar(0)) return false;
  return true;
}

template <typename Scalar>
BlockMatrix<Scalar> BlockMatrix<Scalar>::with_partition(PartitionPtr p) const {
  return BlockMatrix(std::move(p), m_);
}

template <typename Scalar>
BlockMatrix<Scalar>& BlockMatrix<Scalar>::operator+=(const BlockMatrix& o) {
  require_same(*part_, o.partition());
  m_ += o.m_;
  return *this;
}

template <typename Scalar>
BlockMatrix<Scalar>& BlockMatrix<Scalar>::operator-=(const BlockMatrix& o) {
  require_same(*part_, o.partition());
  m_ -= o.m_;
  return *this;
}

// ------------------------------------------------------------------- norms

template <typename Scalar>
RealOf<Scalar> block_spectral_norm(const Mat<Scalar>& b) {
  if (b.size() == 0) return 0;
  if (b.rows() == 1 || b.cols() == 1) return b.norm();
  Eigen::JacobiSVD<Mat<Scalar>> svd(b);
  return svd.singularValues()(0);
}

template <typename Scalar>
RealOf<Scalar> op_norm(const Mat<Scalar>& m) {
  using Real = RealOf<Scalar>;
  if (m.size() == 0) return 0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  if (std::min(m.rows(), m.cols()) <= 16) return block_spectral_norm<Scalar>(m);
  const Real fro = m.norm();
  if (fro == 0) return 0;

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<Real> nd;
  Vec<Scalar> v(m.cols());
  for (Index i = 0; i < v.size(); ++i) {
    if constexpr (Eigen::NumTraits<Scalar>::IsComplex)
      v(i) = Scalar(nd(rng), nd(rng));
    else
      v(i) = Scalar(nd(rng));
  }
  v.normalize();
  Real sigma = 0;
  const Index cap = 10 * std::max(m.rows(), m.cols());
  for (Index it = 0; it < cap; ++it) {
    Vec<Scalar> w = m * v;
    Real s = w.norm();
    Vec<Scalar> u = m.adjoint() * w;
    Real un = u.norm();
    if (un == 0) break;
    v = u / un;
    if (std::abs(s - sigma) <= Real(1e-12) * s) {
      sigma = s;
      break;
    }
    sigma = s;
  }
  return sigma;
}

template <typename Scalar>
RealOf<Scalar> sigma_norm(const BlockMatrix<Scalar>& x) {
  using Real = RealOf<Scalar>;
  const Partition& p = x.partition();
  const auto& m = x.dense();
  if (p.groups() == p.dim()) return m.norm();
  Real acc = 0;
  for (Index g = 0; g < p.groups(); ++g) {
    const auto& rg = p.members(g);
    for (Index h = 0; h < p.groups(); ++h) {
      const auto& ch = p.members(h);
      if (rg.size() == 1 || ch.size() == 1) {
        Real s = 0;
        for (Index i : rg)
          for (Index j : ch) s += std::norm(m(i, j));
        acc += s;
      } else {
        Mat<Scalar> b = m(rg, ch);
        if (b.squaredNorm() == 0) continue;
        Real s = block_spectral_norm<Scalar>(b);
        acc += s * s;
      }
    }
  }
  return std::sqrt(acc);
}

template <typename Scalar>
NormReport<RealOf<Scalar>> norms(const BlockMatrix<Scalar>& x) {
  NormReport<RealOf<Scalar>> r;
  r.hs = hs_norm(x);
  r.hs_sigma = sigma_norm(x);
  r.op = op_norm<Scalar>(x.dense());
  return r;
}

template <typename Scalar>
BlockMatrix<Scalar> coarsen(const BlockMatrix<Scalar>& x, PartitionPtr target) {
  if (!x.partition().refines(*target))
    throw Error(ErrorKind::partition_mismatch, "target partition is not coarser than the source");
  return x.with_partition(std::move(target));
}

template <typename Scalar>
BlockMatrix<Scalar> refine(const BlockMatrix<Scalar>& x, PartitionPtr target) {
  if (!target->refines(x.partition()))
    throw Error(ErrorKind::partition_mismatch, "target partition is not finer than the source");
  return x.with_partition(std::move(target));
}

template <typename Scalar>
BlockMatrix<Scalar> solve_shift(const BlockMatrix<Scalar>& x) {
  using Real = RealOf<Scalar>;
  const Index d = x.dim();
  Mat<Scalar> a = Mat<Scalar>::Identity(d, d) + x.dense();
  Eigen::PartialPivLU<Mat<Scalar>> lu(a);
  const Real rc = lu.rcond();
  const Real cond = rc > 0 ? 1 / rc : std::numeric_limits<Real>::infinity();
  if (!(cond < Real(1e12))) throw Error(ErrorKind::not_invertible, "I + X is singular to tolerance", {{"condition", cond}});
  Mat<Scalar> inv = lu.inverse();
  Real res = op_norm<Scalar>(a * inv - Mat<Scalar>::Identity(d, d));
  if (!(res <= Real(1e-10)))
    throw Error(ErrorKind::not_invertible, "inverse of I + X failed the multiply-back check",
                {{"condition", cond}, {"residual", res}});
  return BlockMatrix<Scalar>(x.partition_ptr(), std::move(inv));
}

std::vector<BlockEntry> to_entries(const BlockMatrix<cd>& x) {
  std::vector<BlockEntry> out;
  const Partition& p = x.partition();
  for (Index g = 0; g < p.groups(); ++g)
    for (Index h = 0; h < p.groups(); ++h) {
      if (x.block_is_zero(g, h)) continue;
      const auto& rg = p.members(g);
      const auto& ch = p.members(h);
      for (size_t a = 0; a < rg.size(); ++a)
        for (size_t b = 0; b < ch.size(); ++b) {
          cd v = x(rg[a], ch[b]);
          out.push_back({g, h, static_cast<Index>(a), static_cast<Index>(b), v.real(), v.imag()});
        }
    }
  return out;
}

BlockMatrix<cd> from_entries(PartitionPtr p, const std::vector<BlockEntry>& rows) {
  auto out = BlockMatrix<cd>::zero(p);
  for (const auto& r : rows) {
    if (r.m_group < 0 || r.m_group >= p->groups() || r.n_group < 0 || r.n_group >= p->groups())
      throw Error(ErrorKind::parse_error, "block index outside the partition");
    const auto& rg = p->members(r.m_group);
    const auto& ch = p->members(r.n_group);
    if (r.row < 0 || r.row >= static_cast<Index>(rg.size()) || r.col < 0 || r.col >= static_cast<Index>(ch.size()))
      throw Error(ErrorKind::parse_error, "entry outside its block");
    out.dense()(rg[static_cast<size_t>(r.row)], ch[static_cast<size_t>(r.col)]) = cd(r.re, r.im);
  }
  return out;
}

template class Spectrum<cd>;
template class BlockMatrix<cd>;
template double separation_delta(const Spectrum<cd>&);
template double eta_constant(const Spectrum<cd>&);
template double op_norm(const Mat<cd>&);
template double block_spectral_norm(const Mat<cd>&);
template double sigma_norm(const BlockMatrix<cd>&);
template NormReport<double> norms(const BlockMatrix<cd>&);
template BlockMatrix<cd> coarsen(const BlockMatrix<cd>&, PartitionPtr);
template BlockMatrix<cd> refine(const BlockMatrix<cd>&, PartitionPtr);
template BlockMatrix<cd> solve_shift(const BlockMatrix<cd>&);

}  // namespace simop
