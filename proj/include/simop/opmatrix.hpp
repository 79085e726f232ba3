#pragma once

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "simop/errors.hpp"

namespace simop {

using Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealOf = typename Eigen::NumTraits<Scalar>::Real;

using cd = std::complex<double>;

// Finite surrogate for the index set Z: indices -N..N, with an interior
// |n| <= floor(interior_fraction * N) where truncation effects are small.
struct TruncationWindow {
  int N = 16;
  double interior_fraction = 0.5;

  int interior() const;
  void validate() const;
};

// Eigenvalues of the free operator, one entry per spectrum index.  Entries
// are kept in increasing index order; basis vectors of entry p occupy rows
// offset(p) .. offset(p) + mult - 1 of every assembled matrix.
template <typename Scalar>
class Spectrum {
 public:
  struct Entry {
    int index;
    Scalar lambda;
    int mult;
  };

  Spectrum() = default;
  Spectrum(std::vector<Entry> entries, TruncationWindow window);

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(Index p) const { return entries_[static_cast<size_t>(p)]; }
  const TruncationWindow& window() const { return window_; }
  Index size() const { return static_cast<Index>(entries_.size()); }
  Index dim() const { return start_.empty() ? 0 : start_.back(); }
  Index offset(Index p) const { return start_[static_cast<size_t>(p)]; }
  // Entry position holding index n, or -1.
  Index position(int n) const;

  Vec<Scalar> diagonal() const;
  Mat<Scalar> dense() const;
  std::vector<int> entry_labels() const;
  std::vector<int> entry_mults() const;

  // Distinct eigenvalues, contiguous symmetric index range, mult >= 1.
  void validate() const;

 private:
  std::vector<Entry> entries_;
  TruncationWindow window_;
  std::vector<Index> start_;
};

template <typename Scalar, typename F>
Spectrum<Scalar> make_spectrum(const TruncationWindow& w, F&& lambda, int mult = 1) {
  w.validate();
  std::vector<typename Spectrum<Scalar>::Entry> e;
  e.reserve(static_cast<size_t>(2 * w.N + 1));
  for (int n = -w.N; n <= w.N; ++n) e.push_back({n, Scalar(lambda(n)), mult});
  return Spectrum<Scalar>(std::move(e), w);
}

enum class PartitionKind { trivial, two_part, coarse, custom };

// Grouping of basis vectors into the spectral sets sigma_g.  Each group
// carries an integer label; coarse(m) labels its merged group 0 and keeps
// the spectrum index for singletons, two_part(k) labels {k} as 0 and the
// complement as 1.
class Partition {
 public:
  // Built from per-entry labels and multiplicities (entries in basis order).
  static Partition trivial(const std::vector<int>& labels, const std::vector<int>& mults);
  static Partition coarse(const std::vector<int>& labels, const std::vector<int>& mults, int m);
  static Partition two_part(const std::vector<int>& labels, const std::vector<int>& mults, int k);
  // groups: lists of entry positions; must cover all entries exactly once.
  static Partition custom(const std::vector<std::vector<Index>>& groups, const std::vector<int>& mults);

  PartitionKind kind() const { return kind_; }
  int param() const { return param_; }
  Index dim() const { return static_cast<Index>(group_of_.size()); }
  Index groups() const { return static_cast<Index>(members_.size()); }
  Index group_of(Index i) const { return group_of_[static_cast<size_t>(i)]; }
  const std::vector<Index>& members(Index g) const { return members_[static_cast<size_t>(g)]; }
  Index group_dim(Index g) const { return static_cast<Index>(members(g).size()); }
  int label(Index g) const { return labels_[static_cast<size_t>(g)]; }
  // Group with the given label, -1 if none.
  Index find_label(int label) const;
  const std::vector<Index>& group_of_vector() const { return group_of_; }

  bool same_as(const Partition& o) const;
  // Every group of *this lies inside a single group of coarser.
  bool refines(const Partition& coarser) const;

 private:
  static Partition from_entry_groups(const std::vector<std::vector<Index>>& groups, const std::vector<int>& mults,
                                     std::vector<int> labels, PartitionKind kind, int param);

  PartitionKind kind_ = PartitionKind::custom;
  int param_ = 0;
  std::vector<Index> group_of_;
  std::vector<std::vector<Index>> members_;
  std::vector<int> labels_;
};

using PartitionPtr = std::shared_ptr<const Partition>;

template <typename Scalar>
PartitionPtr trivial_partition(const Spectrum<Scalar>& s) {
  return std::make_shared<Partition>(Partition::trivial(s.entry_labels(), s.entry_mults()));
}
template <typename Scalar>
PartitionPtr coarse_partition(const Spectrum<Scalar>& s, int m) {
  return std::make_shared<Partition>(Partition::coarse(s.entry_labels(), s.entry_mults(), m));
}
template <typename Scalar>
PartitionPtr two_part_partition(const Spectrum<Scalar>& s, int k) {
  return std::make_shared<Partition>(Partition::two_part(s.entry_labels(), s.entry_mults(), k));
}

// A Sigma-matrix.  The assembled dense truncation is the storage; blocks
// are views selected by the partition.
template <typename Scalar>
class BlockMatrix {
 public:
  using Matrix = Mat<Scalar>;
  using Real = RealOf<Scalar>;

  BlockMatrix() = default;
  BlockMatrix(PartitionPtr p, Matrix dense);

  static BlockMatrix zero(PartitionPtr p);
  static BlockMatrix identity(PartitionPtr p);

  const Partition& partition() const { return *part_; }
  const PartitionPtr& partition_ptr() const { return part_; }
  const Matrix& dense() const { return m_; }
  Matrix& dense() { return m_; }
  Index dim() const { return m_.rows(); }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  Matrix block(Index g, Index h) const;
  bool block_is_zero(Index g, Index h) const;

  BlockMatrix adjoint() const { return BlockMatrix(part_, m_.adjoint()); }
  BlockMatrix with_partition(PartitionPtr p) const;

  BlockMatrix& operator+=(const BlockMatrix& o);
  BlockMatrix& operator-=(const BlockMatrix& o);
  BlockMatrix& operator*=(Scalar a) {
    m_ *= a;
    return *this;
  }

 private:
  PartitionPtr part_;
  Matrix m_;
};

void require_same(const Partition& a, const Partition& b);

template <typename Scalar>
BlockMatrix<Scalar> operator+(BlockMatrix<Scalar> a, const BlockMatrix<Scalar>& b) {
  a += b;
  return a;
}
template <typename Scalar>
BlockMatrix<Scalar> operator-(BlockMatrix<Scalar> a, const BlockMatrix<Scalar>& b) {
  a -= b;
  return a;
}
template <typename Scalar>
BlockMatrix<Scalar> operator*(const BlockMatrix<Scalar>& a, const BlockMatrix<Scalar>& b) {
  require_same(a.partition(), b.partition());
  return BlockMatrix<Scalar>(a.partition_ptr(), a.dense() * b.dense());
}
template <typename Scalar>
BlockMatrix<Scalar> operator*(Scalar s, BlockMatrix<Scalar> a) {
  a *= s;
  return a;
}

template <typename Real>
struct NormReport {
  Real hs = 0;
  Real hs_sigma = 0;
  Real op = 0;
};

template <typename Scalar>
RealOf<Scalar> separation_delta(const Spectrum<Scalar>& spec);
template <typename Scalar>
RealOf<Scalar> eta_constant(const Spectrum<Scalar>& spec);

// Largest singular value by power iteration on M^* M.
template <typename Scalar>
RealOf<Scalar> op_norm(const Mat<Scalar>& m);
template <typename Scalar>
RealOf<Scalar> block_spectral_norm(const Mat<Scalar>& b);

template <typename Scalar>
RealOf<Scalar> hs_norm(const BlockMatrix<Scalar>& x) {
  return x.dense().norm();
}
template <typename Scalar>
RealOf<Scalar> sigma_norm(const BlockMatrix<Scalar>& x);
template <typename Scalar>
NormReport<RealOf<Scalar>> norms(const BlockMatrix<Scalar>& x);

// Regroup onto a coarser partition; the assembled matrix is untouched.
template <typename Scalar>
BlockMatrix<Scalar> coarsen(const BlockMatrix<Scalar>& x, PartitionPtr target);
template <typename Scalar>
BlockMatrix<Scalar> refine(const BlockMatrix<Scalar>& x, PartitionPtr target);

// (I + X)^{-1}; throws not_invertible when the condition estimate exceeds
// 1e12 or the multiply-back residual exceeds 1e-10.
template <typename Scalar>
BlockMatrix<Scalar> solve_shift(const BlockMatrix<Scalar>& x);

struct BlockEntry {
  Index m_group;
  Index n_group;
  Index row;
  Index col;
  double re;
  double im;
};

// Flat table of nonzero blocks; row/col are local to the block.
std::vector<BlockEntry> to_entries(const BlockMatrix<cd>& x);
BlockMatrix<cd> from_entries(PartitionPtr p, const std::vector<BlockEntry>& rows);

}  // namespace simop
