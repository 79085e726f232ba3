#include <numeric>

#include "catch_amalgamated.hpp"
#include "simop/opmatrix.hpp"
#include "test_util.hpp"

using namespace simop;
using namespace testutil;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("separation of the periodic first-derivative spectrum is 2 pi", "[opmatrix]") {
  CHECK_THAT(separation_delta(periodic(16)), WithinRel(2 * kPi, 1e-14));
}

TEST_CASE("two-point spectrum", "[opmatrix]") {
  auto s = listed({0.0, 1.0});
  CHECK(separation_delta(s) == 1.0);
  CHECK(eta_constant(s) == 1.0);
}

TEST_CASE("Hill separation against a pairwise scan", "[opmatrix]") {
  auto s = models::hill_spectrum(0.5, TruncationWindow{8, 0.5});
  double best = 1e300;
  for (int m = -8; m <= 8; ++m)
    for (int n = m + 1; n <= 8; ++n) {
      double a = kPi * (2 * m - 0.5), b = kPi * (2 * n - 0.5);
      best = std::min(best, std::abs(a * a - b * b));
    }
  CHECK_THAT(separation_delta(s), WithinRel(best, 1e-14));
  // smallest gap sits between n = 0 and n = 1: pi^2 (1.5^2 - 0.5^2) = 2 pi^2
  CHECK_THAT(best, WithinRel(2 * kPi * kPi, 1e-14));
}

TEST_CASE("eta for the periodic spectrum approaches 1/12 from below", "[opmatrix]") {
  for (int N : {64, 128}) {
    double eta = eta_constant(periodic(N));
    CHECK(eta <= 1.0 / 12);
    CHECK(eta >= 0.99 / 12);
  }
}

TEST_CASE("eta by direct double sum, theta = 0.7", "[opmatrix]") {
  auto s = models::first_derivative_spectrum(0.7, TruncationWindow{64, 0.5});
  double best = 0;
  for (int j = -64; j <= 64; ++j) {
    double acc = 0;
    for (int n = -64; n <= 64; ++n)
      if (n != j) acc += 1 / std::norm(cd(0, kPi * (2.0 * n - 0.7)) - cd(0, kPi * (2.0 * j - 0.7)));
    best = std::max(best, acc);
  }
  CHECK_THAT(eta_constant(s), WithinRel(best, 1e-13));
}

TEST_CASE("norms of zero and identity", "[opmatrix]") {
  auto s = periodic(5);
  auto p = trivial_partition(s);
  auto z = norms(BlockMatrix<cd>::zero(p));
  CHECK(z.hs == 0);
  CHECK(z.hs_sigma == 0);
  CHECK(z.op == 0);
  auto id = norms(BlockMatrix<cd>::identity(p));
  CHECK_THAT(id.hs, WithinRel(std::sqrt(11.0), 1e-14));
  CHECK_THAT(id.op, WithinRel(1.0, 1e-10));
}

TEST_CASE("hs of the s+t kernel approaches sqrt(7/6) from below", "[opmatrix]") {
  double prev = 0;
  for (int N : {16, 64, 256}) {
    double h = norms(kernel_b(periodic(N))).hs;
    CHECK(h <= std::sqrt(7.0 / 6));
    CHECK(h > prev);
    prev = h;
  }
  CHECK(prev > std::sqrt(7.0 / 6) - 2e-3);
}

TEST_CASE("group norm sits between op and hs norms on a coarse partition", "[opmatrix]") {
  std::mt19937_64 rng(3);
  auto s = periodic(6);
  BlockMatrix<cd> x(coarse_partition(s, 2), random_matrix(rng, s.dim(), s.dim()));
  auto n = norms(x);
  CHECK(n.hs_sigma <= n.hs * (1 + 1e-14));
  CHECK(n.op <= n.hs_sigma * (1 + 1e-12));
  // on the trivial partition the two coincide
  CHECK_THAT(sigma_norm(x.with_partition(trivial_partition(s))), WithinRel(n.hs, 1e-14));
}

TEST_CASE("coarsen", "[opmatrix]") {
  std::mt19937_64 rng(5);
  auto s = periodic(6);
  auto triv = trivial_partition(s);
  BlockMatrix<cd> x(triv, random_matrix(rng, s.dim(), s.dim()));

  SECTION("trivial to trivial is the identity operation") {
    auto y = coarsen(x, trivial_partition(s));
    CHECK((y.dense() - x.dense()).norm() == 0);
  }
  SECTION("one group holds the assembled matrix") {
    std::vector<Index> all(static_cast<size_t>(s.size()));
    std::iota(all.begin(), all.end(), 0);
    auto one = std::make_shared<Partition>(Partition::custom({all}, s.entry_mults()));
    auto y = coarsen(x, one);
    REQUIRE(y.partition().groups() == 1);
    CHECK((y.block(0, 0) - x.dense()).norm() == 0);
  }
  SECTION("trivial to coarse(2) keeps every entry") {
    auto c = coarse_partition(s, 2);
    auto y = coarsen(x, c);
    CHECK((y.dense() - x.dense()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(y.partition().groups() == s.size() - 4);
    auto back = refine(y, triv);
    CHECK((back.dense() - x.dense()).norm() == 0);
  }
  SECTION("coarsen to a finer partition is rejected") {
    auto y = coarsen(x, coarse_partition(s, 2));
    CHECK_THROWS_AS(coarsen(y, trivial_partition(s)), Error);
  }
}

TEST_CASE("solve_shift", "[opmatrix]") {
  std::mt19937_64 rng(11);
  auto s = listed({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0});
  auto p = trivial_partition(s);

  SECTION("zero gives the identity") {
    auto inv = solve_shift(BlockMatrix<cd>::zero(p));
    CHECK((inv.dense() - Mat<cd>::Identity(8, 8)).norm() == 0);
  }
  SECTION("Neumann series bound") {
    Mat<cd> m = random_matrix(rng, 8, 8);
    m *= 0.4 / op_norm<cd>(m);
    const double q = op_norm<cd>(m);
    BlockMatrix<cd> x(p, m);
    auto inv = solve_shift(x);
    Mat<cd> sum = Mat<cd>::Identity(8, 8), term = sum;
    const int J = 12;
    for (int j = 1; j <= J; ++j) {
      term = -(term * m);
      sum += term;
    }
    CHECK(op_norm<cd>(Mat<cd>(inv.dense() - sum)) <= std::pow(q, J + 1) / (1 - q) + 1e-14);
  }
  SECTION("random 8x8 with norm 0.5 multiplies back") {
    Mat<cd> m = random_matrix(rng, 8, 8);
    m *= 0.5 / op_norm<cd>(m);
    BlockMatrix<cd> x(p, m);
    auto inv = solve_shift(x);
    Mat<cd> res = (Mat<cd>::Identity(8, 8) + m) * inv.dense() - Mat<cd>::Identity(8, 8);
    CHECK(res.norm() <= 1e-14);
  }
  SECTION("singular shift is rejected") {
    Mat<cd> m = -Mat<cd>::Identity(8, 8);
    CHECK_THROWS_AS(solve_shift(BlockMatrix<cd>(p, m)), Error);
  }
}

TEST_CASE("entry table round trip", "[opmatrix]") {
  std::mt19937_64 rng(2);
  auto s = periodic(4);
  auto c = coarse_partition(s, 1);
  BlockMatrix<cd> x(c, random_matrix(rng, s.dim(), s.dim()));
  x.dense()(0, 8) = 0;
  auto rows = to_entries(x);
  auto y = from_entries(c, rows);
  CHECK((y.dense() - x.dense()).norm() == 0);
}

TEST_CASE("partition mismatch in arithmetic", "[opmatrix]") {
  auto s = periodic(3);
  auto a = BlockMatrix<cd>::identity(trivial_partition(s));
  auto b = BlockMatrix<cd>::identity(coarse_partition(s, 1));
  try {
    auto c = a + b;
    FAIL("expected a partition mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::partition_mismatch);
  }
}

TEST_CASE("window validation", "[opmatrix]") {
  CHECK_THROWS_AS((TruncationWindow{0, 0.5}.validate()), Error);
  CHECK_THROWS_AS((TruncationWindow{4, 0.1}.validate()), Error);
  CHECK(TruncationWindow{64, 0.5}.interior() == 32);
}
