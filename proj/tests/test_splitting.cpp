#include "catch_amalgamated.hpp"
#include "simop/splitting.hpp"
#include "simop/verify.hpp"
#include "test_util.hpp"

using namespace simop;
using namespace testutil;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Mat<cd> unit_proj(Index d, Index i) {
  Mat<cd> p = Mat<cd>::Zero(d, d);
  p(i, i) = 1;
  return p;
}

}  // namespace

TEST_CASE("S operator", "[splitting]") {
  SECTION("periodic spectrum, k = 0") {
    auto s = periodic(6);
    auto S = s_operator(s, 0);
    for (int j = -6; j <= 6; ++j) {
      Index p = s.position(j);
      cd want = j == 0 ? cd(0) : 1.0 / cd(0, -2 * kPi * j);
      CHECK(std::abs(S(p, p) - want) <= 1e-16);
    }
    CHECK_THAT(op_norm<cd>(S.dense()), WithinRel(1 / (2 * kPi), 1e-10));
  }
  SECTION("two-point spectrum") {
    auto s = listed({0.0, 1.0});
    auto S = s_operator(s, 0);
    CHECK(S(1, 1) == cd(-1));
    CHECK(S(0, 0) == cd(0));
  }
  SECTION("defining identities") {
    auto s = models::hill_spectrum(0.3, TruncationWindow{8, 0.5});
    for (int k : {-3, 0, 5}) {
      auto S = s_operator(s, k);
      auto P = p_operator(s, k);
      const Index d = s.dim();
      Mat<cd> q = Mat<cd>::Identity(d, d) - P.dense();
      Mat<cd> lk = s.dense()(s.position(k), s.position(k)) * Mat<cd>::Identity(d, d);
      CHECK((S.dense() * (lk - s.dense()) - q).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((P.dense() * S.dense()).norm() == 0);
      CHECK((S.dense() * P.dense()).norm() == 0);
    }
  }
}

TEST_CASE("Gamma through S", "[splitting]") {
  std::mt19937_64 rng(5);
  auto s = periodic(5);
  const int k = 2;
  auto S = s_operator(s, k);
  auto P = p_operator(s, k);
  auto ctx = TransformContext<cd>::from(s, S.partition_ptr());
  Vec<cd> dg = random_matrix(rng, s.dim(), 1).col(0);
  CHECK(hs_norm(gamma_via_s(BlockMatrix<cd>(S.partition_ptr(), dg.asDiagonal()), S, P)) == 0);
  CHECK(hs_norm(gamma_via_s(P, S, P)) == 0);
  for (int t = 0; t < 10; ++t) {
    BlockMatrix<cd> x(S.partition_ptr(), random_matrix(rng, s.dim(), s.dim()));
    auto a = gamma_via_s(x, S, P), b = apply_Gamma(ctx, x);
    CHECK((a.dense() - b.dense()).norm() <= 1e-14 * std::max(1.0, b.dense().norm()));
  }
}

TEST_CASE("split system", "[splitting]") {
  std::mt19937_64 rng(9);
  auto s = periodic(4);
  const int k = 1;
  const Index d = s.dim(), i = s.position(k);
  auto triv = trivial_partition(s);

  SECTION("B = 0") {
    auto r = split_system_solve(s, BlockMatrix<cd>::zero(triv), k);
    CHECK(hs_norm(r.X) == 0);
  }
  SECTION("decoupled blocks come back unchanged") {
    Mat<cd> m = random_matrix(rng, d, d);
    m.row(i).setZero();
    m.col(i).setZero();
    m(i, i) = cd(0.2, -0.1);
    m *= 0.5 / op_norm<cd>(m);
    auto r = split_system_solve(s, BlockMatrix<cd>(triv, m), k);
    CHECK((r.X.dense() - m).norm() <= 1e-14);
    CHECK((r.V.dense() - m).norm() <= 1e-14);
  }
  SECTION("random admissible B satisfies each block equation") {
    Mat<cd> m = random_matrix(rng, d, d);
    m *= 0.6 / op_norm<cd>(m);  // bound is 2 pi / (4 sqrt 2) ~ 1.11
    auto r = split_system_solve(s, BlockMatrix<cd>(triv, m), k, 1e-14);
    CHECK(r.certificate < 1);
    // independent plug-back: X = B G - G (JB) - G J(B G) + B, G = P X S - S X P
    Mat<cd> P = unit_proj(d, i), Q = Mat<cd>::Identity(d, d) - P;
    Mat<cd> S = s_operator(s, k).dense();
    Mat<cd> x = r.X.dense();
    Mat<cd> g = P * x * S - S * x * P;
    auto J = [&](const Mat<cd>& y) -> Mat<cd> { return P * y * P + Q * y * Q; };
    Mat<cd> bg = m * g;
    Mat<cd> defect = bg - g * J(m) - g * J(bg) + m - x;
    for (const Mat<cd>* l : {&P, &Q})
      for (const Mat<cd>* rr : {&P, &Q}) CHECK(((*l) * defect * (*rr)).norm() <= 1e-12);
    for (double e : r.equation_residuals) CHECK(e <= 1e-12);
    CHECK((r.V.dense() - J(x)).norm() == 0);
  }
  SECTION("certificate failure") {
    Mat<cd> m = random_matrix(rng, d, d);
    m *= 2.0 / op_norm<cd>(m);
    try {
      split_system_solve(s, BlockMatrix<cd>(triv, m), k);
      FAIL("expected contraction_violation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::contraction_violation);
    }
  }
}

TEST_CASE("Psi fixed point", "[splitting]") {
  std::mt19937_64 rng(14);
  auto s = periodic(6);
  auto triv = trivial_partition(s);
  const int k = 2;
  const Index d = s.dim(), i = s.position(k);
  Mat<cd> S = s_operator(s, k).dense();

  SECTION("B21 e = 0 leaves e alone") {
    Mat<cd> m = random_matrix(rng, d, d, 0.05);
    m.col(i).setZero();
    m(i, i) = cd(0.3, 0.2);
    auto r = split(s, BlockMatrix<cd>(triv, m), k);
    CHECK(r.y.norm() == 0);
    CHECK(r.lambda_prime == r.lambda - m(i, i));
    CHECK((r.e_prime - r.e).norm() == 0);
    CHECK(r.eigen_residual <= 1e-14 * r.residual_scale);
  }
  SECTION("B12 = 0 reduces to a linear solve") {
    Mat<cd> m = random_matrix(rng, d, d, 0.1);
    m.row(i).setZero();
    m(i, i) = cd(0.4, 0);
    m.col(i) = random_matrix(rng, d, 1, 0.1);
    m(i, i) = cd(0.4, 0);
    auto r = split(s, BlockMatrix<cd>(triv, m), k);
    Mat<cd> q = m;
    q.row(i).setZero();
    q.col(i).setZero();
    Vec<cd> b21 = m.col(i);
    b21(i) = 0;
    Mat<cd> lhs = Mat<cd>::Identity(d, d) - m(i, i) * S + q * S;
    Vec<cd> y = lhs.partialPivLu().solve(b21);
    Vec<cd> ep = Vec<cd>::Unit(d, i) - S * y;
    CHECK((r.e_prime - ep).norm() <= 1e-13);
    CHECK(r.b2 == cd(0));
    CHECK(r.cert.n == 0);
    CHECK_THAT(r.cert.r, WithinRel(1 / (1 - r.cert.m), 1e-15));
  }
  SECTION("ball containment and eigen-residual on random data") {
    for (int t = 0; t < 10; ++t) {
      Mat<cd> m = random_matrix(rng, d, d, 0.04);
      auto b = BlockMatrix<cd>(triv, m);
      auto c = mt6_certificate(s, b, k);
      REQUIRE(c.strict);
      auto p = psi_fixed_point(s, b, k);
      CHECK(p.max_iterate_norm <= c.r * c.b21 * (1 + 1e-12));
      auto r = split(s, b, k);
      CHECK(r.eigen_residual <= 1e-10 * r.residual_scale);
      CHECK(r.e_distance <= c.bound_e * (1 + 1e-12));
      CHECK(std::abs(r.b2) <= c.bound_b2 * (1 + 1e-12));
      // normalisation: ||e - e'/||e'|| || <= 2 eps / (1 - eps)
      const double eps = r.e_distance;
      CHECK((r.e - r.e_prime / r.e_prime.norm()).norm() <= 2 * eps / (1 - eps));
    }
  }
  SECTION("condition failure reports both sides") {
    Mat<cd> m = random_matrix(rng, d, d, 3.0);
    try {
      psi_fixed_point(s, BlockMatrix<cd>(triv, m), k);
      FAIL("expected condition_violation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::condition_violation);
      CHECK(e.data().count("lhs") == 1);
      CHECK(e.data().count("rhs") == 1);
    }
  }
  SECTION("equality case is not supported") {
    auto two = listed({0.0, 1.0});
    Mat<cd> m = Mat<cd>::Zero(2, 2);
    m(0, 0) = 1;  // m = ||b1 S|| = 1, n = 0
    auto b = BlockMatrix<cd>(trivial_partition(two), m);
    auto c = mt6_certificate(two, b, 0);
    CHECK(c.lhs == 1.0);
    CHECK(c.ok);
    CHECK(!c.strict);
    try {
      psi_fixed_point(two, b, 0);
      FAIL("expected not_supported");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::not_supported);
    }
  }
}

TEST_CASE("root r as n goes to 0", "[splitting]") {
  std::mt19937_64 rng(2);
  auto s = periodic(5);
  auto triv = trivial_partition(s);
  const int k = 0;
  const Index d = s.dim(), i = s.position(k);
  Mat<cd> m = random_matrix(rng, d, d, 0.1);
  double prev_gap = 1;
  for (double eps : {1e-2, 1e-5, 1e-8, 1e-12, 1e-16, 0.0}) {
    Mat<cd> me = m;
    me.row(i) *= eps;
    auto c = mt6_certificate(s, BlockMatrix<cd>(triv, me), k);
    REQUIRE(c.ok);
    const double lim = 1 / (1 - c.m);
    const double gap = std::abs(c.r - lim) / lim;
    CHECK(std::isfinite(c.r));
    CHECK(gap <= prev_gap);
    CHECK(gap <= 2 * c.n / ((1 - c.m) * (1 - c.m)) + 1e-15);
    prev_gap = gap;
  }
  CHECK(prev_gap == 0);
}

TEST_CASE("kernel model, k = 0", "[splitting]") {
  auto s = periodic(128);
  auto b = kernel_b(s);
  auto c = mt6_certificate(s, b, 0);
  CHECK_THAT(c.s, WithinRel(1 / (2 * kPi), 1e-14));
  CHECK_THAT(c.m, WithinRel(1 / (2 * kPi), 1e-10));  // b1 = 1, B22 = 0
  CHECK_THAT(c.b12s, WithinRel(1 / (12 * std::sqrt(5.0)), 1e-5));
  // ||B21||^2 = sum_{m != 0} 1/(4 pi^2 m^2) -> 1/12, not 1/(4 pi^2)
  CHECK(c.b21 <= std::sqrt(1.0 / 12));
  CHECK(c.b21 > std::sqrt(1.0 / 12) - 2e-3);
  CHECK(c.strict);
  // frozen at N = 128
  CHECK_THAT(c.bound_e, WithinAbs(0.054643, 2e-6));
  CHECK_THAT(c.bound_b2, WithinAbs(0.012795, 2e-6));

  auto r = split(s, b, 0);
  CHECK(r.b1 == cd(1));
  CHECK(r.eigen_residual <= 1e-10 * r.residual_scale);
  CHECK(r.e_distance <= c.bound_e);
  CHECK(std::abs(r.b2) <= c.bound_b2);
  // lambda' = 0 - 1 + b2 sits near -1
  CHECK(std::abs(r.lambda_prime + 1.0) == Catch::Approx(std::abs(r.b2)).epsilon(1e-12));
  CHECK_THAT(r.lambda_prime.real(), WithinAbs(-1.001358, 1e-6));

  // the quoted closed form uses ||B21|| = 1/(2 pi) and is too small for e
  auto disp = models::kernel_split_display(0);
  CHECK_THAT(disp.bound_e, WithinAbs(0.0302, 1e-4));
  CHECK_THAT(disp.bound_b2, WithinAbs(0.0071, 1e-4));
  CHECK(r.e_distance > disp.bound_e);

  auto oe = oracle_eigs(s.dense() - b.dense());
  double best = 1e300;
  for (const cd& z : oe) best = std::min(best, std::abs(z - r.lambda_prime));
  CHECK(best <= 1e-10);
}

TEST_CASE("kernel model, k != 0", "[splitting]") {
  auto s = periodic(64);
  auto b = kernel_b(s);
  for (int k : {1, 2, 5, -3}) {
    const double ak = std::abs(k);
    auto c = mt6_certificate(s, b, k);
    CHECK_THAT(c.s, WithinRel(1 / (2 * kPi), 1e-14));
    CHECK_THAT(c.b21, WithinRel(1 / (2 * kPi * ak), 1e-14));
    CHECK_THAT(c.b12s, WithinRel(1 / (4 * kPi * kPi * ak * ak), 1e-14));
    // window m sits above the bracket 1/(2 pi |k|)
    CHECK(c.m >= 1 / (2 * kPi * ak));
    // closed form = first-order expansion at the bracket
    const double mb = 1 / (2 * kPi * ak), om = 1 - mb;
    const double n = c.s * c.b12s * c.b21;
    const double te = c.s * c.b21 / om * (1 + n / (om * om));
    const double tb = c.b12s * c.b21 / om * (1 + n / (om * om));
    auto disp = models::kernel_split_display(k);
    CHECK_THAT(disp.bound_e, WithinRel(te, 1e-10));
    CHECK_THAT(disp.bound_b2, WithinRel(tb, 1e-10));

    auto r = split(s, b, k);
    CHECK(r.b1 == cd(0));
    CHECK(r.e_distance <= c.bound_e);
    CHECK(std::abs(r.b2) <= c.bound_b2);
    CHECK(r.eigen_residual <= 1e-10 * r.residual_scale);
  }
}

TEST_CASE("split index validation", "[splitting]") {
  auto s = periodic(4);
  auto b = kernel_b(s);
  CHECK_THROWS_AS(mt6_certificate(s, b, 9), Error);
  auto d = models::build_dirac({}, {}, {}, {}, TruncationWindow{4, 0.5}, 16);
  CHECK_THROWS_AS(s_operator(d.spec, 0), Error);
}
