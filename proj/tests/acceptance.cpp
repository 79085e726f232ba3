// One PASS/FAIL line per acceptance criterion, with the measured evidence.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "cli_app.hpp"
#include "simop/models.hpp"
#include "simop/similarity.hpp"
#include "simop/splitting.hpp"
#include "simop/verify.hpp"
#include "simop/weighted.hpp"

using namespace simop;
using namespace simop::cli;
namespace fs = std::filesystem;

namespace {

const double kPi = std::acos(-1.0);

struct Verdict {
  bool pass = false;
  std::string evidence;
};

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Spectrum<cd> periodic(int N) { return models::first_derivative_spectrum(0.0, TruncationWindow{N, 0.5}); }

BlockMatrix<cd> kernel_b(const Spectrum<cd>& s) {
  return models::integral_perturbation(s, models::kernel_sum_coefficients(s.window().N));
}

json kernel_config(int N, int k) {
  json j = json::parse(R"({
    "schema_version": 1,
    "model": {"family": "first_derivative_integral", "theta": 0, "kernel": "sum"},
    "tolerances": {"tol": 1e-12, "max_iter": 200, "contraction_margin": 0.99},
    "pipeline": "auto",
    "oracle": true
  })");
  j["truncation"] = {{"N", N}, {"interior_fraction", 0.5}};
  j["split_k"] = k;
  return j;
}

RunOptions in_memory() {
  RunOptions o;
  o.write_files = false;
  return o;
}

Verdict c1() {
  auto t0 = std::chrono::steady_clock::now();
  auto s = periodic(512);
  double hs = hs_norm(kernel_b(s));
  double dt = seconds_since(t0);
  double target = std::sqrt(7.0 / 6.0);
  bool ok = hs >= target - 1e-3 && hs <= target && dt < 5;
  return {ok, fmt("hs(B)=%.9f target=%.9f gap=%.2e time=%.2fs", hs, target, target - hs, dt)};
}

Verdict c2() {
  auto cfg = parse_config(kernel_config(64, 0), fs::current_path());
  auto r = cmd_split(cfg, in_memory());
  if (r.exit_code != 0) return {false, "cmd_split k=0 exit " + std::to_string(r.exit_code)};
  const auto& sp = r.report["certificates"]["splitting"];
  double be = sp["bound_e"], bb = sp["bound_b2"];
  bool k0 = std::abs(be - 0.0302) <= 1e-3 && std::abs(bb - 0.0071) <= 5e-4;
  double e_dist = r.report["pipeline"]["e_distance"];
  std::string ev = fmt("k=0 bound_e=%.6f (want 0.0302+-0.001) bound_b2=%.6f (want 0.0071+-0.0005) ||e-e'||=%.6f", be,
                       bb, e_dist);

  // k != 0: quoted closed form against the first-order expansion built from
  // the computed s, ||B21||, ||B12 S|| with m at 1/(2 pi |k|)
  double worst = 0;
  for (int k : {1, 2, 5}) {
    auto ck = parse_config(kernel_config(64, k), fs::current_path());
    auto rk = cmd_split(ck, in_memory());
    if (rk.exit_code != 0) return {false, ev + fmt("; cmd_split k=%d exit %d", k, rk.exit_code)};
    const auto& c = rk.report["certificates"]["splitting"];
    double s = c["s"], b21 = c["b21"], b12s = c["b12s"];
    double om = 1 - 1 / (2 * kPi * k), n = s * b12s * b21;
    double te = s * b21 / om * (1 + n / (om * om));
    double tb = b12s * b21 / om * (1 + n / (om * om));
    auto d = models::kernel_split_display(k);
    worst = std::max({worst, std::abs(te - d.bound_e) / d.bound_e, std::abs(tb - d.bound_b2) / d.bound_b2});
    ev += fmt("; k=%d display e=%.7f b2=%.8f window e=%.7f", k, d.bound_e, d.bound_b2, c["bound_e"].get<double>());
  }
  bool kn = worst <= 1e-10;
  ev += fmt("; k in {1,2,5} max rel diff %.1e", worst);
  if (!k0) ev += "; k=0 quoted values use ||B21||=1/(2pi) while ||B21|| -> 1/sqrt(12), and ||e-e'|| exceeds 0.0302";
  return {k0 && kn, ev};
}

Verdict c3() {
  auto cfg = parse_config(kernel_config(256, 0), fs::current_path());
  auto r = cmd_split(cfg, in_memory());
  if (r.exit_code != 0) return {false, "cmd_split N=256 exit " + std::to_string(r.exit_code)};
  double dist = r.report["spectrum_report"]["distance_to_lambda_prime"];
  double bb = r.report["certificates"]["splitting"]["bound_b2"];
  double lp = r.report["pipeline"]["lambda_prime"][0];
  bool contain = dist <= bb + 1e-3;

  auto s = periodic(256);
  auto b = kernel_b(s);
  auto oracle = oracle_eigs(s.dense() - b.dense());
  std::vector<double> d;
  for (int k = 1; k <= 8; ++k) {
    cd lk(0, 2 * kPi * k);
    double best = 1e300;
    for (auto z : oracle) best = std::min(best, std::abs(z - lk));
    d.push_back(best * k * k * k);
  }
  double lo = *std::min_element(d.begin(), d.end()), hi = *std::max_element(d.begin(), d.end());
  bool decay = hi <= 4 * lo;
  return {contain && decay,
          fmt("lambda'=%.8f |oracle-lambda'|=%.2e bound=%.2e; k^3|d_k| over k=1..8 in [%.4e, %.4e] spread %.2f", lp,
              dist, bb + 1e-3, lo, hi, hi / lo)};
}

Verdict c4() {
  auto s = periodic(128);
  auto b = kernel_b(s);
  auto ctx = TransformContext<cd>::from(s, trivial_partition(s));
  StageSpace space;
  space.kind = StageNorm::hs;
  space.gamma = 1 / (2 * kPi);
  FixedPointOptions fo;
  fo.tol = 1e-12;
  fo.max_iter = 200;
  auto r = fixed_point(b, ctx, space, fo);
  double cap = 4 / (2 * kPi) * std::sqrt(7.0 / 6.0) + 0.05;
  double worst = 0;
  for (double q : r.ratios) worst = std::max(worst, q);
  bool ok = worst <= cap && r.iterations <= 60;
  return {ok, fmt("max successive ratio %.4f cap %.4f; iterations %d; certificate %.4f", worst, cap, r.iterations,
                  r.certificate)};
}

Verdict c5() {
  struct Case {
    std::string name;
    Spectrum<cd> s;
    BlockMatrix<cd> b;
    std::function<SimilarityResult(const Spectrum<cd>&, const BlockMatrix<cd>&)> run;
  };
  std::vector<Case> cases;
  for (int N : {16, 64, 256}) {
    auto s = periodic(N);
    cases.push_back({"kernel auto N=" + std::to_string(N), s, kernel_b(s),
                     [](auto& a, auto& b) { return pipeline_auto(a, b, {}); }});
  }
  {
    auto s = periodic(64);
    cases.push_back({"kernel mt12 N=64", s, kernel_b(s), [](auto& a, auto& b) { return pipeline_mt12(a, b, {}); }});
    cases.push_back({"kernel mt2 N=64", s, kernel_b(s), [](auto& a, auto& b) { return pipeline_mt2(a, b, {}); }});
  }
  {
    auto v = models::random_real_trig(3, 11, 0.3);
    auto s = models::first_derivative_spectrum(0.0, TruncationWindow{48, 0.5});
    cases.push_back({"involution auto N=48", s, models::involution_perturbation(s, v, 0.0),
                     [](auto& a, auto& b) { return pipeline_auto(a, b, {}); }});
  }
  {
    auto v = models::random_real_trig(8, 3, 0.5);
    auto s = models::hill_spectrum(0.5, TruncationWindow{64, 0.5});
    cases.push_back({"hill mt3 N=64", s, models::hill_perturbation(s, v),
                     [](auto& a, auto& b) { return pipeline_mt3(a, b, {}); }});
  }
  {
    auto d = models::build_dirac(models::random_real_trig(2, 5, 0.2), models::random_real_trig(2, 6, 0.2),
                                 models::random_real_trig(2, 7, 0.2), models::random_real_trig(2, 8, 0.2),
                                 TruncationWindow{24, 0.5}, 128);
    cases.push_back({"dirac mt4 N=24", d.spec, d.b_tilde, [](auto& a, auto& b) { return pipeline_mt4(a, b, {}); }});
  }
  bool ok = true;
  int accepted = 0;
  std::string ev;
  for (auto& c : cases) {
    if (!ev.empty()) ev += "; ";
    SimilarityResult r;
    try {
      r = c.run(c.s, c.b);
    } catch (const Error& e) {
      // a declined run is not an accepted one
      ev += c.name + " declined (" + e.what() + ")";
      continue;
    }
    ++accepted;
    double scale = op_norm<cd>(c.s.dense()) + hs_norm(c.b);
    auto res = similarity_residual(c.s, c.b, r.U, r.V);
    double off = offdiag_residual(r.V);
    double hv = hs_norm(r.V);
    double eig = multiset_distance(block_eigenvalues(c.s, r.V), oracle_eigs(c.s.dense() - c.b.dense()));
    bool pass = res.full <= 1e-9 * scale && off <= 1e-10 * hv && eig <= 1e-8;
    ok = ok && pass;
    ev += fmt("%s[%s] res/scale=%.1e off/hs(V)=%.1e eig=%.1e%s", c.name.c_str(), r.pipeline.c_str(),
              res.full / scale, hv > 0 ? off / hv : 0.0, eig, pass ? "" : " FAIL");
  }
  return {ok && accepted > 0, fmt("%d accepted runs: ", accepted) + ev};
}

Verdict c6() {
  const double theta = 0.5;
  const int N = 128;
  auto v = models::random_real_trig(8, 2024, 0.5);
  auto s = models::hill_spectrum(theta, TruncationWindow{N, 0.5});
  auto b = models::hill_perturbation(s, v);
  auto a = asymptotic_sequences(s, b);
  double qerr = 0;
  for (size_t i = 0; i < a.n.size(); ++i) qerr = std::max(qerr, std::abs(a.q[i] - models::hill_q(v, theta, a.n[i], N)));

  std::vector<cd> p(static_cast<size_t>(s.size())), q = p;
  for (size_t i = 0; i < a.n.size(); ++i) {
    p[static_cast<size_t>(s.position(a.n[i]))] = a.p[i];
    q[static_cast<size_t>(s.position(a.n[i]))] = a.q[i];
  }
  auto oracle = oracle_eigs(s.dense() - b.dense());
  auto rep = build_spectrum_report(s, oracle, oracle, p, q, nullptr);
  int better = 0;
  for (const auto& row : rep.rows)
    if (std::abs(row.b - row.p - row.q) < std::abs(row.b)) ++better;
  double frac = static_cast<double>(better) / static_cast<double>(rep.rows.size());
  bool ok = qerr <= 1e-10 && frac >= 0.9;
  return {ok, fmt("max |q_n - closed form| %.1e over %zu interior n; |b-p-q| < |b| for %d/%zu (%.1f%%)", qerr,
                  a.n.size(), better, rep.rows.size(), 100 * frac)};
}

Verdict c7() {
  int good = 0;
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    auto v = models::random_real_trig(1 + t % 6, 100 + static_cast<std::uint64_t>(t), 1.0);
    auto r = models::involution_inequality(v, 32);
    if (r.lhs <= r.rhs + r.slack) ++good;
    worst = std::max(worst, r.lhs / r.rhs);
  }
  return {good == 50, fmt("%d/50 samples within (9/4)||v||^4 + slack; max lhs/rhs %.4f", good, worst)};
}

Verdict c8() {
  auto s = periodic(64);
  auto b = kernel_b(s);
  auto res = pipeline_mt1(s, b, {});
  auto ctx = TransformContext<cd>::from(s, trivial_partition(s));
  auto w = alpha_sequence(b, ctx);
  double prev = 1e300, first = 0, last = 0;
  bool mono = true, under = true;
  for (int n = 4; n <= 32; ++n) {
    std::vector<Index> sig;
    for (int k = -64; k <= 64; ++k)
      if (std::abs(k) >= n) sig.push_back(s.position(k));
    auto r = projection_compare(res.U, sig, w);
    mono = mono && r.lhs <= prev + 1e-10;
    under = under && r.lhs <= r.rhs;
    if (n == 4) first = r.lhs;
    last = r.lhs;
    prev = r.lhs;
  }
  return {mono && under, fmt("lhs n=4 %.3e -> n=32 %.3e; monotone %s; lhs<=rhs %s", first, last, mono ? "yes" : "no",
                             under ? "yes" : "no")};
}

double weighted_tail(int N) {
  auto s = periodic(N);
  auto b = kernel_b(s);
  auto ctx = TransformContext<cd>::from(s, trivial_partition(s));
  auto w = alpha_sequence(b, ctx);
  auto oracle = oracle_eigs(s.dense() - b.dense());
  return build_spectrum_report(s, oracle, oracle, {}, {}, &w).weighted_tail;
}

Verdict c9() {
  double t128 = weighted_tail(128), t256 = weighted_tail(256);
  double rel = std::abs(t256 - t128) / t128;
  return {rel <= 0.05, fmt("weighted tail N=128 %.6e, N=256 %.6e, change %.2f%%", t128, t256, 100 * rel)};
}

Verdict c10() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    Index d = 1 + t % 8;
    Mat<cd> m(d, d);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < d; ++i) m(i, j) = cd(nd(rng), nd(rng));
    worst = std::max(worst, multiset_distance(oracle_eigs(m), poly_oracle_eigs(m)));
  }
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = load_config(fs::path(SIMOP_EXAMPLES_DIR) / "kernel_sum.json");
  auto r = cmd_verify(cfg, in_memory());
  double dt = seconds_since(t0);
  bool ok = worst <= 1e-10 && r.exit_code == 0 && dt < 60;
  return {ok, fmt("max QR vs root distance %.1e over 100 matrices; cmd_verify exit %d in %.2fs", worst, r.exit_code,
                  dt)};
}

}  // namespace

int main() {
  std::vector<std::function<Verdict()>> crits{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};
  int failed = 0;
  for (size_t i = 0; i < crits.size(); ++i) {
    Verdict v;
    try {
      v = crits[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %zu: %s\n", v.pass ? "PASS" : "FAIL", i + 1, v.evidence.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
