#include "simop/models.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace simop::models {

namespace {

const double kPi = std::acos(-1.0);
const cd kI(0, 1);

int support_radius(const Coeffs& v) {
  int d = 0;
  for (const auto& [k, c] : v)
    if (c != cd(0)) d = std::max(d, std::abs(k));
  return d;
}

// Fourier coefficient r of e^{2 pi i theta t} on [0,1], theta not an integer.
cd phase_coeff(double theta, int r) {
  return (std::exp(2 * kPi * kI * theta) - 1.0) / (2 * kPi * kI * (theta - r));
}

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-15; }

cd eval(const Coeffs& v, double t) {
  cd s = 0;
  for (const auto& [k, c] : v) s += c * std::exp(2 * kPi * kI * (static_cast<double>(k) * t));
  return s;
}

}  // namespace

cd coeff(const Coeffs& c, int k) {
  auto it = c.find(k);
  return it == c.end() ? cd(0) : it->second;
}

Spectrum<cd> first_derivative_spectrum(double theta, const TruncationWindow& w) {
  if (!(theta >= 0 && theta < 2)) throw Error(ErrorKind::invalid_input, "theta must lie in [0,2)", {{"theta", theta}});
  return make_spectrum<cd>(w, [&](int k) { return kPi * kI * (2.0 * k - theta); });
}

Coeffs2 kernel_sum_coefficients(int N) {
  Coeffs2 c;
  c[{0, 0}] = 1;
  for (int j = -2 * N; j <= 2 * N; ++j) {
    if (j == 0) continue;
    c[{j, 0}] = -1.0 / (2 * kPi * kI * static_cast<double>(j));
    c[{0, j}] = -1.0 / (2 * kPi * kI * static_cast<double>(j));
  }
  return c;
}

BlockMatrix<cd> integral_perturbation(const Spectrum<cd>& spec, const Coeffs2& khat) {
  const Index d = spec.dim();
  Mat<cd> m = Mat<cd>::Zero(d, d);
  for (Index a = 0; a < spec.size(); ++a)
    for (Index b = 0; b < spec.size(); ++b) {
      auto it = khat.find({-spec.entry(a).index, spec.entry(b).index});
      if (it != khat.end()) m(spec.offset(a), spec.offset(b)) = it->second;
    }
  return BlockMatrix<cd>(trivial_partition(spec), std::move(m));
}

cd tilde_coeff(const Coeffs& v, double theta, int k) {
  if (is_integer(theta)) return coeff(v, k - static_cast<int>(std::lround(theta)));
  cd s = 0;
  for (const auto& [j, c] : v) s += c * phase_coeff(theta, k - j);
  return s;
}

BlockMatrix<cd> involution_perturbation(const Spectrum<cd>& spec, const Coeffs& v, double theta) {
  const int N = spec.window().N;
  std::vector<cd> vt(static_cast<size_t>(4 * N + 1));
  for (int k = -2 * N; k <= 2 * N; ++k) vt[static_cast<size_t>(k + 2 * N)] = tilde_coeff(v, theta, k);
  const cd ph = std::exp(-kI * kPi * theta);
  const Index d = spec.dim();
  Mat<cd> m(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b)
      m(a, b) = ph * vt[static_cast<size_t>(spec.entry(a).index + spec.entry(b).index + 2 * N)];
  return BlockMatrix<cd>(trivial_partition(spec), std::move(m));
}

cd involution_p(const Coeffs& v, double theta, int n) {
  return std::exp(-kI * kPi * theta) * tilde_coeff(v, theta, 2 * n);
}

cd involution_q(const Coeffs& v, double theta, int n, int N) {
  const cd ph = std::exp(-2.0 * kI * kPi * theta);
  cd s = 0;
  for (int l = -N; l <= N; ++l) {
    if (l == n) continue;
    cd t = tilde_coeff(v, theta, l + n);
    s += ph * t * t / (2 * kPi * kI * static_cast<double>(l - n));
  }
  return s;
}

InvolutionInequality involution_inequality(const Coeffs& v, int W) {
  InvolutionInequality r;
  double v2 = 0;
  for (const auto& kv : v) v2 += std::norm(kv.second);
  r.rhs = 2.25 * v2 * v2;
  double sum = 0;
  for (int m = -W; m <= W; ++m)
    for (int n = -W; n <= W; ++n) {
      cd inner = 0;
      // l + n = j runs over the support of v
      for (const auto& [j, c] : v) {
        if (j == 2 * n) continue;
        inner += coeff(v, j + m - n) * c / static_cast<double>(j - 2 * n);
      }
      sum += std::norm(inner);
    }
  r.lhs = sum / (4 * kPi * kPi);

  // outside the window |n| > W - 2d, and |j - 2n| >= 2|n| - d there
  const int d = support_radius(v);
  double c = 0;
  for (int t = -2 * d; t <= 2 * d; ++t) {
    double a = 0;
    for (const auto& [j, cj] : v) a += std::abs(coeff(v, j + t)) * std::abs(cj);
    c += a * a;
  }
  const int w2 = W - 2 * d;
  r.slack = 2 * w2 > d ? c / (4 * kPi * kPi * (2.0 * w2 - d)) : std::numeric_limits<double>::infinity();
  r.ok = r.lhs <= r.rhs + r.slack;
  return r;
}

cd dirac_g(const Coeffs& v1, const Coeffs& v4, double t) {
  cd s = 0;
  for (const auto& [k, c] : v1)
    if (k != 0) s += c * (std::exp(2 * kPi * kI * (k * t)) - 1.0) / (2 * kPi * kI * static_cast<double>(k));
  for (const auto& [k, c] : v4)
    if (k != 0) s += c * (std::exp(2 * kPi * kI * (k * t)) - 1.0) / (2 * kPi * kI * static_cast<double>(k));
  return s;
}

DiracModel build_dirac(const Coeffs& v1, const Coeffs& v2, const Coeffs& v3, const Coeffs& v4,
                       const TruncationWindow& w, int grid_points) {
  w.validate();
  const int N = w.N;
  if (grid_points < 4 * N || (grid_points & (grid_points - 1)) != 0)
    throw Error(ErrorKind::invalid_input, "Dirac grid must be a power of two with at least 4N points",
                {{"grid_points", grid_points}, {"N", N}});

  DiracModel out;
  out.spec = make_spectrum<cd>(w, [](int n) { return cd(2 * kPi * n, 0); }, 2);
  const Spectrum<cd>& spec = out.spec;

  // u2 = v2 e^{ig}, u3 = v3 e^{-ig} sampled on t_j = j/G, then transformed
  const int G = grid_points;
  std::vector<cd> u2(static_cast<size_t>(G)), u3(static_cast<size_t>(G));
  for (int j = 0; j < G; ++j) {
    double t = static_cast<double>(j) / G;
    cd eg = std::exp(kI * dirac_g(v1, v4, t));
    u2[static_cast<size_t>(j)] = eval(v2, t) * eg;
    u3[static_cast<size_t>(j)] = eval(v3, t) / eg;
  }
  for (int k = -2 * N; k <= 2 * N; ++k) {
    cd s2 = 0, s3 = 0;
    for (int j = 0; j < G; ++j) {
      cd e = std::exp(-2 * kPi * kI * (static_cast<double>(k) * j / G));
      s2 += u2[static_cast<size_t>(j)] * e;
      s3 += u3[static_cast<size_t>(j)] * e;
    }
    out.u2[k] = s2 / static_cast<double>(G);
    out.u3[k] = s3 / static_cast<double>(G);
  }

  const Index d = spec.dim();
  Mat<cd> b = Mat<cd>::Zero(d, d), bt = Mat<cd>::Zero(d, d);
  for (Index a = 0; a < spec.size(); ++a)
    for (Index c = 0; c < spec.size(); ++c) {
      const int m = spec.entry(a).index, n = spec.entry(c).index;
      const Index r = spec.offset(a), col = spec.offset(c);
      b(r, col) = coeff(v1, n - m);
      b(r, col + 1) = coeff(v2, -m - n);
      b(r + 1, col) = coeff(v3, m + n);
      b(r + 1, col + 1) = coeff(v4, m - n);
      if (m == n) {
        bt(r, col) = coeff(v1, 0);
        bt(r + 1, col + 1) = coeff(v4, 0);
      }
      bt(r, col + 1) = coeff(out.u2, -m - n);
      bt(r + 1, col) = coeff(out.u3, m + n);
    }
  auto part = trivial_partition(spec);
  out.b = BlockMatrix<cd>(part, std::move(b));
  out.b_tilde = BlockMatrix<cd>(part, std::move(bt));
  return out;
}

Spectrum<cd> hill_spectrum(double theta, const TruncationWindow& w) {
  if (!(theta > 0 && theta < 1)) throw Error(ErrorKind::invalid_input, "Hill theta must lie in (0,1)", {{"theta", theta}});
  return make_spectrum<cd>(w, [&](int n) {
    double x = kPi * (2.0 * n - theta);
    return cd(x * x, 0);
  });
}

BlockMatrix<cd> hill_perturbation(const Spectrum<cd>& spec, const Coeffs& v) {
  const Index d = spec.dim();
  Mat<cd> m(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) m(a, b) = coeff(v, spec.entry(a).index - spec.entry(b).index);
  return BlockMatrix<cd>(trivial_partition(spec), std::move(m));
}

cd hill_q(const Coeffs& v, double theta, int n, int N) {
  cd s = 0;
  for (int l = -N; l <= N; ++l) {
    if (l == n) continue;
    s += coeff(v, n - l) * coeff(v, l - n) / (static_cast<double>(l - n) * (l + n - theta));
  }
  return s / (4 * kPi * kPi);
}

Coeffs random_real_trig(int degree, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Coeffs c;
  c[0] = cd(u(rng), 0);
  for (int k = 1; k <= degree; ++k) {
    cd z(u(rng), u(rng));
    c[k] = z;
    c[-k] = std::conj(z);
  }
  return c;
}

KernelSplitDisplay kernel_split_display(int k) {
  if (k == 0) {
    double root = 2 * kPi - 1 - std::sqrt((2 * kPi - 1) * (2 * kPi - 1) - 1 / (3 * std::sqrt(5.0)));
    return {3 * std::sqrt(5.0) / kPi * root, 0.5 * root};
  }
  double ak = std::abs(k);
  double a = 2 * kPi * ak - 1;
  double corr = 1 + 1 / (4 * kPi * kPi * ak * a * a);
  return {corr / (2 * kPi * a), corr / (4 * kPi * kPi * ak * ak * a)};
}

double kernel_alpha_bound(int n) {
  if (n <= 1) throw Error(ErrorKind::invalid_input, "bound holds for n > 1", {{"n", n}});
  // both tails |k| >= n carry sum 1/(4 pi^2 k^2) <= 1/(4 pi^2 (n-1)) each; ||B||^2 = 7/6
  return std::pow(3 / (7 * kPi * kPi * (n - 1)), 0.25);
}

}  // namespace simop::models
