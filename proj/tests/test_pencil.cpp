#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spps/pencil.hpp"

using namespace spps;

namespace {

// y'' = y (lambda + 2 lambda^2) on [0, 1]
PencilSpec intro_pencil(std::size_t n = 1001) {
  Grid g(0, 1, n);
  return PencilSpec(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                    {SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 2.0)});
}

ParticularSolution unit_u0(const Grid& g) {
  return ParticularSolution::make(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                                  Provenance::closed_form);
}

double rel_err(const SampledFunction& f, auto exact) {
  double e = 0, s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Complex v = exact(f.grid().node(i));
    e = std::max(e, std::abs(f[i] - v));
    s = std::max(s, std::abs(v));
  }
  return e / s;
}

// smooth complex coefficients on [0, 1.5] with a non-vanishing u0 built automatically
PencilSpec wiggly_pencil(std::size_t n = 1501) {
  Grid g(0, 1.5, n);
  auto p = SampledFunction::tabulate(g, [](double x) { return Complex(1 + 0.3 * x * x, 0.1 * x); });
  auto q = SampledFunction::tabulate(g, [](double x) { return Complex(std::cos(x), 0.2); });
  auto r1 = SampledFunction::tabulate(g, [](double x) { return Complex(1 + x, -0.5); });
  auto r2 = SampledFunction::tabulate(g, [](double x) { return Complex(0.5, std::sin(x)); });
  auto r3 = SampledFunction::tabulate(g, [](double x) { return Complex(0.1 * x, 0); });
  return PencilSpec(p, q, {r1, r2, r3});
}

}  // namespace

TEST(PencilSpec, Validates) {
  Grid g(0, 1, 11), h(0, 2, 11);
  auto one = SampledFunction::constant(g, 1.0);
  EXPECT_THROW(PencilSpec(one, one, {}), InputError);
  EXPECT_THROW(PencilSpec(one, one, {SampledFunction::constant(h, 1.0)}), InputError);
  EXPECT_EQ(PencilSpec(one, one, {one, one}).degree(), 2u);
}

TEST(FormalPowers, IntroExampleTable) {
  const PencilSpec spec = intro_pencil();
  const auto t = build_formal_powers(spec, unit_u0(spec.grid()), 0.0, 3);
  EXPECT_LE(rel_err(t.xt[2], [](double x) { return x * x / 2; }), 1e-10);
  EXPECT_LE(rel_err(t.xt[4], [](double x) { return x * x + std::pow(x, 4) / 24; }), 1e-10);
  EXPECT_LE(rel_err(t.xt[6], [](double x) { return std::pow(x, 4) / 6 + std::pow(x, 6) / 720; }), 1e-10);
}

TEST(FormalPowers, BaseCases) {
  const PencilSpec spec = wiggly_pencil(301);
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), 100);
  const auto t = build_formal_powers(spec, u0, spec.grid().node(100), 4);
  ASSERT_EQ(t.xt.size(), 10u);
  for (std::size_t i = 0; i < spec.grid().size(); ++i) {
    EXPECT_EQ(t.xt[0][i], Complex(1));
    EXPECT_EQ(t.x[0][i], Complex(1));
  }
  for (std::size_t k = 1; k < t.xt.size(); ++k) {
    EXPECT_EQ(t.xt[k][100], Complex(0));
    EXPECT_EQ(t.x[k][100], Complex(0));
  }
}

TEST(FormalPowers, ClassicalCoshPowers) {
  Grid g(0, 1, 501);
  const PencilSpec spec(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                        {SampledFunction::constant(g, 1.0)});
  const auto t = build_formal_powers(spec, unit_u0(g), 0.0, 5);
  for (int n = 1; n <= 5; ++n)
    EXPECT_LE(rel_err(t.xt[2 * n], [n](double x) { return std::pow(x, 2 * n) / std::tgamma(2 * n + 1.0); }), 1e-12);
}

TEST(FormalPowers, AnchorMustBeNode) {
  const PencilSpec spec = intro_pencil(11);
  EXPECT_THROW(build_formal_powers(spec, unit_u0(spec.grid()), 0.05, 2), InputError);
}

// An N = 1 pencil against the classical recursion with the factorial
// normalization Xc(n) = n int (weight) Xc(n-1), coded separately.
TEST(FormalPowers, ReducesToClassicalRecursion) {
  Grid g(-0.5, 1, 751);
  auto p = SampledFunction::tabulate(g, [](double x) { return Complex(2 + x, 0.3); });
  auto q = SampledFunction::tabulate(g, [](double x) { return Complex(x * x, -0.1); });
  auto r = SampledFunction::tabulate(g, [](double x) { return Complex(1, x); });
  const auto u0 = auto_particular_solution(p, q, 0);
  for (int extra = 0; extra < 2; ++extra) {
    std::vector<SampledFunction> rs{r};
    if (extra) rs.push_back(SampledFunction::constant(g, 0.0));
    const PencilSpec spec(p, q, rs);
    const auto t = build_formal_powers(spec, u0, g.a(), 6);

    std::vector<Complex> w1(g.size()), w2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      w1[i] = u0.u0[i] * u0.u0[i] * r[i];
      w2[i] = 1.0 / (u0.u0[i] * u0.u0[i] * p[i]);
    }
    std::vector<Complex> ct(g.size(), 1.0), cx(g.size(), 1.0);
    double fact = 1;
    for (int n = 1; n < 14; ++n) {
      std::vector<Complex> it(g.size()), ix(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        it[i] = double(n) * ct[i] * (n % 2 ? w1[i] : w2[i]);
        ix[i] = double(n) * cx[i] * (n % 2 ? w2[i] : w1[i]);
      }
      const auto Ct = cumulative_integral(SampledFunction(g, it));
      const auto Cx = cumulative_integral(SampledFunction(g, ix));
      fact *= n;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ct[i] = Ct[i];
        cx[i] = Cx[i];
      }
      double et = 0, ex = 0, st = 0, sx = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        et = std::max(et, std::abs(t.xt[n][i] - ct[i] / fact));
        ex = std::max(ex, std::abs(t.x[n][i] - cx[i] / fact));
        st = std::max(st, std::abs(ct[i] / fact));
        sx = std::max(sx, std::abs(cx[i] / fact));
      }
      EXPECT_LE(et, 1e-12 * st) << "Xt(" << n << ")";
      EXPECT_LE(ex, 1e-12 * sx) << "X(" << n << ")";
    }
  }
}

TEST(Solutions, LambdaZeroGivesU0) {
  const PencilSpec spec = wiggly_pencil(301);
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), 0);
  const SolutionPair pair(build_formal_powers(spec, u0, spec.grid().a(), 10));
  const Solution s = evaluate_solution(pair, 0.0, 1.0, 0.0);
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    EXPECT_EQ(s.u[i], u0.u0[i]);
    EXPECT_EQ(s.u_prime[i], u0.u0_prime[i]);
  }
}

TEST(Solutions, IntroExampleCosh) {
  const PencilSpec spec = intro_pencil(10001);
  const SolutionPair pair(build_formal_powers(spec, unit_u0(spec.grid()), 0.0, 30));
  const Solution s = evaluate_solution(pair, 0.1, 1.0, 0.0);
  EXPECT_NEAR(std::abs(s.u.back() - std::cosh(std::sqrt(0.12))), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s.u_prime.back() - std::sqrt(0.12) * std::sinh(std::sqrt(0.12))), 0.0, 1e-11);
}

TEST(Solutions, InitialValuesAtAnchor) {
  const PencilSpec spec = wiggly_pencil(301);
  const std::size_t a = 150;
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), a);
  const SolutionPair pair(build_formal_powers(spec, u0, spec.grid().node(a), 20));
  for (Complex lam : {Complex(0.7, -0.2), Complex(-3, 1)}) {
    const BasisSolutions b = pair.basis(lam);
    EXPECT_EQ(b.u1[a], u0.u0[a]);
    EXPECT_EQ(b.u1_prime[a], u0.u0_prime[a]);
    EXPECT_EQ(b.u2[a], Complex(0));
    EXPECT_NEAR(std::abs(b.u2_prime[a] - 1.0 / (u0.u0[a] * spec.p()[a])), 0, 1e-15);
  }
}

TEST(Solutions, WronskianIsConstant) {
  const PencilSpec spec = wiggly_pencil();
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), 0);
  const SolutionPair pair(build_formal_powers(spec, u0, spec.grid().a(), 60));
  for (Complex lam : {Complex(0), Complex(1.5, 0.5), Complex(-4, -2), Complex(0, 6)}) {
    const auto w = scaled_wronskian(spec, pair.basis(lam));
    EXPECT_NEAR(std::abs(w[0] - 1.0), 0, 1e-14);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(w[i] - 1.0), 1e-8) << lam;
  }
}

TEST(Solutions, OdeIntegralResidual) {
  const PencilSpec spec = wiggly_pencil();
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), 0);
  const SolutionPair pair(build_formal_powers(spec, u0, spec.grid().a(), 60));
  for (Complex lam : {Complex(0.3), Complex(2, -1), Complex(-5, 3)}) {
    for (auto [c1, c2] : {std::pair<Complex, Complex>{1, 0}, {0, 1}, {Complex(0.5, 1), Complex(-2, 0.1)}}) {
      const Solution s = evaluate_solution(pair, lam, c1, c2);
      EXPECT_LE(ode_integral_residual(spec, lam, s.u, s.u_prime, 0), 1e-8) << lam;
    }
  }
}

TEST(Solutions, StreamingMatchesTable) {
  const PencilSpec spec = wiggly_pencil(301);
  const auto u0 = auto_particular_solution(spec.p(), spec.q(), 0);
  const auto t = build_formal_powers(spec, u0, spec.grid().a(), 25);
  const Complex lam(1.2, -0.7);
  const auto a = basis_at(t, lam);
  const auto b = basis_streaming(spec, u0, 0, 25, lam);
  for (std::size_t i = 0; i < a.u1.size(); ++i) {
    EXPECT_NEAR(std::abs(a.u1[i] - b.u1[i]), 0, 1e-12 * std::abs(a.u1[i]) + 1e-14);
    EXPECT_NEAR(std::abs(a.u2_prime[i] - b.u2_prime[i]), 0, 1e-12 * std::abs(a.u2_prime[i]) + 1e-14);
  }
}

TEST(ParticularSolution, AutoConstruction) {
  {
    Grid g(0, 1, 101);
    const auto u = auto_particular_solution(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0), 0);
    EXPECT_EQ(u.provenance, Provenance::spps_built);
    EXPECT_LE(rel_err(u.u0, [](double x) { return Complex(1, x); }), 1e-14);
  }
  {
    Grid g(0, 1, 501);
    const auto u = auto_particular_solution(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, -1.0), 0);
    EXPECT_LE(rel_err(u.u0, [](double x) { return Complex(std::cosh(x), std::sinh(x)); }), 1e-10);
    EXPECT_LE(rel_err(u.u0_prime, [](double x) { return Complex(std::sinh(x), std::cosh(x)); }), 1e-10);
  }
  {
    Grid g(0, std::acos(-1.0) / 2, 501);
    const auto u = auto_particular_solution(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 1.0), 0);
    EXPECT_LE(rel_err(u.u0, [](double x) { return std::exp(Complex(0, x)); }), 1e-10);
    EXPECT_GT(u.min_modulus, 0.99);
  }
}

TEST(ParticularSolution, RejectsVanishing) {
  Grid g(-1, 1, 21);
  auto x = SampledFunction::tabulate(g, [](double t) { return t; });
  EXPECT_THROW(ParticularSolution::make(x, SampledFunction::constant(g, 1.0), Provenance::user_supplied), NodeError);
  try {
    (void)build_particular_solution(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                                    std::pair{x, SampledFunction::constant(g, 1.0)});
    FAIL();
  } catch (const NodeError& e) {
    EXPECT_EQ(e.node(), 10u);
  }
}

TEST(TailBound, Examples) {
  EXPECT_EQ(tail_bound_from(0, 2, 10), 0.0);
  const double t = tail_bound_from(1, 1, 10);
  EXPECT_GE(t, 1 / std::tgamma(23.0));
  EXPECT_LE(t, 2e-21);
  EXPECT_TRUE(std::isinf(tail_bound_from(1e6, 1, 10)));
}

TEST(TailBound, Monotone) {
  const PencilSpec spec = intro_pencil(101);
  const auto u0 = unit_u0(spec.grid());
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t M : {5u, 10u, 20u, 40u, 80u}) {
    const double b = tail_bound(spec, u0, 1.0, M);
    EXPECT_LE(b, prev);
    prev = b;
  }
  prev = 0;
  for (double lam : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0}) {
    const double b = tail_bound(spec, u0, lam, 20);
    EXPECT_GE(b, prev);
    prev = b;
  }
  const MajorantSeries maj(2.0, 2);
  prev = std::numeric_limits<double>::infinity();
  for (std::size_t M : {5u, 10u, 20u, 40u}) {
    const double b = maj.even_tail(1.5, M);
    EXPECT_LE(b, prev);
    EXPECT_TRUE(std::isfinite(b));
    prev = b;
  }
}

// The tail bound dominates the observed M vs 2M truncation difference.
TEST(TailBound, BoundsObservedTail) {
  const PencilSpec spec = intro_pencil(1001);
  const auto u0 = unit_u0(spec.grid());
  const std::size_t M = 8;
  const auto t = build_formal_powers(spec, u0, 0.0, 2 * M);
  const double bound = tail_bound(spec, u0, 1.0, M);
  const MajorantSeries maj(coefficient_majorant(spec, u0) * spec.grid().length(), 2);
  for (int k = 0; k < 16; ++k) {
    const Complex lam = std::polar(1.0, 2 * 3.14159265358979 * k / 16);
    Complex full = 0, trunc = 0, lk = 1;
    for (std::size_t n = 0; n <= 2 * M; ++n) {
      full += lk * t.xt[2 * n].back();
      if (n <= M) trunc += lk * t.xt[2 * n].back();
      lk *= lam;
    }
    EXPECT_LE(std::abs(full - trunc), bound);
    EXPECT_LE(std::abs(full - trunc), maj.even_tail(1.0, M + 1));
  }
  for (std::size_t n = 0; n <= 2 * M; ++n) {
    EXPECT_LE(t.xt[2 * n].max_abs(), std::exp(maj.log_even(n)) * (1 + 1e-12));
    EXPECT_LE(t.x[2 * n + 1].max_abs(), std::exp(maj.log_odd(n)) * (1 + 1e-12));
  }
}
