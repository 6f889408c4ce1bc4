#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spps/grid.hpp"

using namespace spps;

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(1, 0, 11), InputError);
  EXPECT_THROW(Grid(0, 1, 5), InputError);
  EXPECT_THROW(Grid(0, 1, 12), InputError);
  EXPECT_NO_THROW(Grid(0, 1, 6));
}

TEST(Grid, NodesAndIndex) {
  Grid g(0, 1, 11);
  EXPECT_DOUBLE_EQ(g.node(0), 0.0);
  EXPECT_EQ(g.node(10), 1.0);
  EXPECT_NEAR(g.node(3), 0.3, 1e-15);
  EXPECT_EQ(g.index_of(0.7), 7u);
  EXPECT_THROW(g.index_of(0.75), InputError);
}

TEST(SampledFunction, RejectsNonFinite) {
  Grid g(0, 1, 6);
  EXPECT_THROW(SampledFunction(g, std::vector<Complex>(5)), InputError);
  std::vector<Complex> v(6, 1.0);
  v[2] = std::nan("");
  EXPECT_THROW(SampledFunction(g, v), NodeError);
}

TEST(CumulativeIntegral, ConstantIsExact) {
  Grid g(0, 1, 11);
  const auto F = cumulative_integral(SampledFunction::constant(g, 1.0));
  EXPECT_EQ(F[0], Complex(0));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(F[i] - g.node(i)), 0.0, 1e-15);
}

TEST(CumulativeIntegral, QuinticOnSixNodes) {
  Grid g(0, 1, 6);
  const auto F = cumulative_integral(SampledFunction::tabulate(g, [](double x) { return std::pow(x, 5); }));
  EXPECT_NEAR(F.back().real(), 1.0 / 6.0, 1e-15);
}

TEST(CumulativeIntegral, ExactOnPolynomialsUpToDegreeFive) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int deg = 0; deg <= 5; ++deg) {
    for (std::size_t n : {6u, 11u, 26u, 101u}) {
      const double a = U(rng), b = a + 0.5 + std::abs(U(rng));
      Grid g(a, b, n);
      std::vector<Complex> c(deg + 1);
      for (auto& ck : c) ck = {U(rng), U(rng)};
      auto poly = [&](double x) {
        Complex s = 0;
        for (int k = deg; k >= 0; --k) s = s * x + c[k];
        return s;
      };
      auto prim = [&](double x) {
        Complex s = 0;
        for (int k = deg; k >= 0; --k) s = s * x + c[k] / double(k + 1);
        return s * x;
      };
      const auto F = cumulative_integral(SampledFunction::tabulate(g, poly));
      double scale = 0;
      for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(prim(g.node(i)) - prim(a)));
      for (std::size_t i = 0; i < n; ++i)
        EXPECT_LE(std::abs(F[i] - (prim(g.node(i)) - prim(a))), 1e-13 * scale) << "deg " << deg << " n " << n;
    }
  }
}

TEST(CumulativeIntegral, AnchoredAtInteriorNode) {
  Grid g(-1, 1, 21);
  const auto F = cumulative_integral(SampledFunction::tabulate(g, [](double x) { return 3 * x * x; }), 10);
  EXPECT_EQ(F[10], Complex(0));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(F[i].real(), std::pow(g.node(i), 3), 1e-14);
}

TEST(CumulativeIntegral, Linearity) {
  Grid g(0, 2, 51);
  const auto f = SampledFunction::tabulate(g, [](double x) { return std::sin(3 * x); });
  const auto h = SampledFunction::tabulate(g, [](double x) { return Complex(std::exp(x), x); });
  const Complex al(0.3, -1.2), be(2.5, 0.7);
  const auto lhs = cumulative_integral(al * f + be * h);
  const auto rhs = al * cumulative_integral(f) + be * cumulative_integral(h);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(std::abs(lhs[i] - rhs[i]), 1e-14);
}

static double exp_error(std::size_t n) {
  Grid g(0, 1, n);
  const auto F = cumulative_integral(SampledFunction::tabulate(g, [](double x) { return std::exp(x); }));
  double e = 0;
  for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(F[i] - (std::exp(g.node(i)) - 1)));
  return e;
}

TEST(CumulativeIntegral, RichardsonRatioForExp) {
  const double r = exp_error(11) / exp_error(21);
  EXPECT_GT(r, 40.0);
  EXPECT_LT(r, 110.0);
}

TEST(CumulativeIntegral, ConvergenceOrder) {
  for (int which = 0; which < 2; ++which) {
    auto err = [&](std::size_t n) {
      Grid g(0, 2, n);
      auto f = [&](double x) { return which ? std::sin(2 * x) : std::exp(x); };
      auto F_exact = [&](double x) { return which ? (1 - std::cos(2 * x)) / 2 : std::exp(x) - 1; };
      const auto F = cumulative_integral(SampledFunction::tabulate(g, f));
      double e = 0;
      for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(F[i] - F_exact(g.node(i))));
      return e;
    };
    const double order = std::log2(err(21) / err(41));
    EXPECT_GE(order, 5.5) << (which ? "sin" : "exp");
  }
}

TEST(PointwiseCombine, Basics) {
  Grid g(0, 1, 11);
  const auto two = SampledFunction::constant(g, 2.0), three = SampledFunction::constant(g, 3.0);
  const auto six = two * three;
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(six[i], Complex(6));
  const auto f = SampledFunction::tabulate(g, [](double x) { return Complex(1 + x, x); });
  const auto one = f / f;
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(one[i] - 1.0), 0, 1e-15);
  const auto x = SampledFunction::tabulate(g, [](double t) { return t; });
  const auto z = x + SampledFunction::tabulate(g, [](double t) { return -t; });
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(z[i], Complex(0));
}

TEST(PointwiseCombine, DivisionFloorNamesNode) {
  Grid g(0, 1, 11);
  const auto x = SampledFunction::tabulate(g, [](double t) { return t; });
  try {
    (void)(SampledFunction::constant(g, 1.0) / x);
    FAIL();
  } catch (const NodeError& e) {
    EXPECT_EQ(e.node(), 0u);
  }
  EXPECT_THROW(pointwise_combine(x, x, Combine::div, 0.5), NodeError);
  EXPECT_THROW(x + SampledFunction::constant(Grid(0, 2, 11), 1.0), InputError);
}

TEST(Derivative, SixthOrder) {
  auto err = [](std::size_t n) {
    Grid g(0, 1, n);
    const auto d = derivative(SampledFunction::tabulate(g, [](double x) { return std::sin(2 * x); }));
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(d[i] - 2 * std::cos(2 * g.node(i))));
    return e;
  };
  EXPECT_LT(err(101), 1e-9);
  EXPECT_GE(std::log2(err(51) / err(101)), 5.5);
}
