#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "spps/roots.hpp"

using namespace spps;

namespace {

constexpr double kPi = 3.14159265358979323846;

CharacteristicSeries series(std::vector<Complex> c, Complex center = 0) {
  return CharacteristicSeries(center, std::move(c), SeriesProvenance::custom);
}

std::vector<Complex> from_roots(const std::vector<Complex>& roots, Complex lead = 1) {
  std::vector<Complex> c{lead};
  for (Complex r : roots) {
    std::vector<Complex> n(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      n[k + 1] += c[k];
      n[k] -= r * c[k];
    }
    c = std::move(n);
  }
  return c;
}

std::vector<Complex> companion_roots(const std::vector<Complex>& c) {
  const int d = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 1; i < d; ++i) C(i, i - 1) = 1;
  for (int i = 0; i < d; ++i) C(i, d - 1) = -c[i] / c[d];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C);
  std::vector<Complex> r(es.eigenvalues().data(), es.eigenvalues().data() + d);
  return r;
}

double match_distance(std::vector<Complex> a, std::vector<Complex> b) {
  // greedy nearest matching, adequate for well separated roots
  double worst = 0;
  for (Complex z : a) {
    auto it = std::min_element(b.begin(), b.end(), [z](Complex x, Complex y) { return std::abs(x - z) < std::abs(y - z); });
    worst = std::max(worst, std::abs(*it - z));
    b.erase(it);
  }
  return worst;
}

bool has_root(const std::vector<Complex>& r, Complex z, double tol) {
  return std::any_of(r.begin(), r.end(), [&](Complex x) { return std::abs(x - z) <= tol; });
}

}  // namespace

TEST(PolyRoots, Examples) {
  const auto q = poly_roots(series({kPi * kPi, 2, 1}));
  ASSERT_EQ(q.size(), 2u);
  const Complex w(-1, std::sqrt(kPi * kPi - 1));
  EXPECT_TRUE(has_root(q, w, 1e-13));
  EXPECT_TRUE(has_root(q, std::conj(w), 1e-13));
  const auto z = poly_roots(series({0, 1}));
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0], Complex(0));
  const auto pm = poly_roots(series({-1, 0, 1}));
  EXPECT_TRUE(has_root(pm, 1.0, 1e-15));
  EXPECT_TRUE(has_root(pm, -1.0, 1e-15));
  EXPECT_THROW(polynomial_roots({0, 0, 0}), InputError);
  EXPECT_TRUE(poly_roots(series({3})).empty());
}

TEST(PolyRoots, CenterIsAddedBack) {
  const auto r = poly_roots(series({-1, 0, 1}, Complex(2, 3)));
  EXPECT_TRUE(has_root(r, Complex(3, 3), 1e-15));
  EXPECT_TRUE(has_root(r, Complex(1, 3), 1e-15));
}

TEST(PolyRoots, AgreesWithCompanionMatrix) {
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0, 1);
  for (int deg : {3, 7, 12, 25, 40}) {
    for (int t = 0; t < 5; ++t) {
      std::vector<Complex> c(deg + 1);
      for (auto& x : c) x = {N(rng), N(rng)};
      EXPECT_LE(match_distance(polynomial_roots(c), companion_roots(c)), 1e-8) << deg;
    }
  }
}

TEST(PolyRoots, FactorialScaledSeries) {
  // truncated sin series of degree 61; its small roots are k pi (beyond 4 pi the
  // cancellation floor e^{k pi} eps exceeds the tolerance)
  std::vector<Complex> c(62, 0.0);
  double f = 1;
  for (int k = 1; k <= 61; ++k) {
    f *= k;
    if (k % 2) c[k] = ((k / 2) % 2 ? -1.0 : 1.0) / f;
  }
  const auto r = polynomial_roots(c);
  EXPECT_EQ(r.size(), 61u);
  for (int k = -4; k <= 4; ++k) EXPECT_TRUE(has_root(r, k * kPi, 1e-10)) << k;
}

TEST(PolyRoots, ClusteredAndZeroRoots) {
  const auto c = from_roots({0, 0, 1, 2, Complex(0, 1), Complex(0, -1)});
  const auto r = polynomial_roots(c);
  EXPECT_EQ(std::count(r.begin(), r.end(), Complex(0)), 2);
  for (Complex z : {Complex(1), Complex(2), Complex(0, 1), Complex(0, -1)}) EXPECT_TRUE(has_root(r, z, 1e-12));
}

TEST(Winding, Examples) {
  EXPECT_EQ(winding_number(series({0, 1}), Rectangle(-0.5, 0.5, -0.5, 0.5)).winding, 1);
  const auto s = series(from_roots({0.03, 0.03}));
  const WindingResult w = winding_number(s, Rectangle(0.02, 0.04, -0.01, 0.01));
  EXPECT_EQ(w.winding, 2);
  EXPECT_GT(w.boundary_min_abs, 0);
  EXPECT_EQ(winding_number(s, Rectangle(0.05, 0.06, -0.01, 0.01)).winding, 0);
}

TEST(Winding, ZeroOnBoundaryIsAnError) {
  EXPECT_THROW(winding_number(series({0, 1}), Rectangle(0, 1, -1, 1)), BoundaryZeroError);
}

TEST(Winding, Additivity) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  std::uniform_int_distribution<int> D(1, 12);
  for (int t = 0; t < 30; ++t) {
    std::vector<Complex> roots(D(rng));
    for (auto& z : roots) z = {U(rng), U(rng)};
    const auto s = series(from_roots(roots, Complex(U(rng), U(rng))));
    const Rectangle parent(-0.83, 0.91, -0.77, 0.87);
    const double cx = 0.0123 + 0.3 * U(rng), cy = -0.0071 + 0.3 * U(rng);
    int expected = 0;
    for (Complex z : roots) expected += parent.contains(z);
    try {
      const int w = winding_number(s, parent).winding;
      const int sum = winding_number(s, Rectangle(parent.re_min, cx, parent.im_min, cy)).winding +
                      winding_number(s, Rectangle(cx, parent.re_max, parent.im_min, cy)).winding +
                      winding_number(s, Rectangle(parent.re_min, cx, cy, parent.im_max)).winding +
                      winding_number(s, Rectangle(cx, parent.re_max, cy, parent.im_max)).winding;
      EXPECT_EQ(w, expected);
      EXPECT_EQ(sum, w);
      // halving the sample density leaves the accepted count unchanged
      EXPECT_EQ(winding_number(s, parent, 2000).winding, w);
    } catch (const BoundaryZeroError&) {
      // a random root landed on a cut line
    }
  }
}

TEST(Residue, ExactForPowers) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int N = 1; N <= 5; ++N) {
    const Complex z0(U(rng), U(rng));
    const auto s = series(from_roots(std::vector<Complex>(N, z0)));
    const Rectangle r(z0.real() - 0.3 - 0.1 * N, z0.real() + 0.2, z0.imag() - 0.25, z0.imag() + 0.35);
    EXPECT_NEAR(std::abs(residue_location(s, r, N) - z0), 0, 1e-10) << N;
  }
}

TEST(Localize, QuadraticExample) {
  const auto recs = localize(series({kPi * kPi, 2, 1}), Rectangle(-2, 0, 0, 4), 1e-10);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].multiplicity, 1);
  EXPECT_EQ(recs[0].method, RootMethod::arg_principle);
  EXPECT_NEAR(std::abs(recs[0].value - Complex(-1, std::sqrt(kPi * kPi - 1))), 0, 1e-12);
}

TEST(Localize, TripleRoot) {
  const Complex z0(1, 1);
  const auto s = series(from_roots({z0, z0, z0}));
  const auto recs = localize(s, Rectangle(0.3, 1.9, 0.2, 1.7), 1e-10);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].multiplicity, 3);
  EXPECT_NEAR(std::abs(recs[0].value - z0), 0, 1e-6);
  EXPECT_LE(recs[0].residual, 1e-10);
}

TEST(Localize, Completeness) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int t = 0; t < 10; ++t) {
    std::vector<Complex> roots(8);
    for (auto& z : roots) z = {U(rng), U(rng)};
    const auto s = series(from_roots(roots));
    const Rectangle region(-1.01, 0.97, -0.93, 1.03);
    const auto recs = localize(s, region, 1e-10);
    int inside = 0, total = 0;
    for (Complex z : roots) inside += region.contains(z);
    for (const auto& r : recs) total += r.multiplicity;
    EXPECT_EQ(total, inside);
    for (Complex z : roots) {
      if (region.contains(z)) {
        EXPECT_TRUE(std::any_of(recs.begin(), recs.end(), [&](const EigenvalueRecord& r) { return std::abs(r.value - z) <= 1e-9; }));
      }
    }
    EXPECT_TRUE(std::is_sorted(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.value.real() < b.value.real(); }));
  }
}

TEST(Certify, Sentinels) {
  const auto s = series({kPi * kPi, 2, 1});
  EigenvalueRecord rec;
  rec.value = Complex(-1, std::sqrt(kPi * kPi - 1));
  const Rectangle box = Rectangle::around(rec.value, 0.5);
  EXPECT_TRUE(certify(rec, s, 0.0, box).certified);
  EXPECT_FALSE(certify(rec, s, std::numeric_limits<double>::infinity(), box).certified);
  EXPECT_FALSE(certify(rec, s, 1e6, box).certified);
  rec.multiplicity = 2;
  EXPECT_FALSE(certify(rec, s, 0.0, box).certified);
}
