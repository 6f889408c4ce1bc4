#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "spps/expr.hpp"

using namespace spps;
using namespace spps::expr;

namespace {

const std::vector<std::string> kCatalog{
    "2*x^2",
    "sech(2*x)",
    "-sech(x)*exp(-i*0.5*log(cosh(x))/0.3)",
    "sech(2*x)*exp(i*sech(2*x)/0.2)",
    "0.956*(-1+3*pi/4+3*x^2)",
    "sin(x)*cos(2*x)-tan(x/3)",
    "sqrt(2+x)/(1+x^2)",
    "sinh(x)+cosh(x)^2*tanh(x)",
    "(1+i*x)^(0.5+x/4)",
    "e^x - 2^-x",
    "x^3^0.5",
};

}  // namespace

TEST(Parse, ExamplesEvaluate) {
  EXPECT_NEAR(std::abs(parse("2*x^2")(3) - 18.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("sech(2*x)")(0) - 1.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("-sech(x)*exp(-i*0.5*log(cosh(x))/0.3)")(0) + 1.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("exp(i*pi)")(0.4) + 1.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("1.5e-1 + 2E2")(0) - 200.15), 0, 1e-12);
}

TEST(Parse, Precedence) {
  // ^ is right-associative and binds looser than unary minus
  EXPECT_NEAR(parse("2^3^2")(0).real(), 512, 1e-12);
  EXPECT_NEAR(parse("-2^2")(0).real(), 4, 1e-15);
  EXPECT_NEAR(parse("-x^2")(3).real(), 9, 1e-15);
  EXPECT_NEAR(parse("1-2-3")(0).real(), -4, 1e-15);
  EXPECT_NEAR(parse("8/4/2")(0).real(), 1, 1e-15);
  EXPECT_NEAR(parse("2+3*4")(0).real(), 14, 1e-15);
  EXPECT_NEAR(parse("-sin(x)")(1).real(), -std::sin(1.0), 1e-15);
  EXPECT_NEAR(std::abs(parse("i^2")(0) + 1.0), 0, 1e-15);
}

TEST(Parse, ComplexBuiltins) {
  const Complex z = parse("conj(1+2*i) + re(3-4*i) + i*im(5+6*i) + abs(3+4*i)")(0);
  EXPECT_NEAR(std::abs(z - Complex(9, 4)), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("sqrt(-4)")(0) - Complex(0, 2)), 0, 1e-15);
  EXPECT_NEAR(std::abs(parse("log(-1)")(0) - Complex(0, std::acos(-1.0))), 0, 1e-15);
}

TEST(Parse, ErrorsCarryPosition) {
  auto pos = [](const std::string& s) -> long {
    try {
      (void)parse(s);
    } catch (const ParseError& e) {
      return static_cast<long>(e.position());
    }
    return -1;
  };
  EXPECT_EQ(pos("2*x)"), 3);
  EXPECT_EQ(pos("(2*x"), 4);
  EXPECT_EQ(pos("foo(x)"), 0);
  EXPECT_EQ(pos("1 + y"), 4);
  EXPECT_EQ(pos("2x"), 1);
  EXPECT_EQ(pos("sin x"), 0);
  EXPECT_EQ(pos(""), 0);
  EXPECT_EQ(pos("3 $ 4"), 2);
  EXPECT_EQ(pos("1.2.3"), 0);
  try {
    (void)parse("cosh(x) + bessel(x)");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown function"), std::string::npos);
  }
  try {
    (void)parse("(1+x");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("parenthesis"), std::string::npos);
  }
}

TEST(Parse, DeepNestingIsAnErrorNotACrash) {
  EXPECT_THROW(parse(std::string(100000, '(') + "1" + std::string(100000, ')')), ParseError);
  EXPECT_THROW(parse(std::string(100000, '-') + "1"), ParseError);
  EXPECT_NO_THROW(parse(std::string(50, '(') + "1" + std::string(50, ')')));
}

TEST(Parse, FuzzTokenSoup) {
  const std::vector<std::string> tokens{"x", "1", "2.5", "e", "pi", "i", "+", "-", "*", "/", "^", "(", ")",
                                        "sin", "exp", "log", "sech", "abs", " ", "1e", "..", "#", "q", ","};
  std::mt19937 rng(12345);
  std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1), len(0, 30);
  int parsed = 0;
  for (int t = 0; t < 20000; ++t) {
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t k = 0; k < n; ++k) s += tokens[pick(rng)];
    try {
      const Expr e = parse(s);
      ++parsed;
      try {
        (void)e(0.3);
      } catch (const DomainError&) {
      }
    } catch (const ParseError&) {
    }
  }
  EXPECT_GT(parsed, 0);
}

TEST(Print, RoundTrip) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> U(-0.9, 0.9);
  for (const auto& src : kCatalog) {
    const Expr a = parse(src);
    const Expr b = parse(a.to_string());
    EXPECT_EQ(b.to_string(), a.to_string());
    for (int k = 0; k < 50; ++k) {
      const double x = U(rng);
      EXPECT_LE(std::abs(a(x) - b(x)), 1e-13 * std::max(1.0, std::abs(a(x)))) << src;
    }
  }
}

TEST(EvaluateOnGrid, Examples) {
  Grid g(0, 1, 6);
  const auto f = evaluate_on_grid(parse("x"), g);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(f[k].real(), 0.2 * k, 1e-15);
  const auto c = evaluate_on_grid(parse("i"), g);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(c[k], Complex(0, 1));
  const auto m = evaluate_on_grid(parse("exp(i*pi)"), g);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(std::abs(m[k] + 1.0), 0, 1e-15);
}

TEST(EvaluateOnGrid, DomainErrorNamesNode) {
  Grid g(-1, 1, 11);
  try {
    (void)evaluate_on_grid(parse("log(x)"), g);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("node 5"), std::string::npos);
  }
  EXPECT_THROW(evaluate_on_grid(parse("1/x"), g), InputError);
  EXPECT_THROW(evaluate_on_grid(parse("exp(1000*x)"), g), InputError);
}

TEST(Differentiate, Examples) {
  EXPECT_NEAR(std::abs(differentiate(parse("x^2"))(3) - 6.0), 0, 1e-15);
  const Expr d = differentiate(parse("sech(2*x)"));
  EXPECT_NEAR(std::abs(d(0)), 0, 1e-15);
  EXPECT_NEAR(std::abs(d(0.4) + 2 / std::cosh(0.8) * std::tanh(0.8)), 0, 1e-15);
  const Expr z = differentiate(parse("3*pi+sin(2)"));
  EXPECT_FALSE(z.depends_on_x());
  EXPECT_EQ(z(1.7), Complex(0));
  EXPECT_EQ(differentiate(parse("abs(2+i)*x"))(0.5), Complex(std::sqrt(5.0)));
}

TEST(Differentiate, NonHolomorphicRejected) {
  for (const char* s : {"abs(x)", "conj(x)", "re(x^2)", "im(x)"}) {
    try {
      (void)differentiate(parse(s));
      FAIL() << s;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find("non-holomorphic"), std::string::npos);
    }
  }
}

TEST(Differentiate, AgreesWithFiniteDifferences) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> U(-0.9, 0.9);
  for (const auto& src : kCatalog) {
    const Expr f = parse(src);
    const Expr df = differentiate(f);
    for (int k = 0; k < 200; ++k) {
      const double x = U(rng);
      const double h = 1e-4 * std::max(1.0, std::abs(x));
      // 4th-order central difference
      const Complex fd = (-f(x + 2 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2 * h)) / (12 * h);
      EXPECT_LE(std::abs(df(x) - fd), 1e-6 * std::max(1.0, std::abs(df(x)))) << src << " at " << x;
    }
  }
}

TEST(EvaluateConstant, RejectsX) {
  EXPECT_NEAR(std::abs(evaluate_constant("-1-(0.1+3*i)*2") - Complex(-1.2, -6)), 0, 1e-15);
  EXPECT_THROW(evaluate_constant("x+1"), InputError);
}
