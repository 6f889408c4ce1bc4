#pragma once

// Uniform grids, tabulated complex functions and 6-point Newton-Cotes
// antiderivatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spps/error.hpp"

namespace spps {

using Complex = std::complex<double>;

/// Uniform grid a = x_0 < x_1 < ... < x_{n-1} = b. The node count must tile
/// into 6-point panels, i.e. (n - 1) % 5 == 0.
class Grid {
 public:
  Grid(double a, double b, std::size_t n_nodes) : a_(a), b_(b), n_(n_nodes) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
      throw InputError("grid", "require finite a < b");
    if (n_nodes < 6)
      throw InputError("grid", "need at least 6 nodes, got " + std::to_string(n_nodes));
    if ((n_nodes - 1) % 5 != 0)
      throw InputError("grid", "n_nodes - 1 must be a multiple of 5, got n_nodes = " +
                                   std::to_string(n_nodes));
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  std::size_t size() const noexcept { return n_; }
  double step() const noexcept { return (b_ - a_) / static_cast<double>(n_ - 1); }
  double length() const noexcept { return b_ - a_; }

  double node(std::size_t i) const noexcept {
    // last node is pinned to b so that the endpoint is exact
    if (i + 1 == n_) return b_;
    return a_ + static_cast<double>(i) * step();
  }

  /// Index of the node at x, or an InputError if x is not (to 1e-9 h) a node.
  std::size_t index_of(double x) const {
    const double t = (x - a_) / step();
    const double r = std::round(t);
    if (r < 0 || r > static_cast<double>(n_ - 1) || std::abs(t - r) > 1e-9)
      throw InputError("grid", "point " + std::to_string(x) + " is not a grid node");
    return static_cast<std::size_t>(r);
  }

  bool operator==(const Grid& o) const noexcept {
    return a_ == o.a_ && b_ == o.b_ && n_ == o.n_;
  }

 private:
  double a_;
  double b_;
  std::size_t n_;
};

/// Complex values tabulated on every node of a Grid.
class SampledFunction {
 public:
  SampledFunction(Grid grid, std::vector<Complex> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw InputError("grid", "value count " + std::to_string(values_.size()) +
                                   " does not match node count " + std::to_string(grid_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag()))
        throw NodeError("grid", "non-finite sample", i);
  }

  static SampledFunction constant(const Grid& grid, Complex c) {
    return SampledFunction(grid, std::vector<Complex>(grid.size(), c));
  }

  template <class F>
  static SampledFunction tabulate(const Grid& grid, F&& f) {
    std::vector<Complex> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = Complex(f(grid.node(i)));
    return SampledFunction(grid, std::move(v));
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  const Complex& operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const Complex> values() const noexcept { return values_; }
  Complex front() const noexcept { return values_.front(); }
  Complex back() const noexcept { return values_.back(); }

  double max_abs() const noexcept {
    double m = 0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Grid grid_;
  std::vector<Complex> values_;
};

namespace detail {

inline void require_same_grid(const SampledFunction& f, const SampledFunction& g) {
  if (!(f.grid() == g.grid())) throw InputError("grid", "operands live on different grids");
}

// Integral over [j, j+1] of the Lagrange basis on nodes 0..5, times 1440.
inline constexpr std::array<std::array<double, 6>, 5> kPanelWeights{{
    {475, 1427, -798, 482, -173, 27},
    {-27, 637, 1022, -258, 77, -11},
    {11, -93, 802, 802, -93, 11},
    {-11, 77, -258, 1022, 637, -27},
    {27, -173, 482, -798, 1427, 475},
}};

// Fornberg's finite-difference weights for the first derivative at z.
inline std::vector<double> fd_weights(double z, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k)
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][1];
  return w;
}

}  // namespace detail

/// Exact integral, over each subinterval [x_i, x_{i+1}], of the degree-5
/// interpolant through the 6-point stencil nodes i-2..i+3 (clamped at the
/// ends). Entry i of the result is the integral over [x_i, x_{i+1}].
inline std::vector<Complex> subinterval_integrals(const SampledFunction& f) {
  const std::size_t n = f.size();
  const double scale = f.grid().step() / 1440.0;
  std::vector<Complex> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t s = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) - 2, 0,
                                                     static_cast<std::ptrdiff_t>(n) - 6);
    const auto& w = detail::kPanelWeights[i - s];
    Complex acc = w[0] * f[s] + w[1] * f[s + 1] + w[2] * f[s + 2] + w[3] * f[s + 3] +
                  w[4] * f[s + 4] + w[5] * f[s + 5];
    d[i] = acc * scale;
  }
  return d;
}

/// F(x) = integral of f from the node `anchor` to x, at every node.
/// Sums run outward from the anchor with compensated accumulation.
inline SampledFunction cumulative_integral(const SampledFunction& f, std::size_t anchor = 0) {
  const std::size_t n = f.size();
  if (anchor >= n) throw InputError("grid", "anchor index out of range");
  const std::vector<Complex> d = subinterval_integrals(f);
  std::vector<Complex> out(n);
  out[anchor] = 0.0;
  Complex sum = 0.0, comp = 0.0;
  for (std::size_t i = anchor; i + 1 < n; ++i) {
    const Complex y = d[i] - comp;
    const Complex t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    out[i + 1] = sum;
  }
  sum = 0.0;
  comp = 0.0;
  for (std::size_t i = anchor; i-- > 0;) {
    const Complex y = -d[i] - comp;
    const Complex t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    out[i] = sum;
  }
  return SampledFunction(f.grid(), std::move(out));
}

enum class Combine { add, sub, mul, div };

inline constexpr double kDefaultDivisionFloor = 1e-300;

/// Nodewise f (op) g.
inline SampledFunction pointwise_combine(const SampledFunction& f, const SampledFunction& g,
                                         Combine op, double division_floor = kDefaultDivisionFloor) {
  detail::require_same_grid(f, g);
  std::vector<Complex> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    switch (op) {
      case Combine::add: v[i] = f[i] + g[i]; break;
      case Combine::sub: v[i] = f[i] - g[i]; break;
      case Combine::mul: v[i] = f[i] * g[i]; break;
      case Combine::div:
        if (std::abs(g[i]) < division_floor) throw NodeError("grid", "division by near-zero value", i);
        v[i] = f[i] / g[i];
        break;
    }
  }
  return SampledFunction(f.grid(), std::move(v));
}

inline SampledFunction scale(const SampledFunction& f, Complex c) {
  std::vector<Complex> v(f.values().begin(), f.values().end());
  for (auto& x : v) x *= c;
  return SampledFunction(f.grid(), std::move(v));
}

inline SampledFunction operator+(const SampledFunction& f, const SampledFunction& g) {
  return pointwise_combine(f, g, Combine::add);
}
inline SampledFunction operator-(const SampledFunction& f, const SampledFunction& g) {
  return pointwise_combine(f, g, Combine::sub);
}
inline SampledFunction operator*(const SampledFunction& f, const SampledFunction& g) {
  return pointwise_combine(f, g, Combine::mul);
}
inline SampledFunction operator/(const SampledFunction& f, const SampledFunction& g) {
  return pointwise_combine(f, g, Combine::div);
}
inline SampledFunction operator*(Complex c, const SampledFunction& f) { return scale(f, c); }

/// Applies `op` to every sample.
template <class Op>
SampledFunction map(const SampledFunction& f, Op&& op) {
  std::vector<Complex> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(f[i]);
  return SampledFunction(f.grid(), std::move(v));
}

/// 6th-order first derivative: 7-point centered stencils, one-sided 7-point
/// stencils near the ends.
inline SampledFunction derivative(const SampledFunction& f) {
  const std::size_t n = f.size();
  const std::size_t width = std::min<std::size_t>(7, n);
  const double h = f.grid().step();
  // weights for evaluation point at offset k within a width-point stencil
  std::vector<std::vector<double>> w(width);
  std::vector<double> pts(width);
  for (std::size_t k = 0; k < width; ++k) pts[k] = static_cast<double>(k);
  for (std::size_t k = 0; k < width; ++k) w[k] = detail::fd_weights(static_cast<double>(k), pts);
  const std::size_t half = width / 2;
  std::vector<Complex> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = i < half ? 0 : i - half;
    s = std::min(s, n - width);
    const auto& wk = w[i - s];
    Complex acc = 0.0;
    for (std::size_t k = 0; k < width; ++k) acc += wk[k] * f[s + k];
    out[i] = acc / h;
  }
  return SampledFunction(f.grid(), std::move(out));
}

}  // namespace spps
