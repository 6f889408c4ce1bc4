#pragma once

// Zeros of truncated characteristic series: all roots at once (Aberth),
// or region-wise via winding numbers and rectangle bisection.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spps/error.hpp"
#include "spps/grid.hpp"
#include "spps/series.hpp"

namespace spps {

struct Rectangle {
  double re_min = 0, re_max = 0, im_min = 0, im_max = 0;

  Rectangle() = default;
  Rectangle(double r0, double r1, double i0, double i1) : re_min(r0), re_max(r1), im_min(i0), im_max(i1) {
    if (!(r0 < r1) || !(i0 < i1)) throw InputError("rootfinder", "degenerate rectangle");
  }

  static Rectangle around(Complex c, double half_width) {
    return {c.real() - half_width, c.real() + half_width, c.imag() - half_width, c.imag() + half_width};
  }

  double width() const noexcept { return re_max - re_min; }
  double height() const noexcept { return im_max - im_min; }
  double diameter() const noexcept { return std::hypot(width(), height()); }
  Complex center() const noexcept { return {0.5 * (re_min + re_max), 0.5 * (im_min + im_max)}; }
  bool contains(Complex z) const noexcept {
    return z.real() >= re_min && z.real() <= re_max && z.imag() >= im_min && z.imag() <= im_max;
  }
  /// Largest distance from `c` to the rectangle.
  double max_distance(Complex c) const noexcept {
    const double dr = std::max(std::abs(re_min - c.real()), std::abs(re_max - c.real()));
    const double di = std::max(std::abs(im_min - c.imag()), std::abs(im_max - c.imag()));
    return std::hypot(dr, di);
  }
};

struct WindingResult {
  Rectangle rectangle;
  int winding = 0;
  double boundary_min_abs = 0;
};

enum class RootMethod { poly_roots, arg_principle };

inline const char* to_string(RootMethod m) { return m == RootMethod::poly_roots ? "poly_roots" : "arg_principle"; }

struct EigenvalueRecord {
  Complex value;
  int multiplicity = 1;
  RootMethod method = RootMethod::poly_roots;
  bool certified = false;
  double residual = 0;
  std::optional<Complex> back_map;
};

/// |Phi| fell to the rounding floor on a contour.
class BoundaryZeroError : public SolverError {
 public:
  explicit BoundaryZeroError(const std::string& what) : SolverError("rootfinder", what) {}
};

template <class F>
concept Evaluable = requires(const F& f, Complex z) {
  { f(z) } -> std::convertible_to<Complex>;
  { f.derivative(z) } -> std::convertible_to<Complex>;
  { f.noise(z) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// all roots of the truncated polynomial

namespace detail {

// Newton correction f/f' at z, switching to the reversed polynomial for |z| > 1.
inline Complex newton_ratio(const std::vector<Complex>& c, Complex z) {
  const std::size_t d = c.size() - 1;
  if (std::abs(z) <= 1) {
    Complex f = c[d], df = 0;
    for (std::size_t k = d; k-- > 0;) {
      df = df * z + f;
      f = f * z + c[k];
    }
    return f / df;
  }
  const Complex w = 1.0 / z;
  Complex g = c[0], dg = 0;
  for (std::size_t k = 1; k <= d; ++k) {
    dg = dg * w + g;
    g = g * w + c[k];
  }
  // f(z) = z^d g(1/z)
  return 1.0 / (static_cast<double>(d) * w - w * w * dg / g);
}

inline bool at_noise_floor(const std::vector<Complex>& c, Complex z) {
  const std::size_t d = c.size() - 1;
  const double eps = std::numeric_limits<double>::epsilon();
  if (std::abs(z) <= 1) {
    Complex f = c[d];
    double m = std::abs(c[d]);
    const double az = std::abs(z);
    for (std::size_t k = d; k-- > 0;) {
      f = f * z + c[k];
      m = m * az + std::abs(c[k]);
    }
    return std::abs(f) <= eps * m;
  }
  const Complex w = 1.0 / z;
  const double aw = std::abs(w);
  Complex g = c[0];
  double m = std::abs(c[0]);
  for (std::size_t k = 1; k <= d; ++k) {
    g = g * w + c[k];
    m = m * aw + std::abs(c[k]);
  }
  return std::abs(g) <= eps * m;
}

// Starting points on circles given by the upper convex hull of (k, log|c_k|).
inline std::vector<Complex> newton_polygon_start(const std::vector<Complex>& c) {
  const std::size_t d = c.size() - 1;
  std::vector<std::size_t> hull;
  auto lg = [&](std::size_t k) { return std::log(std::abs(c[k])); };
  for (std::size_t k = 0; k <= d; ++k) {
    if (c[k] == Complex(0)) continue;
    while (hull.size() >= 2) {
      const std::size_t i = hull[hull.size() - 2], j = hull.back();
      // drop j if it lies on or below the chord i-k
      const double cross = (lg(j) - lg(i)) * static_cast<double>(k - i) -
                           (lg(k) - lg(i)) * static_cast<double>(j - i);
      if (cross <= 0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(k);
  }
  std::vector<Complex> z;
  z.reserve(d);
  constexpr double kTwoPi = 6.28318530717958647692;
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t i = hull[h], j = hull[h + 1];
    const std::size_t m = j - i;
    const double radius = std::exp((lg(i) - lg(j)) / static_cast<double>(m));
    for (std::size_t t = 0; t < m; ++t) {
      const double ang = kTwoPi * static_cast<double>(t) / static_cast<double>(m) + kTwoPi * 0.25 / static_cast<double>(d) + 0.4 * static_cast<double>(h);
      z.push_back(std::polar(radius, ang));
    }
  }
  return z;
}

}  // namespace detail

/// All roots of sum_k c_k t^k (c_0 first), by Aberth-Ehrlich iteration.
inline std::vector<Complex> polynomial_roots(std::vector<Complex> c, int max_iter = 1000) {
  while (!c.empty() && c.back() == Complex(0)) c.pop_back();
  if (c.empty()) throw InputError("rootfinder", "all coefficients are zero");
  std::size_t zeros = 0;
  while (zeros < c.size() && c[zeros] == Complex(0)) ++zeros;
  c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(zeros));
  std::vector<Complex> roots(zeros, Complex(0));
  const std::size_t d = c.size() - 1;
  if (d == 0) return roots;
  if (d == 1) {
    roots.push_back(-c[0] / c[1]);
    return roots;
  }
  std::vector<Complex> z = detail::newton_polygon_start(c);
  std::vector<bool> done(d, false);
  std::size_t remaining = d;
  for (int it = 0; it < max_iter && remaining > 0; ++it) {
    for (std::size_t j = 0; j < d; ++j) {
      if (done[j]) continue;
      if (detail::at_noise_floor(c, z[j])) {
        done[j] = true;
        --remaining;
        continue;
      }
      const Complex n = detail::newton_ratio(c, z[j]);
      Complex s = 0;
      for (std::size_t k = 0; k < d; ++k)
        if (k != j) s += 1.0 / (z[j] - z[k]);
      const Complex step = n / (1.0 - n * s);
      z[j] -= step;
      if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(z[j])) {
        done[j] = true;
        --remaining;
      }
    }
  }
  // The floor test is a majorant bound and stops early; finish with Newton steps
  // that must reduce |f| and stay clear of the neighbouring roots.
  auto value = [&](Complex x) {
    Complex f = c[d];
    for (std::size_t k = d; k-- > 0;) f = f * x + c[k];
    return std::abs(f);
  };
  for (std::size_t j = 0; j < d; ++j) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < d; ++k)
      if (k != j) gap = std::min(gap, std::abs(z[j] - z[k]));
    double fz = value(z[j]);
    for (int it = 0; it < 3 && fz > 0; ++it) {
      const Complex step = detail::newton_ratio(c, z[j]);
      if (!std::isfinite(std::abs(step)) || std::abs(step) > 0.25 * gap) break;
      const double fn = value(z[j] - step);
      if (!(fn < fz)) break;
      z[j] -= step;
      fz = fn;
    }
  }
  roots.insert(roots.end(), z.begin(), z.end());
  return roots;
}

/// All roots of the truncated series, in absolute lambda coordinates.
inline std::vector<Complex> poly_roots(const CharacteristicSeries& s) {
  std::vector<Complex> r = polynomial_roots(s.coeffs);
  for (auto& z : r) z += s.center;
  return r;
}

// ---------------------------------------------------------------------------
// argument principle

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline Complex boundary_point(const Rectangle& r, double t) {
  // t in [0, 4): counterclockwise from the lower-left corner, one unit per side
  const int side = std::min(3, static_cast<int>(t));
  const double s = t - side;
  switch (side) {
    case 0: return {r.re_min + s * r.width(), r.im_min};
    case 1: return {r.re_max, r.im_min + s * r.height()};
    case 2: return {r.re_max - s * r.width(), r.im_max};
    default: return {r.re_min, r.im_max - s * r.height()};
  }
}

// Parameter values with samples spread over the sides in proportion to length.
inline std::vector<double> boundary_parameters(const Rectangle& r, int samples) {
  const double per = 2 * (r.width() + r.height());
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(samples) + 8);
  for (int side = 0; side < 4; ++side) {
    const double len = side % 2 == 0 ? r.width() : r.height();
    const int n = std::max(4, static_cast<int>(std::lround(samples * len / per)));
    for (int k = 0; k < n; ++k) t.push_back(side + static_cast<double>(k) / n);
  }
  return t;
}

template <Evaluable F>
Complex checked_value(const F& f, Complex z, double& min_abs) {
  const Complex v = f(z);
  const double a = std::abs(v);
  if (!(a > f.noise(z)) || !std::isfinite(a))
    throw BoundaryZeroError("zero on contour (|Phi| at rounding level)");
  min_abs = std::min(min_abs, a);
  return v;
}

template <Evaluable F>
double arg_change(const F& f, const Rectangle& r, double t0, double t1, Complex v0, Complex v1, int depth,
                  double& min_abs) {
  const double d = std::arg(v1 / v0);
  if (std::abs(d) <= kPi / 2) return d;
  if (depth >= 10) throw SolverError("rootfinder", "unresolvable argument jump on contour");
  const double tm = 0.5 * (t0 + t1);
  const Complex vm = checked_value(f, boundary_point(r, tm), min_abs);
  return arg_change(f, r, t0, tm, v0, vm, depth + 1, min_abs) + arg_change(f, r, tm, t1, vm, v1, depth + 1, min_abs);
}

}  // namespace detail

/// Winding number of Phi along the positively oriented boundary of `rect`.
template <Evaluable F>
WindingResult winding_number(const F& f, const Rectangle& rect, int samples_per_contour = 4000) {
  const std::vector<double> t = detail::boundary_parameters(rect, samples_per_contour);
  double min_abs = std::numeric_limits<double>::infinity();
  std::vector<Complex> v(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) v[k] = detail::checked_value(f, detail::boundary_point(rect, t[k]), min_abs);
  double total = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const std::size_t n = (k + 1) % t.size();
    const double t1 = n == 0 ? 4.0 : t[n];
    total += detail::arg_change(f, rect, t[k], t1, v[k], v[n], 0, min_abs);
  }
  return {rect, static_cast<int>(std::lround(total / (2 * detail::kPi))), min_abs};
}

namespace detail {

struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2 / ((1 - z * z) * dp * dp);
    }
  }
};

}  // namespace detail

/// (1/(2 pi i N)) \oint z Phi'/Phi dz over the boundary of `rect`.
template <Evaluable F>
Complex residue_location(const F& f, const Rectangle& rect, int multiplicity, int panels_per_side = 16) {
  static const detail::GaussLegendre gl(16);
  const Complex c = rect.center();
  const Complex corners[5] = {{rect.re_min, rect.im_min},
                              {rect.re_max, rect.im_min},
                              {rect.re_max, rect.im_max},
                              {rect.re_min, rect.im_max},
                              {rect.re_min, rect.im_min}};
  Complex sum = 0;
  for (int side = 0; side < 4; ++side) {
    const Complex a = corners[side], b = corners[side + 1];
    const Complex h = (b - a) / static_cast<double>(panels_per_side);
    for (int p = 0; p < panels_per_side; ++p) {
      const Complex mid = a + (p + 0.5) * h;
      for (std::size_t q = 0; q < gl.x.size(); ++q) {
        const Complex z = mid + 0.5 * gl.x[q] * h;
        sum += 0.5 * gl.w[q] * h * (z - c) * f.derivative(z) / f(z);
      }
    }
  }
  return c + sum / (Complex(0, 2 * detail::kPi) * static_cast<double>(multiplicity));
}

/// At most `steps` multiplicity-scaled Newton steps, kept only while |Phi| decreases.
template <Evaluable F>
Complex newton_polish(const F& f, Complex z, int multiplicity, int steps = 5) {
  double best = std::abs(f(z));
  for (int k = 0; k < steps && best > 0; ++k) {
    const Complex d = f.derivative(z);
    if (d == Complex(0)) break;
    const Complex next = z - static_cast<double>(multiplicity) * f(z) / d;
    const double val = std::abs(f(next));
    if (!(val < best)) break;
    z = next;
    best = val;
  }
  return z;
}

struct LocalizeOptions {
  double tol = 1e-10;
  int samples_per_contour = 4000;
};

namespace detail {

template <Evaluable F>
void finalize(const F& f, const Rectangle& rect, int winding, std::vector<EigenvalueRecord>& out) {
  Complex z = rect.center();
  try {
    const Complex r = residue_location(f, rect, winding);
    if (Rectangle(rect.re_min - rect.width(), rect.re_max + rect.width(), rect.im_min - rect.height(),
                  rect.im_max + rect.height())
            .contains(r))
      z = r;
  } catch (const Error&) {
  }
  const Complex polished = newton_polish(f, z, winding);
  if (std::abs(polished - z) <= rect.diameter()) z = polished;
  EigenvalueRecord rec;
  rec.value = z;
  rec.multiplicity = winding;
  rec.method = RootMethod::arg_principle;
  rec.residual = std::abs(f(z));
  out.push_back(rec);
}

template <Evaluable F>
void subdivide(const F& f, const WindingResult& parent, const LocalizeOptions& opt,
               std::vector<EigenvalueRecord>& out) {
  const Rectangle& r = parent.rectangle;
  if (parent.winding == 0) return;
  // Below the noise-resolvable scale a cluster is reported as one multiple root.
  if (r.diameter() <= opt.tol || (parent.winding >= 2 && parent.boundary_min_abs <= 1e3 * f.noise(r.center()))) {
    finalize(f, r, parent.winding, out);
    return;
  }
  const bool vertical = r.width() >= r.height();
  const double lo = vertical ? r.re_min : r.im_min;
  const double hi = vertical ? r.re_max : r.im_max;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    // 0, +1, -1, +2, -2, ... times 1e-3 of the diameter, around a point just off
    // the midpoint so symmetric regions are not cut along their axis of symmetry
    const int k = (attempt + 1) / 2;
    const double shift = (attempt % 2 == 1 ? 1 : -1) * k * 1e-3 * r.diameter();
    const double cut = std::clamp(lo + 0.4950547 * (hi - lo) + shift, lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
    const Rectangle a = vertical ? Rectangle(r.re_min, cut, r.im_min, r.im_max)
                                 : Rectangle(r.re_min, r.re_max, r.im_min, cut);
    const Rectangle b = vertical ? Rectangle(cut, r.re_max, r.im_min, r.im_max)
                                 : Rectangle(r.re_min, r.re_max, cut, r.im_max);
    WindingResult wa, wb;
    try {
      wa = winding_number(f, a, opt.samples_per_contour);
      wb = winding_number(f, b, opt.samples_per_contour);
    } catch (const BoundaryZeroError&) {
      continue;
    } catch (const SolverError&) {
      continue;
    }
    if (wa.winding + wb.winding != parent.winding || wa.winding < 0 || wb.winding < 0) continue;
    subdivide(f, wa, opt, out);
    subdivide(f, wb, opt, out);
    return;
  }
  // rounding noise dominates the children's contours
  finalize(f, r, parent.winding, out);
}

}  // namespace detail

/// Zeros of Phi inside `region` by recursive bisection on winding numbers.
template <Evaluable F>
std::vector<EigenvalueRecord> localize(const F& f, const Rectangle& region, const LocalizeOptions& opt = {}) {
  std::vector<EigenvalueRecord> out;
  detail::subdivide(f, winding_number(f, region, opt.samples_per_contour), opt, out);
  std::sort(out.begin(), out.end(), [](const EigenvalueRecord& x, const EigenvalueRecord& y) {
    return x.value.real() != y.value.real() ? x.value.real() < y.value.real() : x.value.imag() < y.value.imag();
  });
  return out;
}

template <Evaluable F>
std::vector<EigenvalueRecord> localize(const F& f, const Rectangle& region, double tol) {
  LocalizeOptions opt;
  opt.tol = tol;
  return localize(f, region, opt);
}

/// Rouche check on `rect`: sampled min |Phi_M| must exceed `tail` and the
/// winding must equal the record's multiplicity.
template <Evaluable F>
EigenvalueRecord certify(EigenvalueRecord rec, const F& f, double tail, const Rectangle& rect,
                         int samples_per_contour = 4000) {
  rec.certified = false;
  if (!std::isfinite(tail)) return rec;
  try {
    const WindingResult w = winding_number(f, rect, samples_per_contour);
    rec.certified = w.boundary_min_abs > tail && w.winding == rec.multiplicity && rect.contains(rec.value);
  } catch (const SolverError&) {
  }
  return rec;
}

}  // namespace spps
