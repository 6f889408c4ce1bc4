#pragma once

// Problem-level assembly on top of the formal powers: spectral shifts,
// two-point characteristic series, shift chains, and the Dirac reduction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "spps/error.hpp"
#include "spps/grid.hpp"
#include "spps/pencil.hpp"
#include "spps/series.hpp"

namespace spps {

// ---------------------------------------------------------------------------
// spectral shift

/// The pencil rewritten in Lambda = lambda - center:
///   (p u')' + q_eff u = u sum_k Lambda^k rt_k.
struct ShiftedPencil {
  PencilSpec base;
  Complex center;
  PencilSpec pencil;

  const SampledFunction& q_eff() const noexcept { return pencil.q(); }
  const SampledFunction& r_eff(std::size_t k) const { return pencil.r(k); }
};

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

/// rt_k = sum_{l=0}^{N-k} C(k+l, l) center^l r_{k+l},  q_eff = q - sum_k r_k center^k.
inline ShiftedPencil shift_pencil(const PencilSpec& spec, Complex center) {
  if (center == Complex(0)) return {spec, center, spec};
  const std::size_t N = spec.degree();
  const std::size_t n = spec.grid().size();
  std::vector<Complex> pw(N + 1, 1.0);
  for (std::size_t l = 1; l <= N; ++l) pw[l] = pw[l - 1] * center;

  std::vector<SampledFunction> rt;
  rt.reserve(N);
  for (std::size_t k = 1; k <= N; ++k) {
    std::vector<Complex> v(n, 0.0);
    for (std::size_t l = 0; l + k <= N; ++l) {
      const Complex c = binomial(k + l, l) * pw[l];
      const auto& r = spec.r(k + l);
      for (std::size_t i = 0; i < n; ++i) v[i] += c * r[i];
    }
    rt.emplace_back(spec.grid(), std::move(v));
  }
  std::vector<Complex> qe(spec.q().values().begin(), spec.q().values().end());
  for (std::size_t k = 1; k <= N; ++k) {
    const auto& r = spec.r(k);
    for (std::size_t i = 0; i < n; ++i) qe[i] -= r[i] * pw[k];
  }
  return {spec, center, PencilSpec(spec.p(), SampledFunction(spec.grid(), std::move(qe)), std::move(rt))};
}

// ---------------------------------------------------------------------------
// endpoint data for characteristic functions

/// Everything a two-point characteristic function needs: the formal powers at
/// the far node, and u0, u0', p at both ends. Powers are anchored at node 0.
struct EndpointData {
  Complex center = 0;
  std::vector<Complex> xt, x;  // Xt(n)(b), X(n)(b), n = 0..2M+1
  Complex u0_left, du0_left, p_left;
  Complex u0_right, du0_right, p_right;

  std::size_t order() const { return x.size() / 2 - 1; }
  Complex x_at(long n) const { return n < 0 ? Complex(0) : x[static_cast<std::size_t>(n)]; }
  Complex xt_at(long n) const { return n < 0 ? Complex(0) : xt[static_cast<std::size_t>(n)]; }
};

/// Sweep visitor that records powers at one node.
class EndpointCollector {
 public:
  explicit EndpointCollector(std::size_t node) : node_(node) {}
  void operator()(std::size_t, const SampledFunction& xt, const SampledFunction& x) {
    xt_.push_back(xt[node_]);
    x_.push_back(x[node_]);
  }
  std::vector<Complex>& xt() { return xt_; }
  std::vector<Complex>& x() { return x_; }

 private:
  std::size_t node_;
  std::vector<Complex> xt_, x_;
};

inline EndpointData make_endpoint_data(const PencilSpec& spec, const ParticularSolution& u0, Complex center,
                                       EndpointCollector& col) {
  const std::size_t last = spec.grid().size() - 1;
  EndpointData d;
  d.center = center;
  d.xt = std::move(col.xt());
  d.x = std::move(col.x());
  d.u0_left = u0.u0[0];
  d.du0_left = u0.u0_prime[0];
  d.p_left = spec.p()[0];
  d.u0_right = u0.u0[last];
  d.du0_right = u0.u0_prime[last];
  d.p_right = spec.p()[last];
  return d;
}

inline EndpointData collect_endpoint_data(const PencilSpec& spec, const ParticularSolution& u0, std::size_t M,
                                          Complex center = 0) {
  EndpointCollector col(spec.grid().size() - 1);
  sweep_formal_powers(spec, u0, 0, 2 * M + 2, col);
  return make_endpoint_data(spec, u0, center, col);
}

/// Produces a characteristic series from endpoint data.
using CharacteristicBuilder = std::function<CharacteristicSeries(const EndpointData&)>;

/// y(0) = y(L) = 0 with the anchor at 0 forces c1 = 0; Phi = sum Lambda^n X(2n+1)(L).
inline CharacteristicSeries dirichlet_characteristic(const EndpointData& d) {
  const std::size_t M = d.order();
  std::vector<Complex> a(M + 1);
  for (std::size_t k = 0; k <= M; ++k) a[k] = d.x[2 * k + 1];
  return {d.center, std::move(a), SeriesProvenance::string};
}

/// Separated conditions alpha u + beta p u' = 0 at each end.
struct BoundaryCondition {
  Complex alpha = 1;
  Complex beta = 0;
};

/// With u = c1 u1 + c2 u2 anchored at the left end, the left condition fixes
/// c1 = beta_l / u0(a), c2 = -(alpha_l u0(a) + beta_l p u0'(a)); the series is
/// alpha_r u(b) + beta_r p u'(b) expanded in Lambda.
inline CharacteristicBuilder separated_characteristic(BoundaryCondition left, BoundaryCondition right) {
  return [left, right](const EndpointData& d) {
    const std::size_t M = d.order();
    const Complex c1 = left.beta / d.u0_left;
    const Complex c2 = -(left.alpha * d.u0_left + left.beta * d.p_left * d.du0_left);
    const Complex v = d.u0_right, pdv = d.p_right * d.du0_right, iv = 1.0 / v;
    std::vector<Complex> a(M + 1);
    for (std::size_t n = 0; n <= M; ++n) {
      const long m = static_cast<long>(n);
      const Complex u1 = v * d.xt_at(2 * m);
      const Complex pu1 = pdv * d.xt_at(2 * m) + iv * d.xt_at(2 * m - 1);
      const Complex u2 = v * d.x_at(2 * m + 1);
      const Complex pu2 = pdv * d.x_at(2 * m + 1) + iv * d.x_at(2 * m);
      a[n] = right.alpha * (c1 * u1 + c2 * u2) + right.beta * (c1 * pu1 + c2 * pu2);
    }
    return CharacteristicSeries(d.center, std::move(a), SeriesProvenance::custom_boundary);
  };
}

// ---------------------------------------------------------------------------
// shift chains

/// Picks u1 + kappa u2 as the next particular solution, trying a few complex
/// phases for kappa and keeping the one with the largest minimum modulus.
inline ParticularSolution particular_from_basis(const BasisSolutions& b,
                                                double floor_rel = kDefaultVanishingFloor) {
  const double s1 = b.u1.max_abs(), s2 = b.u2.max_abs();
  const double scale_u2 = s2 > 0 ? s1 / s2 : 1.0;
  constexpr double kPi = 3.14159265358979323846;
  const std::array<double, 8> phases{kPi / 2, -kPi / 2, kPi / 4, -kPi / 4, 3 * kPi / 4, -3 * kPi / 4, 0.0, kPi};
  double best = -1;
  Complex best_k = 0;
  for (double th : phases) {
    const Complex k = std::polar(scale_u2, th);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t i = 0; i < b.u1.size(); ++i) {
      const double m = std::abs(b.u1[i] + k * b.u2[i]);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    const double rel = hi > 0 ? lo / hi : 0;
    if (rel > best) { best = rel; best_k = k; }
  }
  SampledFunction u = b.u1 + best_k * b.u2;
  SampledFunction du = b.u1_prime + best_k * b.u2_prime;
  const double norm = u.max_abs();
  return ParticularSolution::make(scale(u, 1.0 / norm), scale(du, 1.0 / norm), Provenance::spps_built,
                                  floor_rel);
}

/// One center of a shift chain.
struct ShiftStep {
  Complex center;
  CharacteristicSeries series;
  double coefficient_majorant;  // m for the shifted pencil with its u0
  EndpointData endpoints;
};

/// Runs the centers in order. Every step sweeps the pencil shifted to its
/// center once, producing that center's characteristic series and, in the
/// same pass, the solution at the next center that seeds the next step.
/// `base_u0` solves the unshifted lambda = 0 equation.
inline std::vector<ShiftStep> run_shift_chain(const PencilSpec& base, const ParticularSolution& base_u0,
                                              const std::vector<Complex>& centers, std::size_t M,
                                              const CharacteristicBuilder& characteristic) {
  std::vector<ShiftStep> steps;
  if (centers.empty()) return steps;
  const std::size_t n = base.grid().size();
  const std::size_t count = 2 * M + 2;
  Complex current = 0;
  ParticularSolution u0 = base_u0;

  if (centers.front() != Complex(0)) {
    const ShiftedPencil sp = shift_pencil(base, 0);
    SeriesAccumulator acc(centers.front(), n);
    sweep_formal_powers(sp.pencil, u0, 0, count, acc);
    u0 = particular_from_basis(acc.finish(u0, sp.pencil.p()));
    current = centers.front();
  }

  for (std::size_t j = 0; j < centers.size(); ++j) {
    current = centers[j];
    const ShiftedPencil sp = shift_pencil(base, current);
    EndpointCollector col(n - 1);
    const bool has_next = j + 1 < centers.size();
    SeriesAccumulator acc(has_next ? centers[j + 1] - current : Complex(0), n);
    sweep_formal_powers(sp.pencil, u0, 0, count,
                        [&](std::size_t m, const SampledFunction& xt, const SampledFunction& x) {
                          col(m, xt, x);
                          if (has_next) acc(m, xt, x);
                        });
    EndpointData ed = make_endpoint_data(sp.pencil, u0, current, col);
    steps.push_back({current, characteristic(ed), coefficient_majorant(sp.pencil, u0), std::move(ed)});
    if (has_next) u0 = particular_from_basis(acc.finish(u0, sp.pencil.p()));
  }
  return steps;
}

// ---------------------------------------------------------------------------
// damped string  y'' = 2 a(x) lambda y + b(x) lambda^2 y on [0, L]

struct StringProblem {
  SampledFunction damping;  // a(x), 2a = i Gamma
  SampledFunction density;  // b(x)

  StringProblem(SampledFunction a, SampledFunction b) : damping(std::move(a)), density(std::move(b)) {
    detail::require_same_grid(damping, density);
    if (damping.grid().a() != 0.0) throw InputError("pencil_problems", "string interval must start at 0");
  }

  const Grid& grid() const noexcept { return damping.grid(); }
  double length() const noexcept { return grid().b(); }

  /// p = 1, q = 0, r1 = 2a, r2 = b
  PencilSpec pencil() const {
    const Grid& g = grid();
    return PencilSpec(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                      {scale(damping, 2.0), density});
  }
};

/// Phi_M(lambda) = sum_n (lambda - center)^n X(2n+1)(L) for the pencil shifted
/// to `center`. At center 0 the particular solution is u0 = 1; otherwise it is
/// obtained by a direct hop from center 0.
inline CharacteristicSeries string_characteristic(const StringProblem& sp, std::size_t M, Complex center = 0) {
  const PencilSpec base = sp.pencil();
  const Grid& g = sp.grid();
  const auto one = ParticularSolution::make(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                                            Provenance::closed_form);
  auto steps = run_shift_chain(base, one, {center}, M, dirichlet_characteristic);
  return std::move(steps.front().series);
}

// ---------------------------------------------------------------------------
// Dirac system  u' + (v - E) w = lambda u,  w' - (v - E) u = -lambda w

struct DiracSpec {
  SampledFunction v;
  Complex energy = 0;
  std::optional<SampledFunction> v_prime;

  DiracSpec(SampledFunction pot, Complex e, std::optional<SampledFunction> dv = std::nullopt)
      : v(std::move(pot)), energy(e), v_prime(std::move(dv)) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(v[i] - energy) < kDefaultDivisionFloor) throw NodeError("pencil_problems", "v - E vanishes", i);
    if (v_prime) detail::require_same_grid(v, *v_prime);
  }
};

/// (w'/(v-E))' + (v-E) w = lambda^2 w/(v-E) - lambda (1/(v-E))' w,
/// i.e. r1 = v' / (v-E)^2.
inline PencilSpec dirac_to_pencil(const DiracSpec& d) {
  const Grid& g = d.v.grid();
  const SampledFunction dv = d.v_prime ? *d.v_prime : derivative(d.v);
  const SampledFunction diff = map(d.v, [&](Complex x) { return x - d.energy; });
  const SampledFunction inv = map(diff, [](Complex x) { return 1.0 / x; });
  std::vector<Complex> r1(g.size());
  for (std::size_t i = 0; i < r1.size(); ++i) r1[i] = dv[i] / (diff[i] * diff[i]);
  return PencilSpec(inv, diff, {SampledFunction(g, std::move(r1)), inv});
}

/// u = (lambda w + w') / (v - E)
inline SampledFunction dirac_first_component(const DiracSpec& d, Complex lambda, const SampledFunction& w,
                                             const SampledFunction& w_prime) {
  std::vector<Complex> u(w.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (lambda * w[i] + w_prime[i]) / (d.v[i] - d.energy);
  return SampledFunction(w.grid(), std::move(u));
}

}  // namespace spps
