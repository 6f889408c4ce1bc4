#pragma once

// Generalized Zakharov-Shabat system
//
//     v1' =  lambda v1 + P v2
//     v2' = -lambda v2 - Q v1
//
// reduced, via v1 = -(v2' + lambda v2) / Q, to the quadratic pencil
// (v2'/Q)' + P v2 = lambda (Q'/Q^2) v2 + lambda^2 v2 / Q.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "spps/error.hpp"
#include "spps/expr.hpp"
#include "spps/grid.hpp"
#include "spps/pencil.hpp"
#include "spps/problems.hpp"
#include "spps/series.hpp"

namespace spps {

struct ZSProblem {
  SampledFunction Q, P, Q_prime;
  /// Semiclassical scaling parameter when the problem came from
  /// i eps v_x = q w + Lambda v; eigenvalues map back as Lambda = i eps lambda.
  std::optional<double> epsilon;

  ZSProblem(SampledFunction q, SampledFunction p, SampledFunction dq, std::optional<double> eps = std::nullopt)
      : Q(std::move(q)), P(std::move(p)), Q_prime(std::move(dq)), epsilon(eps) {
    detail::require_same_grid(Q, P);
    detail::require_same_grid(Q, Q_prime);
    const Grid& g = Q.grid();
    if (std::abs(g.a() + g.b()) > 1e-12 * g.length())
      throw InputError("zakharov_shabat", "grid must be symmetric about 0");
    for (std::size_t i = 0; i < Q.size(); ++i)
      if (std::abs(Q[i]) < kDefaultDivisionFloor) throw NodeError("zakharov_shabat", "Q vanishes", i);
  }

  const Grid& grid() const noexcept { return Q.grid(); }
  double half_width() const noexcept { return grid().b(); }

  std::optional<Complex> back_map(Complex lambda) const {
    if (!epsilon) return std::nullopt;
    return Complex(0, *epsilon) * lambda;
  }
};

/// p = 1/Q, q = P, r1 = Q'/Q^2, r2 = 1/Q
inline PencilSpec zs_to_pencil(const ZSProblem& zs) {
  const Grid& g = zs.grid();
  std::vector<Complex> inv(g.size()), r1(g.size());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    inv[i] = 1.0 / zs.Q[i];
    r1[i] = zs.Q_prime[i] * inv[i] * inv[i];
  }
  SampledFunction p(g, inv);
  return PencilSpec(p, zs.P, {SampledFunction(g, std::move(r1)), p});
}

inline bool same_values(const SampledFunction& a, const SampledFunction& b, double rel) {
  const double s = std::max(a.max_abs(), b.max_abs());
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > rel * s) return false;
  return true;
}

/// v0 = exp(i int_{-a}^x Q) when P = Q; otherwise the automatic construction.
inline ParticularSolution zs_particular_solution(const ZSProblem& zs) {
  if (same_values(zs.Q, zs.P, 1e-14)) {
    const SampledFunction phase = cumulative_integral(zs.Q, 0);
    const Complex I(0, 1);
    SampledFunction v0 = map(phase, [&](Complex t) { return std::exp(I * t); });
    SampledFunction dv0 = I * (zs.Q * v0);
    return ParticularSolution::make(std::move(v0), std::move(dv0), Provenance::closed_form);
  }
  const PencilSpec pen = zs_to_pencil(zs);
  return auto_particular_solution(pen.p(), pen.q(), 0);
}

struct ZSSolution {
  SampledFunction v1, v2;
};

/// v2 = c1 g1 + c2 g2, v1 = -(v2' + lambda v2) / Q.
inline ZSSolution zs_from_basis(const ZSProblem& zs, const BasisSolutions& b, Complex lambda, Complex c1,
                                Complex c2) {
  const Solution s = combine(b, c1, c2);
  std::vector<Complex> v1(s.u.size());
  for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = -(s.u_prime[i] + lambda * s.u[i]) / zs.Q[i];
  return {SampledFunction(zs.grid(), std::move(v1)), s.u};
}

inline ZSSolution zs_solution(const ZSProblem& zs, const FormalPowerTable& table, Complex lambda, Complex c1,
                              Complex c2) {
  return zs_from_basis(zs, basis_at(table, lambda), lambda, c1, c2);
}

/// Relative integral-form residual of both equations of the system.
inline double zs_system_residual(const ZSProblem& zs, Complex lambda, const ZSSolution& s) {
  const Grid& g = zs.grid();
  const std::size_t n = g.size();
  std::vector<Complex> f1(n), f2(n);
  for (std::size_t i = 0; i < n; ++i) {
    f1[i] = lambda * s.v1[i] + zs.P[i] * s.v2[i];
    f2[i] = -lambda * s.v2[i] - zs.Q[i] * s.v1[i];
  }
  const SampledFunction i1 = cumulative_integral(SampledFunction(g, f1), 0);
  const SampledFunction i2 = cumulative_integral(SampledFunction(g, f2), 0);
  double err = 0;
  const double sc = std::max({s.v1.max_abs(), s.v2.max_abs(), i1.max_abs(), i2.max_abs()});
  for (std::size_t i = 0; i < n; ++i) {
    err = std::max(err, std::abs(s.v1[i] - s.v1[0] - i1[i]));
    err = std::max(err, std::abs(s.v2[i] - s.v2[0] - i2[i]));
  }
  return sc > 0 ? err / sc : err;
}

/// a_k = v0(a) ((v0'(a) + center v0(a)) X(2k+1)(a) + v0(a) X(2k-1)(a)) + Q(a) X(2k)(a),
/// with powers anchored at -a (Q(a) = 1/p(a)).
inline CharacteristicSeries zs_characteristic(const EndpointData& d) {
  const std::size_t M = d.order();
  const Complex v = d.u0_right;
  const Complex dv = d.du0_right + d.center * v;
  const Complex qa = 1.0 / d.p_right;
  std::vector<Complex> a(M + 1);
  for (std::size_t k = 0; k <= M; ++k) {
    const long m = static_cast<long>(k);
    a[k] = v * (dv * d.x_at(2 * m + 1) + v * d.x_at(2 * m - 1)) + qa * d.x_at(2 * m);
  }
  return {d.center, std::move(a), SeriesProvenance::zs};
}

/// Dispersion series centered at `center` (0 = unshifted).
inline CharacteristicSeries zs_dispersion(const ZSProblem& zs, std::size_t M, Complex center = 0) {
  const PencilSpec pen = zs_to_pencil(zs);
  auto steps = run_shift_chain(pen, zs_particular_solution(zs), {center}, M, zs_characteristic);
  return std::move(steps.front().series);
}

/// Sup bound for |Phi - Phi_M| at |lambda - center| <= r for the dispersion
/// series, from the majorants of the X powers.
inline double zs_tail_bound(const EndpointData& d, double m, double length, double r) {
  const std::size_t M = d.order();
  const MajorantSeries maj(m * length, 2);
  const double odd = maj.odd_tail(r, M + 1);
  const double odd_shift = r * maj.odd_tail(r, M);  // lambda^k X(2k-1), k > M
  const double even = maj.even_tail(r, M + 1);
  const Complex v = d.u0_right;
  const Complex dv = d.du0_right + d.center * v;
  return std::abs(v * dv) * odd + std::norm(v) * odd_shift + std::abs(1.0 / d.p_right) * even;
}

/// int max(|P|, |Q|) dx over the grid, rounded up slightly.
inline double zs_potential_mass(const ZSProblem& zs) {
  std::vector<Complex> m(zs.Q.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max(std::abs(zs.Q[i]), std::abs(zs.P[i]));
  const SampledFunction f(zs.grid(), std::move(m));
  return 1.000001 * cumulative_integral(f, 0).back().real();
}

/// Second bound for |Phi - Phi_M| at |lambda - center| <= r. The series equals
/// K V1(a; lambda) with V the solution with V(-a) = (1, 0) and
/// K = u0(a) Q(a) / u0(-a); Gronwall gives |V1(a)| <= exp(2a|lambda| + mass),
/// and Cauchy's estimate on |lambda - center| = R bounds the coefficients.
/// Minimized over R > r; does not grow with 1/Q like the majorant above.
inline double zs_cauchy_tail_bound(const EndpointData& d, double half_width, double mass, double r) {
  const std::size_t M = d.order();
  const double logK = std::log(std::abs(d.u0_right)) - std::log(std::abs(d.p_right)) - std::log(std::abs(d.u0_left));
  const double c = std::abs(d.center);
  if (r == 0) return 0;
  double best = std::numeric_limits<double>::infinity();
  // log of B(R) (r/R)^{M+1} / (1 - r/R), scanned geometrically
  const double R0 = std::max(r * 1.01, static_cast<double>(M + 1) / (2 * half_width));
  for (int k = -200; k <= 200; ++k) {
    const double R = R0 * std::pow(1.02, k);
    if (R <= r * 1.0001) continue;
    const double q = r / R;
    const double lb = logK + 2 * half_width * (c + R) + mass + static_cast<double>(M + 1) * std::log(q) - std::log1p(-q);
    best = std::min(best, lb);
  }
  return best > 700 ? std::numeric_limits<double>::infinity() : std::exp(best);
}

// ---------------------------------------------------------------------------
// potential catalog

struct KlausShaw {
  double s = 1;
};
/// q = A e^{iS/eps}, A = S = sech(2x)
struct Bronski {
  double eps = 0.2;
};
/// q = A e^{iS/eps}, A = -sech x, S = -mu ln cosh x
struct Tovbis {
  double mu = 0.5;
  double eps = 0.5;
};

/// User expressions in x. Without eps, `Q` is the system coefficient and
/// P defaults to conj(Q). With eps, `Q` is read as the focusing NLS
/// potential q and scaled like the semiclassical kinds.
struct ExpressionPotential {
  std::string Q;
  std::optional<std::string> P;
  std::optional<double> eps;
};

using PotentialKind = std::variant<KlausShaw, Bronski, Tovbis, ExpressionPotential>;

struct PotentialSpec {
  PotentialKind kind;
  double half_width = 10;
};

inline double default_half_width(const PotentialKind& kind) {
  return std::holds_alternative<KlausShaw>(kind) ? 1.0 : 10.0;
}

inline double sech(double x) { return 1.0 / std::cosh(x); }

/// Q, P = conj(Q), Q' on the grid (which must span [-a, a]). The
/// semiclassical kinds use Q = (i/eps) conj(q).
inline ZSProblem materialize_potential(const PotentialKind& kind, const Grid& grid) {
  const Complex I(0, 1);
  auto conj_of = [](const SampledFunction& f) { return map(f, [](Complex z) { return std::conj(z); }); };
  return std::visit(
      [&](const auto& k) -> ZSProblem {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, KlausShaw>) {
          if (std::abs(grid.a() + 1) > 1e-14 || std::abs(grid.b() - 1) > 1e-14)
            throw InputError("zakharov_shabat", "klaus_shaw lives on [-1, 1]");
          constexpr double kPi = 3.14159265358979323846;
          const double s = k.s;
          auto Q = SampledFunction::tabulate(grid, [&](double x) { return s * (-1 + 3 * kPi / 4 + 3 * x * x); });
          auto dQ = SampledFunction::tabulate(grid, [&](double x) { return 6 * s * x; });
          return ZSProblem(Q, Q, dQ);
        } else if constexpr (std::is_same_v<K, ExpressionPotential>) {
          const expr::Expr e = expr::parse(k.Q);
          SampledFunction f = expr::evaluate_on_grid(e, grid);
          SampledFunction df = f;
          try {
            df = expr::evaluate_on_grid(expr::differentiate(e), grid);
          } catch (const InputError&) {
            df = derivative(f);
          }
          if (k.eps) {
            if (!(*k.eps > 0)) throw InputError("zakharov_shabat", "semiclassical eps must be positive");
            const Complex s = I / *k.eps;
            SampledFunction Q = s * conj_of(f);
            SampledFunction dQ = s * conj_of(df);
            return ZSProblem(Q, conj_of(Q), dQ, *k.eps);
          }
          SampledFunction P = k.P ? expr::evaluate_on_grid(expr::parse(*k.P), grid) : conj_of(f);
          return ZSProblem(f, P, df);
        } else {
          // amplitude, phase and their derivatives
          double eps = k.eps;
          std::function<double(double)> A, dA, S, dS;
          if constexpr (std::is_same_v<K, Bronski>) {
            A = S = [](double x) { return sech(2 * x); };
            dA = dS = [](double x) { return -2 * sech(2 * x) * std::tanh(2 * x); };
          } else {
            const double mu = k.mu;
            A = [](double x) { return -sech(x); };
            dA = [](double x) { return sech(x) * std::tanh(x); };
            S = [mu](double x) { return -mu * std::log(std::cosh(x)); };
            dS = [mu](double x) { return -mu * std::tanh(x); };
          }
          if (!(eps > 0)) throw InputError("zakharov_shabat", "semiclassical eps must be positive");
          // Q = (i/eps) A e^{-iS/eps}, Q' = (i/eps)(A' - i A S'/eps) e^{-iS/eps}
          auto Q = SampledFunction::tabulate(grid, [&](double x) {
            return (I / eps) * A(x) * std::exp(-I * S(x) / eps);
          });
          auto dQ = SampledFunction::tabulate(grid, [&](double x) {
            return (I / eps) * (dA(x) - I * A(x) * dS(x) / eps) * std::exp(-I * S(x) / eps);
          });
          return ZSProblem(Q, conj_of(Q), dQ, eps);
        }
      },
      kind);
}

inline ZSProblem materialize_potential(const PotentialSpec& spec, const Grid& grid) {
  const double tol = 1e-12 * std::max(1.0, spec.half_width);
  if (std::abs(grid.a() + spec.half_width) > tol || std::abs(grid.b() - spec.half_width) > tol)
    throw InputError("zakharov_shabat", "grid must span [-a, a] for the truncation half-width");
  return materialize_potential(spec.kind, grid);
}

}  // namespace spps
