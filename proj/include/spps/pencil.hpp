#pragma once

// Formal powers for polynomial Sturm-Liouville pencils
//
//     (p u')' + q u = u * sum_{k=1..N} lambda^k r_k
//
// and the power-series solutions built from them:
//
//     u1 = u0 * sum_n lambda^n Xt(2n),   u2 = u0 * sum_n lambda^n X(2n+1).
//
// The functions Xt(n), X(n) are iterated integrals anchored at a grid node x0
// and seeded by a non-vanishing solution u0 of (p u0')' + q u0 = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "spps/error.hpp"
#include "spps/grid.hpp"

namespace spps {

/// Coefficients p, q, r_1..r_N of a pencil, all on one grid.
class PencilSpec {
 public:
  PencilSpec(SampledFunction p, SampledFunction q, std::vector<SampledFunction> r)
      : p_(std::move(p)), q_(std::move(q)), r_(std::move(r)) {
    if (r_.empty()) throw InputError("pencil", "need at least one coefficient r_k (N >= 1)");
    detail::require_same_grid(p_, q_);
    for (const auto& rk : r_) detail::require_same_grid(p_, rk);
  }

  const Grid& grid() const noexcept { return p_.grid(); }
  const SampledFunction& p() const noexcept { return p_; }
  const SampledFunction& q() const noexcept { return q_; }
  /// r_k for k = 1..N.
  const SampledFunction& r(std::size_t k) const { return r_.at(k - 1); }
  const std::vector<SampledFunction>& r() const noexcept { return r_; }
  std::size_t degree() const noexcept { return r_.size(); }

 private:
  SampledFunction p_;
  SampledFunction q_;
  std::vector<SampledFunction> r_;
};

enum class Provenance { user_supplied, closed_form, spps_built };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::user_supplied: return "user-supplied";
    case Provenance::closed_form: return "closed-form";
    case Provenance::spps_built: return "spps-built";
  }
  return "?";
}

inline constexpr double kDefaultVanishingFloor = 1e-12;

/// A non-vanishing solution u0 of the lambda = 0 equation with its derivative.
struct ParticularSolution {
  SampledFunction u0;
  SampledFunction u0_prime;
  Provenance provenance;
  double min_modulus = 0;

  /// Validates that u0 stays above `floor_rel * max|u0|` at every node.
  static ParticularSolution make(SampledFunction u0, SampledFunction u0_prime, Provenance prov,
                                 double floor_rel = kDefaultVanishingFloor) {
    detail::require_same_grid(u0, u0_prime);
    const double peak = u0.max_abs();
    double lo = std::numeric_limits<double>::infinity();
    std::size_t where = 0;
    for (std::size_t i = 0; i < u0.size(); ++i) {
      const double m = std::abs(u0[i]);
      if (m < lo) { lo = m; where = i; }
    }
    if (!(lo > floor_rel * peak))
      throw NodeError("spps_core",
                      "particular solution nearly vanishes (|u0| = " + std::to_string(lo) +
                          "); supply u0 explicitly or apply a spectral shift",
                      where);
    return ParticularSolution{std::move(u0), std::move(u0_prime), prov, lo};
  }

  const Grid& grid() const noexcept { return u0.grid(); }
};

// ---------------------------------------------------------------------------
// formal power sweep

namespace detail {

template <class V>
bool call_visitor(V& visit, std::size_t n, const SampledFunction& xt, const SampledFunction& x) {
  if constexpr (std::is_same_v<decltype(visit(n, xt, x)), bool>) {
    return visit(n, xt, x);
  } else {
    visit(n, xt, x);
    return true;
  }
}

}  // namespace detail

/// Generates Xt(n) and X(n) for n = 0..count-1 and hands each pair to
/// `visit(n, xt, x)`. Only a window of 2N previous powers is kept alive.
/// A visitor returning `false` stops the sweep early.
template <class Visitor>
void sweep_formal_powers(const PencilSpec& spec, const ParticularSolution& u0, std::size_t anchor,
                         std::size_t count, Visitor&& visit) {
  const Grid& g = spec.grid();
  if (!(u0.grid() == g)) throw InputError("spps_core", "particular solution lives on another grid");
  if (anchor >= g.size()) throw InputError("spps_core", "anchor outside the grid");
  if (spec.p()[anchor] == Complex(0)) throw InputError("spps_core", "p(x0) must be nonzero");
  const std::size_t n = g.size();
  const std::size_t N = spec.degree();

  // u0^2 r_k and 1/(u0^2 p)
  std::vector<std::vector<Complex>> w(N, std::vector<Complex>(n));
  std::vector<Complex> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex u2 = u0.u0[i] * u0.u0[i];
    for (std::size_t k = 0; k < N; ++k) w[k][i] = u2 * spec.r()[k][i];
    const Complex d = u2 * spec.p()[i];
    if (std::abs(d) < kDefaultDivisionFloor) throw NodeError("spps_core", "u0^2 p vanishes", i);
    inv[i] = 1.0 / d;
  }

  const std::size_t ring = 2 * N;
  std::vector<std::optional<SampledFunction>> hist_t(ring), hist_x(ring);
  const SampledFunction one = SampledFunction::constant(g, 1.0);
  hist_t[0] = one;
  hist_x[0] = one;
  if (count == 0 || !detail::call_visitor(visit, 0, one, one)) return;

  std::vector<Complex> it(n), ix(n);
  auto at = [&](auto& hist, std::size_t m) -> const SampledFunction& { return *hist[m % ring]; };
  // integrand sum_k P(m-2k+1) w_k over admissible k
  auto accumulate_weighted = [&](auto& hist, std::size_t m, std::vector<Complex>& out) {
    std::fill(out.begin(), out.end(), Complex(0));
    for (std::size_t k = 1; k <= N && 2 * k <= m + 1; ++k) {
      const SampledFunction& prev = at(hist, m + 1 - 2 * k);
      const auto& wk = w[k - 1];
      for (std::size_t i = 0; i < n; ++i) out[i] += prev[i] * wk[i];
    }
  };
  auto weighted_by_inv = [&](const SampledFunction& prev, std::vector<Complex>& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = prev[i] * inv[i];
  };

  for (std::size_t m = 1; m < count; ++m) {
    if (m % 2 == 1) {
      accumulate_weighted(hist_t, m, it);
      weighted_by_inv(at(hist_x, m - 1), ix);
    } else {
      weighted_by_inv(at(hist_t, m - 1), it);
      accumulate_weighted(hist_x, m, ix);
    }
    SampledFunction xt = cumulative_integral(SampledFunction(g, it), anchor);
    SampledFunction x = cumulative_integral(SampledFunction(g, ix), anchor);
    const bool more = detail::call_visitor(visit, m, xt, x);
    hist_t[m % ring] = std::move(xt);
    hist_x[m % ring] = std::move(x);
    if (!more) return;
  }
}

/// Full table Xt(0..2M+1), X(0..2M+1).
struct FormalPowerTable {
  double x0;
  std::size_t anchor;
  ParticularSolution u0;
  SampledFunction p;
  std::size_t M;
  std::vector<SampledFunction> xt;
  std::vector<SampledFunction> x;
};

inline FormalPowerTable build_formal_powers(const PencilSpec& spec, const ParticularSolution& u0,
                                            double x0, std::size_t M) {
  const std::size_t anchor = spec.grid().index_of(x0);
  FormalPowerTable t{spec.grid().node(anchor), anchor, u0, spec.p(), M, {}, {}};
  t.xt.reserve(2 * M + 2);
  t.x.reserve(2 * M + 2);
  sweep_formal_powers(spec, u0, anchor, 2 * M + 2,
                      [&](std::size_t, const SampledFunction& xt, const SampledFunction& x) {
                        t.xt.push_back(xt);
                        t.x.push_back(x);
                      });
  return t;
}

// ---------------------------------------------------------------------------
// solutions

/// u1, u2 and their derivatives at one value of the spectral parameter.
struct BasisSolutions {
  SampledFunction u1, u1_prime, u2, u2_prime;
};

struct Solution {
  SampledFunction u, u_prime;
};

namespace detail {

// u1 = u0 St0, u1' = u0' St0 + St1 / (u0 p),
// u2 = u0 S1,  u2' = u0' S1 + S0 / (u0 p)
inline BasisSolutions assemble_basis(const ParticularSolution& u0, const SampledFunction& p,
                                     const std::vector<Complex>& st0, const std::vector<Complex>& st1,
                                     const std::vector<Complex>& s0, const std::vector<Complex>& s1) {
  const std::size_t n = p.size();
  std::vector<Complex> u1(n), du1(n), u2(n), du2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex v = u0.u0[i], dv = u0.u0_prime[i];
    const Complex inv = 1.0 / (v * p[i]);
    u1[i] = v * st0[i];
    du1[i] = dv * st0[i] + st1[i] * inv;
    u2[i] = v * s1[i];
    du2[i] = dv * s1[i] + s0[i] * inv;
  }
  const Grid& g = p.grid();
  return {SampledFunction(g, std::move(u1)), SampledFunction(g, std::move(du1)),
          SampledFunction(g, std::move(u2)), SampledFunction(g, std::move(du2))};
}

}  // namespace detail

/// Running sums of the four series at a fixed lambda, fed by a sweep.
class SeriesAccumulator {
 public:
  SeriesAccumulator(Complex lambda, std::size_t n_nodes)
      : lambda_(lambda), st0_(n_nodes), st1_(n_nodes), s0_(n_nodes), s1_(n_nodes) {}

  void operator()(std::size_t m, const SampledFunction& xt, const SampledFunction& x) {
    const std::size_t n = st0_.size();
    if (m % 2 == 0) {
      // lambda^{m/2}
      for (std::size_t i = 0; i < n; ++i) {
        st0_[i] += pow_ * xt[i];
        s0_[i] += pow_ * x[i];
      }
      last_term_ = std::max(max_abs(xt), max_abs(x)) * std::abs(pow_);
    } else {
      const Complex next = pow_ * lambda_;
      for (std::size_t i = 0; i < n; ++i) {
        st1_[i] += next * xt[i];
        s1_[i] += pow_ * x[i];
      }
      last_term_ = std::max(last_term_, std::max(std::abs(next) * max_abs(xt),
                                                 std::abs(pow_) * max_abs(x)));
      pow_ = next;
    }
  }

  /// max |term| contributed by the last (even, odd) pair of powers
  double last_term() const noexcept { return last_term_; }

  double scale() const {
    double m = 0;
    for (std::size_t i = 0; i < st0_.size(); ++i)
      m = std::max({m, std::abs(st0_[i]), std::abs(s1_[i]), std::abs(st1_[i]), std::abs(s0_[i])});
    return m;
  }

  BasisSolutions finish(const ParticularSolution& u0, const SampledFunction& p) const {
    return detail::assemble_basis(u0, p, st0_, st1_, s0_, s1_);
  }

 private:
  static double max_abs(const SampledFunction& f) { return f.max_abs(); }

  Complex lambda_;
  Complex pow_ = 1.0;
  double last_term_ = 0;
  std::vector<Complex> st0_, st1_, s0_, s1_;
};

/// u1, u2 at lambda from a stored table, summed by Horner's scheme.
inline BasisSolutions basis_at(const FormalPowerTable& t, Complex lambda) {
  const std::size_t n = t.p.size();
  std::vector<Complex> st0(n), st1(n), s0(n), s1(n);
  for (std::size_t k = t.M + 1; k-- > 0;) {
    const auto& xe = t.xt[2 * k];
    const auto& xo = t.xt[2 * k + 1];
    const auto& ye = t.x[2 * k];
    const auto& yo = t.x[2 * k + 1];
    for (std::size_t i = 0; i < n; ++i) {
      st0[i] = st0[i] * lambda + xe[i];
      st1[i] = st1[i] * lambda + xo[i];
      s0[i] = s0[i] * lambda + ye[i];
      s1[i] = s1[i] * lambda + yo[i];
    }
  }
  for (auto& v : st1) v *= lambda;  // sum lambda^{n+1} Xt(2n+1)
  return detail::assemble_basis(t.u0, t.p, st0, st1, s0, s1);
}

/// Same result as basis_at, without storing the table.
inline BasisSolutions basis_streaming(const PencilSpec& spec, const ParticularSolution& u0,
                                      std::size_t anchor, std::size_t M, Complex lambda) {
  SeriesAccumulator acc(lambda, spec.grid().size());
  sweep_formal_powers(spec, u0, anchor, 2 * M + 2, acc);
  return acc.finish(u0, spec.p());
}

/// A stored table together with the evaluation entry point u = c1 u1 + c2 u2.
class SolutionPair {
 public:
  explicit SolutionPair(FormalPowerTable table) : table_(std::move(table)) {}

  const FormalPowerTable& table() const noexcept { return table_; }

  BasisSolutions basis(Complex lambda) const { return basis_at(table_, lambda); }

 private:
  FormalPowerTable table_;
};

inline Solution combine(const BasisSolutions& b, Complex c1, Complex c2) {
  return {c1 * b.u1 + c2 * b.u2, c1 * b.u1_prime + c2 * b.u2_prime};
}

inline Solution evaluate_solution(const SolutionPair& pair, Complex lambda, Complex c1, Complex c2) {
  return combine(pair.basis(lambda), c1, c2);
}

// ---------------------------------------------------------------------------
// diagnostics

/// Relative residual of (p u')' + q u = u sum lambda^k r_k in integral form:
/// max |p u'(x) - p u'(x0) - int_{x0}^x u (sum lambda^k r_k - q)|, divided by
/// the larger of max |p u'| and max |integral|.
inline double ode_integral_residual(const PencilSpec& spec, Complex lambda, const SampledFunction& u,
                                    const SampledFunction& u_prime, std::size_t anchor) {
  const std::size_t n = u.size();
  std::vector<Complex> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = 0, lk = 1;
    for (std::size_t k = 1; k <= spec.degree(); ++k) {
      lk *= lambda;
      s += lk * spec.r(k)[i];
    }
    rhs[i] = u[i] * (s - spec.q()[i]);
  }
  const SampledFunction integral = cumulative_integral(SampledFunction(u.grid(), rhs), anchor);
  const Complex flux0 = spec.p()[anchor] * u_prime[anchor];
  double err = 0, sc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex flux = spec.p()[i] * u_prime[i];
    err = std::max(err, std::abs(flux - flux0 - integral[i]));
    sc = std::max({sc, std::abs(flux), std::abs(integral[i])});
  }
  return sc > 0 ? err / sc : err;
}

/// p (u1 u2' - u1' u2) at every node.
inline SampledFunction scaled_wronskian(const PencilSpec& spec, const BasisSolutions& b) {
  std::vector<Complex> w(b.u1.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = spec.p()[i] * (b.u1[i] * b.u2_prime[i] - b.u1_prime[i] * b.u2[i]);
  return SampledFunction(b.u1.grid(), std::move(w));
}

// ---------------------------------------------------------------------------
// particular solutions

struct AutoParticularOptions {
  std::size_t max_order = 2000;  // cap on the number of (even, odd) power pairs
  double floor_rel = kDefaultVanishingFloor;
};

/// u0 = u1 + i u2 for (p u')' + q u = 0, where u1, u2 are series solutions of
/// (p u')' = lambda (-q) u at lambda = 1 seeded by v0 = 1. The series is
/// summed until its terms drop below 1e-17 of the running sums.
inline ParticularSolution auto_particular_solution(const SampledFunction& p, const SampledFunction& q,
                                                   std::size_t anchor,
                                                   const AutoParticularOptions& opt = {}) {
  const Grid& g = p.grid();
  const PencilSpec base(p, SampledFunction::constant(g, 0.0), {scale(q, -1.0)});
  const auto one = ParticularSolution{SampledFunction::constant(g, 1.0),
                                      SampledFunction::constant(g, 0.0), Provenance::closed_form, 1.0};
  SeriesAccumulator acc(1.0, g.size());
  int quiet = 0;
  sweep_formal_powers(base, one, anchor, 2 * opt.max_order + 2,
                      [&](std::size_t m, const SampledFunction& xt, const SampledFunction& x) {
                        acc(m, xt, x);
                        if (m % 2 == 0 || m < 3) return true;
                        quiet = acc.last_term() <= 1e-17 * acc.scale() ? quiet + 1 : 0;
                        return quiet < 3;
                      });
  if (quiet < 3)
    throw SolverError("spps_core", "particular-solution series did not converge within " +
                                       std::to_string(opt.max_order) + " terms");
  const BasisSolutions b = acc.finish(one, p);
  const Complex I(0, 1);
  return ParticularSolution::make(b.u1 + I * b.u2, b.u1_prime + I * b.u2_prime,
                                  Provenance::spps_built, opt.floor_rel);
}

/// User-supplied u0 (validated) or the automatic construction.
inline ParticularSolution build_particular_solution(const SampledFunction& p, const SampledFunction& q,
                                                    std::optional<std::pair<SampledFunction, SampledFunction>> user,
                                                    std::size_t anchor = 0,
                                                    const AutoParticularOptions& opt = {}) {
  if (user) return ParticularSolution::make(user->first, user->second, Provenance::user_supplied, opt.floor_rel);
  return auto_particular_solution(p, q, anchor, opt);
}

// ---------------------------------------------------------------------------
// truncation tails

/// m = max over the grid of |u0^2 r_k| (all k) and |1 / (u0^2 p)|.
inline double coefficient_majorant(const PencilSpec& spec, const ParticularSolution& u0) {
  double m = 0;
  for (std::size_t i = 0; i < spec.grid().size(); ++i) {
    const Complex u2 = u0.u0[i] * u0.u0[i];
    for (const auto& rk : spec.r()) m = std::max(m, std::abs(u2 * rk[i]));
    m = std::max(m, 1.0 / std::abs(u2 * spec.p()[i]));
  }
  return m;
}

/// sum_{n > M} Mhat^n / (2 floor(n/N))!, or +inf when it cannot be represented.
inline double tail_bound_from(double mhat, std::size_t N, std::size_t M) {
  if (mhat == 0) return 0;
  constexpr double kLogMax = 700;
  const double lm = std::log(mhat);
  double sum = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n = M + 1; n < M + 1 + 1000000; ++n) {
    const double lt = static_cast<double>(n) * lm - std::lgamma(2.0 * static_cast<double>(n / N) + 1);
    if (lt > kLogMax) return std::numeric_limits<double>::infinity();
    const double t = std::exp(lt);
    sum += t;
    if (sum > std::exp(kLogMax)) return std::numeric_limits<double>::infinity();
    // stop once terms are falling and negligible
    if (t < prev && t < 1e-18 * sum && n > M + 2 * N) return sum;
    prev = t;
  }
  return std::numeric_limits<double>::infinity();
}

/// Bound on sup |sum_{n > M} lambda^n Xt(2n)| for |lambda| <= lambda_abs,
/// with Mhat = lambda_abs ((m (b - a))^2 + 1).
inline double tail_bound(const PencilSpec& spec, const ParticularSolution& u0, double lambda_abs,
                         std::size_t M) {
  const double m = coefficient_majorant(spec, u0);
  const double ml = m * spec.grid().length();
  return tail_bound_from(lambda_abs * (ml * ml + 1), spec.degree(), M);
}

/// The sharper majorant behind the bound above:
///   |Xt(2n)|, |X(2n)| <= E_n = sum_k C(n,k) tau^{2(n-k)} / (2(n-k))!,
///   |X(2n+1)|         <= O_n = sum_k C(n,k) tau^{2(n-k)+1} / (2(n-k)+1)!,
/// with k = 0..n - floor(n/N) and tau = m |x - x0|.
class MajorantSeries {
 public:
  MajorantSeries(double tau, std::size_t N) : tau_(tau), N_(N) {}

  double log_even(std::size_t n) const { return log_term(n, 0); }
  double log_odd(std::size_t n) const { return log_term(n, 1); }

  /// sum_{n >= from} r^n E_n
  double even_tail(double r, std::size_t from) const { return tail(r, from, 0); }
  /// sum_{n >= from} r^n O_n
  double odd_tail(double r, std::size_t from) const { return tail(r, from, 1); }

 private:
  double log_term(std::size_t n, int parity) const {
    const double ninf = -std::numeric_limits<double>::infinity();
    const double lt = tau_ > 0 ? std::log(tau_) : ninf;
    const std::size_t jmin = n / N_;
    double hi = ninf;
    std::vector<double> parts;
    parts.reserve(n - jmin + 1);
    for (std::size_t j = jmin; j <= n; ++j) {
      const double e = static_cast<double>(2 * j + parity);
      if (e > 0 && tau_ == 0) continue;
      const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
      const double v = lc + (e > 0 ? e * lt : 0.0) - std::lgamma(e + 1);
      parts.push_back(v);
      hi = std::max(hi, v);
    }
    if (hi == ninf) return ninf;
    double s = 0;
    for (double v : parts) s += std::exp(v - hi);
    return hi + std::log(s);
  }

  double tail(double r, std::size_t from, int parity) const {
    if (r == 0) {
      if (from > 0) return 0;
      return std::exp(log_term(0, parity));
    }
    constexpr double kLogMax = 700;
    const double lr = std::log(r);
    double sum = 0, prev = std::numeric_limits<double>::infinity();
    for (std::size_t n = from; n < from + 200000; ++n) {
      const double lt = log_term(n, parity);
      if (lt == -std::numeric_limits<double>::infinity()) {
        if (n > from + 2 * N_ + 2) return sum;
        continue;
      }
      const double l = static_cast<double>(n) * lr + lt;
      if (l > kLogMax) return std::numeric_limits<double>::infinity();
      const double t = std::exp(l);
      sum += t;
      if (t < prev && t <= 1e-18 * sum && n > from + 2 * N_) return sum;
      prev = t;
    }
    return std::numeric_limits<double>::infinity();
  }

  double tau_;
  std::size_t N_;
};

}  // namespace spps
