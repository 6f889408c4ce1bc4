#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "spps/error.hpp"
#include "spps/grid.hpp"

namespace spps {

enum class SeriesProvenance { string, zs, custom_boundary, custom };

inline const char* to_string(SeriesProvenance p) {
  switch (p) {
    case SeriesProvenance::string: return "string";
    case SeriesProvenance::zs: return "zs";
    case SeriesProvenance::custom_boundary: return "custom-boundary";
    case SeriesProvenance::custom: return "custom";
  }
  return "?";
}

/// Phi_M(lambda) = sum_{k=0..M} a_k (lambda - center)^k.
struct CharacteristicSeries {
  Complex center = 0;
  std::vector<Complex> coeffs;
  SeriesProvenance provenance = SeriesProvenance::custom;

  CharacteristicSeries() = default;
  CharacteristicSeries(Complex c, std::vector<Complex> a, SeriesProvenance prov)
      : center(c), coeffs(std::move(a)), provenance(prov) {
    if (coeffs.empty()) throw InputError("series", "empty coefficient list");
    for (const auto& v : coeffs)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw SolverError("series", "non-finite Taylor coefficient");
  }

  std::size_t order() const noexcept { return coeffs.size() - 1; }

  Complex operator()(Complex z) const noexcept {
    const Complex t = z - center;
    Complex s = 0;
    for (std::size_t k = coeffs.size(); k-- > 0;) s = s * t + coeffs[k];
    return s;
  }

  Complex derivative(Complex z) const noexcept {
    const Complex t = z - center;
    Complex s = 0;
    for (std::size_t k = coeffs.size(); k-- > 1;) s = s * t + static_cast<double>(k) * coeffs[k];
    return s;
  }

  /// sum |a_k| |z - center|^k, the scale against which rounding in
  /// operator() is measured.
  double magnitude(Complex z) const noexcept {
    const double t = std::abs(z - center);
    double s = 0;
    for (std::size_t k = coeffs.size(); k-- > 0;) s = s * t + std::abs(coeffs[k]);
    return s;
  }

  /// Rounding-error floor for |Phi_M(z)|.
  double noise(Complex z) const noexcept {
    return 4.0 * static_cast<double>(coeffs.size()) * std::numeric_limits<double>::epsilon() *
           magnitude(z);
  }
};

}  // namespace spps
