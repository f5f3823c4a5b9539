#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "oldroyd/field.hpp"
#include "oldroyd/spectral_grid.hpp"

namespace oldroyd::testing {

using spectral::Complex;
using spectral::GridPtr;
using spectral::ModeIndex;

/// Sets coefficient `value` at k and its conjugate at -k (a real field).
template <class Kind>
void set_real_mode(spectral::Field<Kind>& f, int component, const ModeIndex& k, Complex value) {
  const auto& grid = f.grid();
  const auto m = grid.flat_index(k);
  f.component(component)[m] = value;
  f.component(component)[grid.mirror(m)] = std::conj(value);
}

/// Direct (non-FFT) evaluation of sum_k c_k exp(i xi.x) at every grid point.
inline std::vector<Complex> direct_synthesis(const spectral::SpectralGrid& grid,
                                             std::span<const Complex> coeffs) {
  std::vector<Complex> out(grid.size());
  for (std::size_t x = 0; x < grid.size(); ++x) {
    Complex acc{};
    for (std::size_t m = 0; m < grid.size(); ++m) {
      if (coeffs[m] == Complex{}) continue;
      double phase = 0.0;
      for (int a = 0; a < grid.dim(); ++a) phase += grid.xi(m, a) * grid.coordinate(x, a);
      acc += coeffs[m] * std::polar(1.0, phase);
    }
    out[x] = acc;
  }
  return out;
}

/// Direct (non-FFT) analysis c_k = (1/N) sum_x f(x) exp(-i xi.x).
inline std::vector<Complex> direct_analysis(const spectral::SpectralGrid& grid, std::span<const Complex> values) {
  std::vector<Complex> out(grid.size());
  const double inv = 1.0 / static_cast<double>(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) {
    Complex acc{};
    for (std::size_t x = 0; x < grid.size(); ++x) {
      double phase = 0.0;
      for (int a = 0; a < grid.dim(); ++a) phase += grid.xi(m, a) * grid.coordinate(x, a);
      acc += values[x] * std::polar(1.0, -phase);
    }
    out[m] = acc * inv;
  }
  return out;
}

template <class Kind>
double max_abs_difference(const spectral::Field<Kind>& a, const spectral::Field<Kind>& b) {
  double worst = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    for (std::size_t m = 0; m < a.size(); ++m) {
      worst = std::max(worst, std::abs(a.component(c)[m] - b.component(c)[m]));
    }
  }
  return worst;
}

}  // namespace oldroyd::testing
