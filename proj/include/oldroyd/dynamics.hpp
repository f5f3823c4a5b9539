#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "oldroyd/fft.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/noise.hpp"
#include "oldroyd/spectral_ops.hpp"

namespace oldroyd {

/// Coefficients of the Oldroyd system: viscosity nu, inverse relaxation time
/// a, slip parameter b, coupling constants mu1 (stress into momentum) and mu2
/// (deformation into stress). `nonlinear = false` drops both transport terms
/// and Q, leaving the linear Stokes-type system.
struct PhysicalParams {
  double nu = 0.1;
  double a = 0.0;
  double b = 0.0;
  double mu1 = 1.0;
  double mu2 = 1.0;
  bool nonlinear = true;

  void validate() const {
    auto nonneg = [](double x, const char* name) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string("params.") + name + " must be >= 0");
    };
    nonneg(nu, "nu");
    nonneg(a, "a");
    nonneg(mu1, "mu1");
    nonneg(mu2, "mu2");
    if (!(b >= -1.0 && b <= 1.0)) {
      std::ostringstream os;
      os << "params.b = " << b << " outside [-1, 1]";
      throw std::invalid_argument(os.str());
    }
  }
};

/// Velocity (solenoidal) and extra stress at time t.
struct FlowState {
  double t = 0.0;
  VectorField v;
  TensorField tau;

  explicit FlowState(const GridPtr& grid) : v(grid), tau(grid) { tau.set_symmetric(true); }
  FlowState(double time, VectorField velocity, TensorField stress)
      : t(time), v(std::move(velocity)), tau(std::move(stress)) {}
};

/// D(v) = (grad v + grad^T v) / 2.
inline TensorField deformation(const VectorField& v) {
  const auto g = spectral::gradient(v);
  TensorField out(v.grid_ptr());
  const int d = v.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const auto gij = g(i, j);
      const auto gji = g(j, i);
      auto dst = out(i, j);
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] = 0.5 * (gij[m] + gji[m]);
    }
  }
  spectral::mirror_upper_triangle(out);
  return out;
}

/// W(v) = (grad v - grad^T v) / 2; skew-symmetric.
inline TensorField vorticity(const VectorField& v) {
  const auto g = spectral::gradient(v);
  TensorField out(v.grid_ptr());
  const int d = v.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const auto gij = g(i, j);
      const auto gji = g(j, i);
      auto upper = out(i, j);
      auto lower = out(j, i);
      for (std::size_t m = 0; m < upper.size(); ++m) {
        upper[m] = 0.5 * (gij[m] - gji[m]);
        lower[m] = -upper[m];
      }
    }
  }
  return out;
}

namespace detail {

/// Pointwise Q = tau W - W tau - b (D tau + tau D) from tau and grad v at
/// one grid point; row-major d x d arrays.
template <class T>
void q_pointwise(int d, const T* tau, const T* grad, double b, T* q) {
  T w[9], dd[9];
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      w[i * d + j] = 0.5 * (grad[i * d + j] - grad[j * d + i]);
      dd[i * d + j] = 0.5 * (grad[i * d + j] + grad[j * d + i]);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      T acc{};
      for (int k = 0; k < d; ++k) {
        acc += tau[i * d + k] * w[k * d + j] - w[i * d + k] * tau[k * d + j];
        acc -= b * (dd[i * d + k] * tau[k * d + j] + tau[i * d + k] * dd[k * d + j]);
      }
      q[i * d + j] = acc;
    }
  }
}

template <class T>
T load(const Complex& z) {
  if constexpr (std::is_same_v<T, double>) {
    return z.real();
  } else {
    return z;
  }
}

/// Momentum transport (v.grad)v and stress transport + Q at every grid point,
/// in real arithmetic when T = double. `dtau[c * d + k]` holds d_k tau_c.
template <class T>
void nonlinear_pointwise(int d, std::size_t npts, double b, const std::vector<spectral::PhysicalArray>& pv,
                         const std::vector<spectral::PhysicalArray>& pgrad,
                         const std::vector<spectral::PhysicalArray>& ptau,
                         const std::vector<spectral::PhysicalArray>& dtau,
                         std::vector<spectral::PhysicalArray>& mom, std::vector<spectral::PhysicalArray>& str) {
  T v[3], t[9], g[9], q[9];
  for (std::size_t x = 0; x < npts; ++x) {
    for (int i = 0; i < d; ++i) v[i] = load<T>(pv[static_cast<std::size_t>(i)][x]);
    for (int c = 0; c < d * d; ++c) {
      t[c] = load<T>(ptau[static_cast<std::size_t>(c)][x]);
      g[c] = load<T>(pgrad[static_cast<std::size_t>(c)][x]);
    }
    q_pointwise(d, t, g, b, q);
    for (int i = 0; i < d; ++i) {
      T acc{};
      for (int j = 0; j < d; ++j) acc += v[j] * g[i * d + j];
      mom[static_cast<std::size_t>(i)][x] = acc;
    }
    for (int c = 0; c < d * d; ++c) {
      const auto& row = dtau[static_cast<std::size_t>(c * d)];
      if (row.empty()) continue;
      T acc = q[c];
      for (int k = 0; k < d; ++k) acc += v[k] * load<T>(dtau[static_cast<std::size_t>(c * d + k)][x]);
      str[static_cast<std::size_t>(c)][x] = acc;
    }
  }
}

}  // namespace detail

/// Q(tau, grad v) = tau W - W tau - b (D tau + tau D), dealiased. For a
/// symmetric tau the result is symmetric and flagged so.
inline TensorField q_form(const TensorField& tau, const VectorField& v, double b) {
  spectral::check_same_grid(tau.grid(), v.grid());
  const auto& grid = tau.grid();
  const int d = grid.dim();
  const auto ptau = spectral::to_physical(tau);
  const auto pgrad = spectral::to_physical(spectral::gradient(v));
  const bool real = spectral::is_hermitian(tau) && spectral::is_hermitian(v);
  std::vector<spectral::PhysicalArray> pq(static_cast<std::size_t>(d * d), spectral::PhysicalArray(grid.size()));
  Complex t_loc[9], g_loc[9], q_loc[9];
  for (std::size_t x = 0; x < grid.size(); ++x) {
    for (int c = 0; c < d * d; ++c) {
      t_loc[c] = ptau[static_cast<std::size_t>(c)][x];
      g_loc[c] = pgrad[static_cast<std::size_t>(c)][x];
    }
    detail::q_pointwise(d, t_loc, g_loc, b, q_loc);
    for (int c = 0; c < d * d; ++c) pq[static_cast<std::size_t>(c)][x] = q_loc[c];
  }
  TensorField out(tau.grid_ptr());
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (tau.symmetric() && j < i) continue;
      spectral::from_physical(grid, pq[static_cast<std::size_t>(i * d + j)], out(i, j), real);
    }
  }
  if (tau.symmetric()) spectral::mirror_upper_triangle(out);
  return out;
}

/// J_n[(v . grad) u].
inline VectorField advect_vector(const VectorField& v, const VectorField& u) {
  return spectral::truncate(spectral::advect(v, u), v.grid().truncation_radius());
}

/// J_n[(v . grad) tau].
inline TensorField advect_tensor(const VectorField& v, const TensorField& tau) {
  return spectral::truncate(spectral::advect(v, tau), v.grid().truncation_radius());
}

/// Velocity drift split for the semi-implicit scheme.
struct VelocityDrift {
  VectorField nonstiff;  ///< P[-J_n((v.grad)v) + mu1 div tau]
  VectorField viscous;   ///< nu Laplacian v
};

inline VelocityDrift velocity_drift(const FlowState& state, const PhysicalParams& params) {
  VectorField rhs = spectral::divergence(state.tau);
  rhs *= params.mu1;
  if (params.nonlinear) rhs -= advect_vector(state.v, state.v);
  VectorField viscous = spectral::laplacian(state.v);
  viscous *= params.nu;
  return {spectral::truncate(spectral::leray_project(rhs), state.v.grid().truncation_radius()), std::move(viscous)};
}

/// Stress drift -J_n[(v.grad)tau] - a tau - J_n Q(tau, grad v) + mu2 D(v)
/// + (1/2) J_n S^2(tau), i.e. the Ito form of the Stratonovich stress noise.
inline TensorField stress_drift(const FlowState& state, const PhysicalParams& params, const NoiseOperators& noise) {
  const double n = state.v.grid().truncation_radius();
  TensorField out = deformation(state.v);
  out *= params.mu2;
  out.add_scaled(-params.a, state.tau);
  if (params.nonlinear) {
    out -= advect_tensor(state.v, state.tau);
    out -= spectral::truncate(q_form(state.tau, state.v, params.b), n);
  }
  out += spectral::truncate(noise.ito_correction(state.tau), n);
  return out;
}

/// Both drifts evaluated from one shared set of physical-space arrays. Equal
/// to velocity_drift(...).nonstiff and stress_drift(...) up to rounding, with
/// roughly half the transforms.
struct DriftTerms {
  VectorField velocity;  ///< nonstiff velocity drift, solenoidal, in V_n
  TensorField stress;
};

inline DriftTerms drift_terms(const FlowState& state, const PhysicalParams& params, const NoiseOperators& noise) {
  using spectral::PhysicalArray;
  const auto& grid = state.v.grid();
  const int d = grid.dim();
  const double n = grid.truncation_radius();
  const std::size_t npts = grid.size();
  const bool sym = state.tau.symmetric();

  // zero coefficients skip their terms entirely
  VectorField vel(state.v.grid_ptr());
  if (params.mu1 != 0.0) {
    vel = spectral::divergence(state.tau);
    vel *= params.mu1;
  }
  TensorField stress(state.tau.grid_ptr());
  if (params.mu2 != 0.0) {
    stress = deformation(state.v);
    stress *= params.mu2;
  }
  if (params.a != 0.0) stress.add_scaled(-params.a, state.tau);

  if (params.nonlinear) {
    const bool real = spectral::is_hermitian(state.v) && spectral::is_hermitian(state.tau);
    const auto pv = spectral::to_physical(state.v);
    const auto pgrad = spectral::to_physical(spectral::gradient(state.v));
    std::vector<PhysicalArray> ptau(static_cast<std::size_t>(d * d));
    std::vector<PhysicalArray> dtau(static_cast<std::size_t>(d * d * d));
    PhysicalArray spec(npts);
    for (int c = 0; c < d * d; ++c) {
      const int i = c / d, j = c % d;
      if (sym && j < i) {
        ptau[static_cast<std::size_t>(c)] = ptau[static_cast<std::size_t>(j * d + i)];
        continue;
      }
      const auto src = state.tau.component(c);
      ptau[static_cast<std::size_t>(c)] = spectral::to_physical(grid, src);
      for (int k = 0; k < d; ++k) {
        for (std::size_t m = 0; m < npts; ++m) spec[m] = Complex(0.0, grid.xi(m, k)) * src[m];
        auto& dst = dtau[static_cast<std::size_t>(c * d + k)];
        dst.resize(npts);
        spectral::backward_transform(grid, spec, dst);
      }
    }

    std::vector<PhysicalArray> mom(static_cast<std::size_t>(d), PhysicalArray(npts));
    std::vector<PhysicalArray> str(static_cast<std::size_t>(d * d), PhysicalArray(npts));
    if (real) {
      detail::nonlinear_pointwise<double>(d, npts, params.b, pv, pgrad, ptau, dtau, mom, str);
    } else {
      detail::nonlinear_pointwise<Complex>(d, npts, params.b, pv, pgrad, ptau, dtau, mom, str);
    }

    auto subtract_in_ball = [&](const PhysicalArray& phys, std::span<Complex> dst) {
      spectral::from_physical(grid, phys, spec, real);
      for (std::size_t m = 0; m < npts; ++m) {
        if (grid.in_ball(m, n)) dst[m] -= spec[m];
      }
    };
    for (int i = 0; i < d; ++i) subtract_in_ball(mom[static_cast<std::size_t>(i)], vel.component(i));
    for (int c = 0; c < d * d; ++c) {
      const int i = c / d, j = c % d;
      if (sym && j < i) continue;
      subtract_in_ball(str[static_cast<std::size_t>(c)], stress.component(c));
    }
    if (sym) spectral::mirror_upper_triangle(stress);
  }
  if (noise.config().stress.scale != 0.0) stress += spectral::truncate(noise.ito_correction(state.tau), n);
  stress.set_symmetric(sym && noise.preserves_symmetry());
  if (params.mu1 == 0.0 && !params.nonlinear) return {std::move(vel), std::move(stress)};
  return {spectral::truncate(spectral::leray_project(vel), n), std::move(stress)};
}

}  // namespace oldroyd
