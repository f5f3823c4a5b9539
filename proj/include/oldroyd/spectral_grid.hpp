#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace oldroyd::spectral {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Integer wavenumber multi-index; unused trailing axes are zero.
using ModeIndex = std::array<int, 3>;

/// Periodic box [0, L)^dim discretized with M Fourier modes per axis.
///
/// Coefficients are stored row-major (last axis fastest) over integer
/// wavenumbers k in [-M/2, M/2)^dim; the physical wavevector is
/// xi = (2 pi / L) k. The grid also carries the Galerkin cutoff radius n of
/// the truncation ball |xi| <= n and the 2/3-rule dealiasing box.
class SpectralGrid {
 public:
  SpectralGrid(int dim, int modes, double box_length, double truncation_radius,
               double dealias_fraction = 2.0 / 3.0)
      : dim_(dim),
        modes_(modes),
        box_length_(box_length),
        truncation_radius_(truncation_radius),
        dealias_fraction_(dealias_fraction) {
    if (dim != 2 && dim != 3) {
      throw std::invalid_argument("grid: dim must be 2 or 3, got " + std::to_string(dim));
    }
    if (modes % 2 != 0) {
      throw std::invalid_argument("grid: modes per axis must be even, got " + std::to_string(modes));
    }
    if (modes < 8) {
      throw std::invalid_argument("grid: modes per axis must be >= 8, got " + std::to_string(modes));
    }
    if (!(box_length > 0.0) || !std::isfinite(box_length)) {
      throw std::invalid_argument("grid: box length must be positive");
    }
    if (!(dealias_fraction > 0.0) || dealias_fraction > 1.0) {
      throw std::invalid_argument("grid: dealias fraction must lie in (0, 1]");
    }
    if (!(truncation_radius > 0.0)) {
      throw std::invalid_argument("grid: truncation radius must be positive");
    }
    if (truncation_radius > dealias_radius_limit() * (1.0 + 1e-12)) {
      throw std::invalid_argument("grid: truncation radius " + std::to_string(truncation_radius) +
                                  " exceeds dealias limit " + std::to_string(dealias_radius_limit()));
    }
    build_tables();
  }

  int dim() const { return dim_; }
  int modes() const { return modes_; }
  double box_length() const { return box_length_; }
  double truncation_radius() const { return truncation_radius_; }
  double dealias_fraction() const { return dealias_fraction_; }

  /// Number of stored coefficients, M^dim.
  std::size_t size() const { return size_; }

  double wavenumber_unit() const { return kTwoPi / box_length_; }

  /// Largest |k_axis| kept by the dealiasing rule, floor(fraction * M / 2).
  int max_retained_index() const {
    return static_cast<int>(std::floor(dealias_fraction_ * modes_ / 2.0 + 1e-9));
  }

  /// Largest admissible truncation radius, fraction * (M/2) * (2 pi / L).
  double dealias_radius_limit() const { return dealias_fraction_ * (modes_ / 2.0) * wavenumber_unit(); }

  const ModeIndex& index(std::size_t m) const { return index_[m]; }
  double xi(std::size_t m, int axis) const { return wavenumber_unit() * index_[m][axis]; }
  double xi_squared(std::size_t m) const { return xi2_[m]; }

  /// Storage position of -k (Nyquist indices map to themselves).
  std::size_t mirror(std::size_t m) const { return mirror_[m]; }

  bool dealiased(std::size_t m) const { return dealias_mask_[m] != 0; }

  /// Closed-ball membership |xi| <= radius.
  bool in_ball(std::size_t m, double radius) const {
    return xi2_[m] <= radius * radius * (1.0 + 1e-12);
  }
  bool in_truncation_ball(std::size_t m) const { return in_ball(m, truncation_radius_); }

  std::size_t flat_index(const ModeIndex& k) const {
    std::size_t m = 0;
    for (int a = 0; a < dim_; ++a) {
      const int wrapped = ((k[a] % modes_) + modes_) % modes_;
      m = m * static_cast<std::size_t>(modes_) + static_cast<std::size_t>(wrapped);
    }
    return m;
  }

  /// Physical coordinate of grid point m along an axis.
  double coordinate(std::size_t m, int axis) const {
    std::size_t stride = 1;
    for (int a = dim_ - 1; a > axis; --a) stride *= static_cast<std::size_t>(modes_);
    const auto i = (m / stride) % static_cast<std::size_t>(modes_);
    return box_length_ * static_cast<double>(i) / modes_;
  }

  /// Same box and resolution; the truncation radius may differ.
  bool same_discretization(const SpectralGrid& other) const {
    return dim_ == other.dim_ && modes_ == other.modes_ && box_length_ == other.box_length_ &&
           dealias_fraction_ == other.dealias_fraction_;
  }

  bool operator==(const SpectralGrid& other) const {
    return same_discretization(other) && truncation_radius_ == other.truncation_radius_;
  }

 private:
  void build_tables() {
    size_ = 1;
    for (int a = 0; a < dim_; ++a) size_ *= static_cast<std::size_t>(modes_);
    index_.resize(size_);
    xi2_.resize(size_);
    mirror_.resize(size_);
    dealias_mask_.resize(size_);
    const int kmax = max_retained_index();
    const double unit = wavenumber_unit();
    for (std::size_t m = 0; m < size_; ++m) {
      ModeIndex k{0, 0, 0};
      std::size_t rest = m;
      for (int a = dim_ - 1; a >= 0; --a) {
        const int i = static_cast<int>(rest % static_cast<std::size_t>(modes_));
        rest /= static_cast<std::size_t>(modes_);
        k[a] = i < modes_ / 2 ? i : i - modes_;
      }
      index_[m] = k;
      double s2 = 0.0;
      bool keep = true;
      ModeIndex neg{0, 0, 0};
      for (int a = 0; a < dim_; ++a) {
        s2 += (unit * k[a]) * (unit * k[a]);
        keep = keep && std::abs(k[a]) <= kmax;
        neg[a] = -k[a];
      }
      xi2_[m] = s2;
      dealias_mask_[m] = keep ? 1 : 0;
      mirror_[m] = flat_index(neg);
    }
  }

  int dim_;
  int modes_;
  double box_length_;
  double truncation_radius_;
  double dealias_fraction_;
  std::size_t size_ = 0;
  std::vector<ModeIndex> index_;
  std::vector<double> xi2_;
  std::vector<std::size_t> mirror_;
  std::vector<unsigned char> dealias_mask_;
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

inline GridPtr make_grid(int dim, int modes, double box_length, double truncation_radius,
                         double dealias_fraction = 2.0 / 3.0) {
  return std::make_shared<const SpectralGrid>(dim, modes, box_length, truncation_radius,
                                              dealias_fraction);
}

/// Same discretization with a different Galerkin cutoff.
inline GridPtr with_truncation(const SpectralGrid& grid, double truncation_radius) {
  return make_grid(grid.dim(), grid.modes(), grid.box_length(), truncation_radius,
                   grid.dealias_fraction());
}

}  // namespace oldroyd::spectral
