#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oldroyd/spectral_grid.hpp"

namespace oldroyd::spectral {

/// 64-byte aligned storage so FFT plans can use SIMD codelets on every array.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{alignment}); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using CoeffVector = std::vector<Complex, AlignedAllocator<Complex>>;

struct ScalarKind {
  static constexpr int rank = 0;
  static int components(int) { return 1; }
};

struct VectorKind {
  static constexpr int rank = 1;
  static int components(int dim) { return dim; }
};

struct TensorKind {
  static constexpr int rank = 2;
  static int components(int dim) { return dim * dim; }
};

/// Fourier coefficients of a scalar, vector or d x d tensor field on a
/// SpectralGrid. The zero-mode coefficient equals the field mean.
///
/// Tensor fields may carry a symmetric flag. Operations that know their
/// result is symmetric write component (i,j) and copy it into (j,i), so the
/// flag always describes the data exactly.
template <class Kind>
class Field {
 public:
  using kind = Kind;

  explicit Field(GridPtr grid)
      : grid_(std::move(grid)),
        data_(static_cast<std::size_t>(Kind::components(grid_->dim())),
              CoeffVector(grid_->size(), Complex{})) {}

  const SpectralGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int dim() const { return grid_->dim(); }
  int components() const { return static_cast<int>(data_.size()); }
  std::size_t size() const { return grid_->size(); }

  std::span<Complex> component(int c) { return data_[static_cast<std::size_t>(c)]; }
  std::span<const Complex> component(int c) const { return data_[static_cast<std::size_t>(c)]; }

  std::span<Complex> operator()(int i, int j)
    requires(Kind::rank == 2)
  {
    return component(i * dim() + j);
  }
  std::span<const Complex> operator()(int i, int j) const
    requires(Kind::rank == 2)
  {
    return component(i * dim() + j);
  }

  bool symmetric() const { return symmetric_; }
  void set_symmetric(bool flag)
    requires(Kind::rank == 2)
  {
    symmetric_ = flag;
  }

  /// Rebinds the coefficients to another grid with the same discretization.
  Field with_grid(GridPtr grid) const {
    if (!grid->same_discretization(*grid_)) {
      throw std::invalid_argument("field: grid mismatch in with_grid");
    }
    Field out = *this;
    out.grid_ = std::move(grid);
    return out;
  }

  Field& operator+=(const Field& other) {
    check_compatible(other);
    for (std::size_t c = 0; c < data_.size(); ++c) {
      auto& dst = data_[c];
      const auto& src = other.data_[c];
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] += src[m];
    }
    symmetric_ = symmetric_ && other.symmetric_;
    return *this;
  }

  Field& operator-=(const Field& other) {
    check_compatible(other);
    for (std::size_t c = 0; c < data_.size(); ++c) {
      auto& dst = data_[c];
      const auto& src = other.data_[c];
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] -= src[m];
    }
    symmetric_ = symmetric_ && other.symmetric_;
    return *this;
  }

  Field& operator*=(double factor) {
    for (auto& comp : data_) {
      for (auto& x : comp) x *= factor;
    }
    return *this;
  }

  /// this += factor * other
  Field& add_scaled(double factor, const Field& other) {
    check_compatible(other);
    for (std::size_t c = 0; c < data_.size(); ++c) {
      auto& dst = data_[c];
      const auto& src = other.data_[c];
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] += factor * src[m];
    }
    symmetric_ = symmetric_ && other.symmetric_;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double f, Field a) { return a *= f; }
  friend Field operator*(Field a, double f) { return a *= f; }

  friend bool operator==(const Field& a, const Field& b) {
    return a.grid_->same_discretization(*b.grid_) && a.data_ == b.data_;
  }

  void check_compatible(const Field& other) const {
    if (!grid_->same_discretization(*other.grid_)) {
      throw std::invalid_argument("field: grid mismatch");
    }
  }

 private:
  GridPtr grid_;
  std::vector<CoeffVector> data_;
  bool symmetric_ = false;
};

using ScalarField = Field<ScalarKind>;
using VectorField = Field<VectorKind>;
using TensorField = Field<TensorKind>;

inline void check_same_grid(const SpectralGrid& a, const SpectralGrid& b) {
  if (!a.same_discretization(b)) throw std::invalid_argument("grid mismatch");
}

/// Largest |f(k) - conj f(-k)| over all components; zero for real fields.
template <class Kind>
double hermitian_defect(const Field<Kind>& f) {
  double worst = 0.0;
  const auto& grid = f.grid();
  for (int c = 0; c < f.components(); ++c) {
    const auto data = f.component(c);
    for (std::size_t m = 0; m < data.size(); ++m) {
      worst = std::max(worst, std::abs(data[m] - std::conj(data[grid.mirror(m)])));
    }
  }
  return worst;
}

template <class Kind>
bool is_hermitian(const Field<Kind>& f) {
  const auto& grid = f.grid();
  for (int c = 0; c < f.components(); ++c) {
    const auto data = f.component(c);
    for (std::size_t m = 0; m < data.size(); ++m) {
      if (data[m] != std::conj(data[grid.mirror(m)])) return false;
    }
  }
  return true;
}

/// Replaces f(k) by (f(k) + conj f(-k)) / 2, the coefficients of Re f.
inline void enforce_hermitian(std::span<Complex> data, const SpectralGrid& grid) {
  for (std::size_t m = 0; m < data.size(); ++m) {
    const std::size_t p = grid.mirror(m);
    if (p < m) continue;
    if (p == m) {
      data[m] = Complex(data[m].real(), 0.0);
      continue;
    }
    const Complex avg = 0.5 * (data[m] + std::conj(data[p]));
    data[m] = avg;
    data[p] = std::conj(avg);
  }
}

template <class Kind>
void enforce_hermitian(Field<Kind>& f) {
  for (int c = 0; c < f.components(); ++c) enforce_hermitian(f.component(c), f.grid());
}

/// Copies the upper triangle onto the lower one and sets the symmetric flag.
inline void mirror_upper_triangle(TensorField& t) {
  const int d = t.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const auto src = t(i, j);
      std::copy(src.begin(), src.end(), t(j, i).begin());
    }
  }
  t.set_symmetric(true);
}

inline TensorField transpose(const TensorField& t) {
  TensorField out(t.grid_ptr());
  const int d = t.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const auto src = t(j, i);
      std::copy(src.begin(), src.end(), out(i, j).begin());
    }
  }
  out.set_symmetric(t.symmetric());
  return out;
}

/// Tensor field whose (i,i) components are the scalar field and all others zero.
inline TensorField identity_times(const ScalarField& f) {
  TensorField out(f.grid_ptr());
  for (int i = 0; i < f.dim(); ++i) {
    const auto src = f.component(0);
    std::copy(src.begin(), src.end(), out(i, i).begin());
  }
  out.set_symmetric(true);
  return out;
}

}  // namespace oldroyd::spectral
