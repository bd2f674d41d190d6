#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <type_traits>

#include <Eigen/Core>

#include "cohnet/error.hpp"

namespace cohnet {

/// Largest accepted raster side, in pixels.
inline constexpr int kMaxRasterSide = 16384;

template <typename T>
using Grid = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Grid<bool>;

/// A 2-D grid of samples with a per-pixel validity mask.
///
/// Storage is row-major: `values(row, col)` with `rows() == height()`.
/// Non-finite samples are always marked invalid.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, T fill = T{})
      : values_(Grid<T>::Constant(check_dim(height), check_dim(width), fill)),
        valid_(Mask::Constant(height, width, true)) {
    sanitize();
  }

  Raster(Grid<T> values, Mask valid)
      : values_(std::move(values)), valid_(std::move(valid)) {
    if (values_.rows() != valid_.rows() || values_.cols() != valid_.cols())
      fail(ErrorKind::ShapeMismatch, "raster values and mask differ in shape");
    check_dim(static_cast<int>(values_.rows()));
    check_dim(static_cast<int>(values_.cols()));
    sanitize();
  }

  explicit Raster(Grid<T> values)
      : Raster(values, Mask::Constant(values.rows(), values.cols(), true)) {}

  int width() const { return static_cast<int>(values_.cols()); }
  int height() const { return static_cast<int>(values_.rows()); }
  Eigen::Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  const Grid<T>& values() const { return values_; }
  const Mask& valid() const { return valid_; }

  T operator()(int row, int col) const { return values_(row, col); }
  bool is_valid(int row, int col) const { return valid_(row, col); }

  void set(int row, int col, T v) {
    values_(row, col) = v;
    valid_(row, col) = is_finite(v);
  }

  void invalidate(int row, int col) { valid_(row, col) = false; }

  Eigen::Index valid_count() const { return valid_.count(); }

  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return width() == other.width() && height() == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    if (!a.same_shape(b)) return false;
    if ((a.valid_ != b.valid_).any()) return false;
    // bitwise comparison so that signed zeros and payloads survive round trips
    return std::memcmp(a.values_.data(), b.values_.data(),
                       sizeof(T) * static_cast<std::size_t>(a.size())) == 0;
  }

 private:
  static int check_dim(int n) {
    if (n < 0 || n > kMaxRasterSide)
      fail(ErrorKind::DimensionOverflow, "raster dimension out of range");
    return n;
  }

  static bool is_finite(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      return std::isfinite(v);
    } else {
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    }
  }

  void sanitize() {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (!is_finite(values_.data()[i])) valid_.data()[i] = false;
  }

  Grid<T> values_;
  Mask valid_;
};

using ScalarRaster = Raster<float>;
using ComplexRaster = Raster<std::complex<float>>;

/// What a scalar raster carries; each role has its own range contract.
enum class RasterRole { Generic, CoherenceMagnitude, Height, Wavenumber };

/// Throws InvalidArgument if any valid pixel violates the role's range.
void check_role(const ScalarRaster& r, RasterRole role, double h_max = 60.0);

/// Pixel-wise magnitude; mask carried over.
ScalarRaster magnitude(const ComplexRaster& r);

/// Logical AND of two masks applied to a copy of `r`.
ScalarRaster with_mask(const ScalarRaster& r, const Mask& keep);

}  // namespace cohnet
