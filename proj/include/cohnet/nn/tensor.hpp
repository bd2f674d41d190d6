#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cohnet/error.hpp"

namespace cohnet::nn {

using Shape = std::vector<int>;

inline Eigen::Index shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Eigen::Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor: (batch, channels, rows, cols) for images,
/// (batch, features) for vectors.
template <typename S>
struct Tensor {
  using Scalar = S;
  using Vector = Eigen::Array<S, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Shape shape;
  Vector data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(Vector::Zero(shape_size(shape))) {}
  Tensor(Shape s, Vector d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape))
      fail(ErrorKind::ShapeMismatch, "tensor data does not match shape " + shape_string(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  Eigen::Index size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  /// View as a rows x cols row-major matrix over the same storage.
  MatrixMap matrix(Eigen::Index rows, Eigen::Index cols) {
    return MatrixMap(data.data(), rows, cols);
  }
  ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const {
    return ConstMatrixMap(data.data(), rows, cols);
  }

  bool all_finite() const { return data.isFinite().all(); }

  template <typename T>
  Tensor<T> cast() const {
    if (shape.empty()) return Tensor<T>();
    return Tensor<T>(shape, data.template cast<T>());
  }
};

}  // namespace cohnet::nn
