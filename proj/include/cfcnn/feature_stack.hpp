#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cfcnn/errors.hpp"

namespace cfcnn {

using Index = Eigen::Index;

/// Column vector in R^m: mixing vectors, network outputs and targets.
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vec1D = Vec<double>;

/// Shape of an element of R^{rows x cols} (x) R^{depth}.
struct Shape {
  Index rows = 0;
  Index cols = 0;
  Index depth = 0;

  Index size() const { return rows * cols * depth; }
  Index slice_size() const { return rows * cols; }

  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return std::to_string(rows) + "x" + std::to_string(cols) + "x" + std::to_string(depth);
  }
};

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << s.str(); }

/// An ordered stack of `depth` real matrices of size rows x cols, i.e. the
/// element sum_i X_i (x) e_i with respect to the standard bases.
///
/// Storage is one contiguous buffer, slice-major: slice 1 occupies the first
/// rows*cols scalars, each slice row-major. Element and slice accessors are
/// 1-based, matching the window arithmetic used throughout the library.
template <typename Scalar>
class FeatureStack {
 public:
  using Storage = Vec<Scalar>;
  using SliceMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using SliceMap = Eigen::Map<SliceMatrix>;
  using ConstSliceMap = Eigen::Map<const SliceMatrix>;

  FeatureStack() = default;

  FeatureStack(Index rows, Index cols, Index depth) : FeatureStack(Shape{rows, cols, depth}) {}

  explicit FeatureStack(const Shape& shape) : shape_(shape) {
    if (shape.rows <= 0 || shape.cols <= 0 || shape.depth <= 0) {
      throw DimensionError("FeatureStack: dimensions must be positive, got " + shape.str());
    }
    data_ = Storage::Zero(shape.size());
  }

  FeatureStack(const Shape& shape, Storage data) : FeatureStack(shape) {
    if (data.size() != shape.size()) {
      throw DimensionError("FeatureStack: " + std::to_string(data.size()) +
                           " scalars cannot fill shape " + shape.str());
    }
    data_ = std::move(data);
  }

  static FeatureStack Zero(const Shape& shape) { return FeatureStack(shape); }

  static FeatureStack Constant(const Shape& shape, Scalar value) {
    FeatureStack out(shape);
    out.data_.setConstant(value);
    return out;
  }

  /// Single-slice stack from a matrix.
  template <typename Derived>
  static FeatureStack FromMatrix(const Eigen::MatrixBase<Derived>& m) {
    FeatureStack out(m.rows(), m.cols(), 1);
    out.slice(1) = m;
    return out;
  }

  /// Entries drawn i.i.d. uniform on [lo, hi].
  template <typename Rng>
  static FeatureStack Random(const Shape& shape, Rng& rng, Scalar lo = Scalar(-1), Scalar hi = Scalar(1)) {
    FeatureStack out(shape);
    std::uniform_real_distribution<Scalar> dist(lo, hi);
    for (Index i = 0; i < out.size(); ++i) out.data_[i] = dist(rng);
    return out;
  }

  const Shape& shape() const { return shape_; }
  Index rows() const { return shape_.rows; }
  Index cols() const { return shape_.cols; }
  Index depth() const { return shape_.depth; }
  Index size() const { return data_.size(); }

  /// Entry (row, col) of slice `slice`; all 1-based.
  Scalar& operator()(Index row, Index col, Index slice) { return data_[offset(row, col, slice)]; }
  Scalar operator()(Index row, Index col, Index slice) const { return data_[offset(row, col, slice)]; }

  SliceMap slice(Index a) {
    return SliceMap(data_.data() + (a - 1) * shape_.slice_size(), shape_.rows, shape_.cols);
  }
  ConstSliceMap slice(Index a) const {
    return ConstSliceMap(data_.data() + (a - 1) * shape_.slice_size(), shape_.rows, shape_.cols);
  }

  /// Flat slice-major coefficients.
  Storage& coeffs() { return data_; }
  const Storage& coeffs() const { return data_; }

  void setZero() { data_.setZero(); }

  FeatureStack& operator+=(const FeatureStack& other) {
    require_same_shape(*this, other, "operator+=");
    data_ += other.data_;
    return *this;
  }
  FeatureStack& operator-=(const FeatureStack& other) {
    require_same_shape(*this, other, "operator-=");
    data_ -= other.data_;
    return *this;
  }
  FeatureStack& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend FeatureStack operator+(FeatureStack a, const FeatureStack& b) { return a += b; }
  friend FeatureStack operator-(FeatureStack a, const FeatureStack& b) { return a -= b; }
  friend FeatureStack operator*(Scalar s, FeatureStack a) { return a *= s; }
  friend FeatureStack operator*(FeatureStack a, Scalar s) { return a *= s; }
  friend FeatureStack operator-(FeatureStack a) {
    a.data_ = -a.data_;
    return a;
  }

  friend bool operator==(const FeatureStack& a, const FeatureStack& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static void require_same_shape(const FeatureStack& a, const FeatureStack& b, const char* what) {
    if (a.shape() != b.shape()) {
      throw DimensionError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                           b.shape().str());
    }
  }

 private:
  Index offset(Index row, Index col, Index slice) const {
    return (slice - 1) * shape_.slice_size() + (row - 1) * shape_.cols + (col - 1);
  }

  Shape shape_{};
  Storage data_;
};

using Stack = FeatureStack<double>;

/// Sum over all positions of elementwise products; the inner product on
/// R^{n x l} (x) R^m. Summed sequentially in storage order.
template <typename Scalar>
Scalar inner(const FeatureStack<Scalar>& a, const FeatureStack<Scalar>& b) {
  FeatureStack<Scalar>::require_same_shape(a, b, "inner");
  Scalar acc(0);
  const auto& x = a.coeffs();
  const auto& y = b.coeffs();
  for (Index i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

/// Slice-wise Hadamard product.
template <typename Scalar>
FeatureStack<Scalar> hadamard(const FeatureStack<Scalar>& a, const FeatureStack<Scalar>& b) {
  FeatureStack<Scalar>::require_same_shape(a, b, "hadamard");
  return FeatureStack<Scalar>(a.shape(), a.coeffs().cwiseProduct(b.coeffs()));
}

/// alpha * x + y
template <typename Scalar>
FeatureStack<Scalar> axpy(Scalar alpha, const FeatureStack<Scalar>& x, const FeatureStack<Scalar>& y) {
  FeatureStack<Scalar>::require_same_shape(x, y, "axpy");
  FeatureStack<Scalar> out = y;
  out.coeffs() += alpha * x.coeffs();
  return out;
}

template <typename Scalar>
Scalar frobenius_norm_sq(const FeatureStack<Scalar>& a) {
  return inner(a, a);
}

/// Depth view of a 1x1xN stack as a vector in R^N.
template <typename Scalar>
Vec<Scalar> depth_vector(const FeatureStack<Scalar>& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("depth_vector: expected a 1x1xN stack, got " + s.shape().str());
  }
  return s.coeffs();
}

/// Elementwise equality of two vector lists, false on any size mismatch.
template <typename Scalar>
bool same_vectors(const std::vector<Vec<Scalar>>& a, const std::vector<Vec<Scalar>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || a[i] != b[i]) return false;
  }
  return true;
}

template <typename Scalar>
FeatureStack<Scalar> from_depth_vector(const Vec<Scalar>& v) {
  return FeatureStack<Scalar>(Shape{1, 1, v.size()}, v);
}

}  // namespace cfcnn
